#include <doctest.h>

#include "mms/cohort.hpp"

using namespace mms;

namespace {

ExamRecord screening(const std::string& patient, const std::string& id, const std::string& date,
                     std::optional<int> birads) {
    ExamRecord e;
    e.patient_id = patient;
    e.exam_id = id;
    e.date = date_from_string(date);
    e.kind = ExamKind::ScreeningMammo;
    e.birads = birads;
    return e;
}

ExamRecord imaging(const std::string& patient, const std::string& id, const std::string& date,
                   std::optional<int> birads, ExamKind kind = ExamKind::OtherBreastImaging) {
    ExamRecord e;
    e.patient_id = patient;
    e.exam_id = id;
    e.date = date_from_string(date);
    e.kind = kind;
    e.birads = birads;
    return e;
}

PathologyRecord pathology(const std::string& patient, const std::string& date, Laterality lat,
                          bool malignant, bool benign) {
    PathologyRecord p;
    p.patient_id = patient;
    p.date = date_from_string(date);
    p.laterality = lat;
    p.malignant = malignant;
    p.benign = benign;
    return p;
}

}  // namespace

TEST_CASE("month_window clamps month ends") {
    auto jan = month_window(date_from_string("2023-01-31"), 1);
    CHECK(to_string(jan.second) == "2023-02-28");
    auto leap = month_window(date_from_string("2024-01-31"), 1);
    CHECK(to_string(leap.second) == "2024-02-29");
    auto plain = month_window(date_from_string("2024-03-15"), 6);
    CHECK(to_string(plain.second) == "2024-09-15");

    // Start-anchored windows nest.
    auto six = month_window(date_from_string("2024-03-15"), 6);
    auto eleven = month_window(date_from_string("2024-03-15"), 11);
    CHECK(six.first == eleven.first);
    CHECK(six.second < eleven.second);
}

TEST_CASE("assign_breast_labels window boundaries") {
    ExamRecord exam = screening("p", "e", "2024-01-01", 0);

    // +120 days is 2024-04-30: inclusive.
    auto labels = assign_breast_labels(
        exam, {pathology("p", "2024-04-30", Laterality::Left, true, false)});
    CHECK(labels.left_malignant == 1);
    CHECK(labels.right_malignant == 0);

    // +121 days is outside.
    auto outside = assign_breast_labels(
        exam, {pathology("p", "2024-05-01", Laterality::Left, true, false)});
    CHECK(outside.left_malignant == 0);

    // Day before the exam does not count.
    auto before = assign_breast_labels(
        exam, {pathology("p", "2023-12-31", Laterality::Left, true, false)});
    CHECK(before.left_malignant == 0);

    // Other patient's record never counts.
    auto other = assign_breast_labels(
        exam, {pathology("q", "2024-02-01", Laterality::Left, true, false)});
    CHECK(other.left_malignant == 0);

    // Both flags can be positive at once.
    auto both = assign_breast_labels(
        exam, {pathology("p", "2024-02-01", Laterality::Right, true, true)});
    CHECK(both.right_malignant == 1);
    CHECK(both.right_benign == 1);

    CHECK(assign_breast_labels(exam, {}).left_malignant == 0);
}

TEST_CASE("initial_assignment precedence") {
    ExamRecord exam = screening("p", "e", "2024-01-01", 0);
    CHECK(initial_assignment(exam, {pathology("p", "2024-01-20", Laterality::Left, true, false),
                                    pathology("p", "2024-01-21", Laterality::Left, false, true)}) ==
          Assignment::Malignant);
    CHECK(initial_assignment(exam, {pathology("p", "2024-01-20", Laterality::Left, false, true)}) ==
          Assignment::Benign);
    CHECK(initial_assignment(exam, {}) == Assignment::Negative);
}

namespace {

PatientTimeline tl_with(const ExamRecord& exam, std::vector<ExamRecord> extra = {},
                        std::vector<PathologyRecord> path = {}) {
    PatientTimeline tl;
    tl.patient_id = exam.patient_id;
    tl.exams.push_back(exam);
    for (auto& e : extra) tl.exams.push_back(e);
    std::stable_sort(tl.exams.begin(), tl.exams.end(),
                     [](const ExamRecord& a, const ExamRecord& b) { return a.date < b.date; });
    tl.pathology = std::move(path);
    std::stable_sort(tl.pathology.begin(), tl.pathology.end(),
                     [](const PathologyRecord& a, const PathologyRecord& b) {
                         return a.date < b.date;
                     });
    return tl;
}

FilterOutcome single_outcome(const PatientTimeline& tl) {
    auto outcomes = filter_test_set(tl);
    REQUIRE(outcomes.size() == 1);
    return outcomes[0];
}

}  // namespace

TEST_CASE("E1 excludes non-screening BI-RADS") {
    CHECK(single_outcome(tl_with(screening("p", "e", "2024-01-15", 3))).rule == FilterRule::E1);
    CHECK(single_outcome(tl_with(screening("p", "e", "2024-01-15", 4))).rule == FilterRule::E1);
    CHECK(single_outcome(tl_with(screening("p", "e", "2024-01-15", std::nullopt))).rule ==
          FilterRule::E1);
}

TEST_CASE("E2/E3 exclude pathology-positive exams read as negative") {
    auto e2 = single_outcome(
        tl_with(screening("p", "e", "2024-01-15", 1), {},
                {pathology("p", "2024-02-10", Laterality::Left, true, false)}));
    CHECK(e2.rule == FilterRule::E2);
    CHECK(e2.assignment == Assignment::Malignant);

    auto e3 = single_outcome(
        tl_with(screening("p", "e", "2024-01-15", 2), {},
                {pathology("p", "2024-02-10", Laterality::Left, false, true)}));
    CHECK(e3.rule == FilterRule::E3);

    // Malignant with BI-RADS 0 passes E2 and, with visible cancer, everything.
    auto kept = single_outcome(
        tl_with(screening("p", "e", "2024-01-15", 0), {},
                {pathology("p", "2024-02-10", Laterality::Left, true, false)}));
    CHECK(kept.rule == FilterRule::Pass);
    CHECK(kept.included);
}

TEST_CASE("E4 needs a resolving follow-up within six months") {
    // No follow-up at all: excluded.
    CHECK(single_outcome(tl_with(screening("p", "e", "2024-01-15", 0))).rule == FilterRule::E4);

    // Follow-up at +4 months, BI-RADS 2, nothing else: included.
    auto ok = single_outcome(tl_with(screening("p", "e", "2024-01-15", 0),
                                     {imaging("p", "f", "2024-05-15", 2)}));
    CHECK(ok.rule == FilterRule::Pass);

    // Resolving follow-up plus a suspicious BI-RADS 4 in the window: excluded.
    auto bad = single_outcome(tl_with(screening("p", "e", "2024-01-15", 0),
                                      {imaging("p", "f", "2024-05-15", 2),
                                       imaging("p", "g", "2024-06-20", 4)}));
    CHECK(bad.rule == FilterRule::E4);

    // A follow-up just outside six months does not qualify.
    auto late = single_outcome(tl_with(screening("p", "e", "2024-01-15", 0),
                                       {imaging("p", "f", "2024-07-16", 2)}));
    CHECK(late.rule == FilterRule::E4);

    // Exactly at the six-month boundary qualifies (inclusive window).
    auto boundary = single_outcome(tl_with(screening("p", "e", "2024-01-15", 0),
                                           {imaging("p", "f", "2024-07-15", 2)}));
    CHECK(boundary.rule == FilterRule::Pass);

    // A follow-up without a BI-RADS reading cannot resolve the suspicion.
    auto unresolved = single_outcome(tl_with(screening("p", "e", "2024-01-15", 0),
                                             {imaging("p", "f", "2024-05-15", std::nullopt)}));
    CHECK(unresolved.rule == FilterRule::E4);
}

TEST_CASE("E5 excludes negatives with imaging inside eleven months") {
    // Imaging at +5 months violates the quiet window.
    auto violated = single_outcome(tl_with(screening("p", "e", "2024-01-15", 1),
                                           {imaging("p", "f", "2024-06-15", 1)}));
    CHECK(violated.rule == FilterRule::E5);

    // Exactly eleven months later still violates (inclusive).
    auto edge = single_outcome(tl_with(screening("p", "e", "2024-01-15", 2),
                                       {imaging("p", "f", "2024-12-15", 1)}));
    CHECK(edge.rule == FilterRule::E5);

    // Twelve months later is the expected annual screen: included.
    auto outcomes = filter_test_set(tl_with(screening("p", "e", "2024-01-15", 1),
                                            {screening("p", "f", "2025-01-20", 1)}));
    REQUIRE(outcomes.size() == 2);
    CHECK(outcomes[0].rule == FilterRule::Pass);
    CHECK(outcomes[0].included);
}

TEST_CASE("occult-only cancers are rejected after the E rules") {
    ExamRecord exam = screening("p", "e", "2024-01-15", 0);
    exam.occult_left = true;
    auto occult = single_outcome(
        tl_with(exam, {}, {pathology("p", "2024-02-10", Laterality::Left, true, false)}));
    CHECK(occult.rule == FilterRule::OccultOnly);
    CHECK_FALSE(occult.included);

    // A second, visible cancer on the other side keeps the exam.
    auto visible = single_outcome(
        tl_with(exam, {},
                {pathology("p", "2024-02-10", Laterality::Left, true, false),
                 pathology("p", "2024-02-12", Laterality::Right, true, false)}));
    CHECK(visible.rule == FilterRule::Pass);
}

TEST_CASE("rule precedence: reordering changes the tag on overlapping exams") {
    // Malignant + BI-RADS 1 + occult flag triggers both E2 and OccultOnly.
    ExamRecord exam = screening("p", "e", "2024-01-15", 1);
    exam.occult_left = true;
    auto tl = tl_with(exam, {}, {pathology("p", "2024-02-10", Laterality::Left, true, false)});

    auto canonical = filter_test_set(tl);
    REQUIRE(canonical.size() == 1);
    CHECK(canonical[0].rule == FilterRule::E2);

    auto mutated = filter_test_set(
        tl, {FilterRule::OccultOnly, FilterRule::E1, FilterRule::E2, FilterRule::E3,
             FilterRule::E4, FilterRule::E5});
    REQUIRE(mutated.size() == 1);
    CHECK(mutated[0].rule == FilterRule::OccultOnly);
}

TEST_CASE("filter_test_set is deterministic and tags every screening exam once") {
    PatientTimeline tl;
    tl.patient_id = "p";
    tl.exams = {screening("p", "a", "2022-01-10", 1), screening("p", "b", "2023-01-20", 0),
                imaging("p", "c", "2023-03-01", 2), screening("p", "d", "2024-05-05", 3)};
    tl.pathology = {};
    auto first = filter_test_set(tl);
    auto second = filter_test_set(tl);
    REQUIRE(first.size() == 3);  // only screening exams receive outcomes
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].rule == second[i].rule);
        CHECK(first[i].included == (first[i].rule == FilterRule::Pass));
    }
    // Exam "a" is negative BI-RADS 1 with imaging 14 months later: quiet. But
    // exam "b" sits 12 months after it... outside 11 months, so "a" passes.
    CHECK(first[0].rule == FilterRule::Pass);
    // Exam "b": negative BI-RADS 0 with follow-up imaging BI-RADS 2 at +6w.
    CHECK(first[1].rule == FilterRule::Pass);
    CHECK(first[2].rule == FilterRule::E1);
}

TEST_CASE("out-of-window pathology never flips an outcome") {
    // Mutation-style check: moving the pathology outside 120 days turns a
    // malignant exam into a negative one.
    ExamRecord exam = screening("p", "e", "2024-01-15", 1);
    auto in_window =
        tl_with(exam, {}, {pathology("p", "2024-04-10", Laterality::Left, true, false)});
    CHECK(single_outcome(in_window).rule == FilterRule::E2);

    auto out_window =
        tl_with(exam, {}, {pathology("p", "2024-08-10", Laterality::Left, true, false)});
    auto outcome = single_outcome(out_window);
    CHECK(outcome.assignment == Assignment::Negative);
    CHECK(outcome.rule == FilterRule::Pass);
}

TEST_CASE("unsorted timeline is rejected") {
    PatientTimeline tl;
    tl.patient_id = "p";
    tl.exams = {screening("p", "b", "2024-02-01", 1), screening("p", "a", "2024-01-01", 1)};
    CHECK_THROWS(filter_test_set(tl));
}

TEST_CASE("no included exam violates its rule postconditions") {
    // Build a mixed population and assert the output-level invariants.
    PatientTimeline tl;
    tl.patient_id = "p";
    tl.exams = {screening("p", "e1", "2020-01-01", 1),
                screening("p", "e2", "2021-02-01", 2),
                imaging("p", "x", "2021-06-01", 2),
                screening("p", "e3", "2022-06-01", 0),
                imaging("p", "y", "2022-08-01", 3),
                screening("p", "e4", "2024-01-01", 5)};
    auto outcomes = filter_test_set(tl);
    for (const auto& out : outcomes) {
        if (!out.included) continue;
        const ExamRecord* exam = nullptr;
        for (const auto& e : tl.exams)
            if (e.exam_id == out.exam_id) exam = &e;
        REQUIRE(exam != nullptr);
        REQUIRE(exam->birads.has_value());
        CHECK(*exam->birads <= 2);
        if (*exam->birads != 0) {
            // Quiet window must really be quiet.
            const auto window = month_window(exam->date, kNegativeQuietMonths);
            for (const auto& e : tl.exams) {
                if (e.exam_id == exam->exam_id) continue;
                const bool inside = e.date > exam->date && e.date <= window.second;
                CHECK_FALSE(inside);
            }
        }
    }
}
