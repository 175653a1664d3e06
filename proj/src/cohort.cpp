#include "mms/cohort.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace mms {

Date date_from_string(const std::string& iso) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(iso.c_str(), "%d-%u-%u", &y, &m, &d) != 3)
        throw std::invalid_argument("bad date: " + iso);
    Date date{y, m, d};
    if (!date.ymd().ok()) throw std::invalid_argument("invalid calendar date: " + iso);
    return date;
}

std::string to_string(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", d.year, d.month, d.day);
    return buf;
}

std::pair<Date, Date> month_window(const Date& date, int months) {
    using namespace std::chrono;
    year_month_day end = date.ymd() + std::chrono::months{months};
    if (!end.ok()) end = end.year() / end.month() / std::chrono::last;  // clamp
    const Date end_date{static_cast<int>(end.year()), static_cast<unsigned>(end.month()),
                        static_cast<unsigned>(end.day())};
    return {date, end_date};
}

std::pair<Date, Date> day_window(const Date& date, int days) {
    using namespace std::chrono;
    const year_month_day end{date.days() + std::chrono::days{days}};
    const Date end_date{static_cast<int>(end.year()), static_cast<unsigned>(end.month()),
                        static_cast<unsigned>(end.day())};
    return {date, end_date};
}

namespace {

bool in_window(const Date& d, const std::pair<Date, Date>& window) {
    return window.first <= d && d <= window.second;
}

// Records strictly after the index exam date, inside the window ending
// `months` later.
bool is_follow_up(const ExamRecord& candidate, const ExamRecord& index, int months) {
    if (candidate.exam_id == index.exam_id) return false;
    if (!(candidate.date > index.date)) return false;
    return in_window(candidate.date, month_window(index.date, months));
}

}  // namespace

BreastLabels assign_breast_labels(const ExamRecord& exam,
                                  const std::vector<PathologyRecord>& pathology) {
    const auto window = day_window(exam.date, kPathologyWindowDays);
    BreastLabels labels;
    for (const auto& rec : pathology) {
        if (rec.patient_id != exam.patient_id) continue;
        if (!in_window(rec.date, window)) continue;
        if (rec.laterality == Laterality::Left) {
            labels.left_malignant |= rec.malignant;
            labels.left_benign |= rec.benign;
        } else {
            labels.right_malignant |= rec.malignant;
            labels.right_benign |= rec.benign;
        }
    }
    return labels;
}

Assignment initial_assignment(const ExamRecord& exam,
                              const std::vector<PathologyRecord>& pathology) {
    const BreastLabels l = assign_breast_labels(exam, pathology);
    if (l.left_malignant || l.right_malignant) return Assignment::Malignant;
    if (l.left_benign || l.right_benign) return Assignment::Benign;
    return Assignment::Negative;
}

const char* to_string(FilterRule r) {
    switch (r) {
        case FilterRule::E1: return "E1";
        case FilterRule::E2: return "E2";
        case FilterRule::E3: return "E3";
        case FilterRule::E4: return "E4";
        case FilterRule::E5: return "E5";
        case FilterRule::OccultOnly: return "OccultOnly";
        case FilterRule::Pass: return "Pass";
    }
    return "?";
}

const char* to_string(Assignment a) {
    switch (a) {
        case Assignment::Malignant: return "Malignant";
        case Assignment::Benign: return "Benign";
        case Assignment::Negative: return "Negative";
    }
    return "?";
}

bool rule_triggers(FilterRule rule, const ExamRecord& exam, Assignment assignment,
                   const PatientTimeline& timeline) {
    const bool birads_12 = exam.birads && (*exam.birads == 1 || *exam.birads == 2);
    switch (rule) {
        case FilterRule::E1:
            return !exam.birads || (*exam.birads != 0 && !birads_12);
        case FilterRule::E2:
            return assignment == Assignment::Malignant && birads_12;
        case FilterRule::E3:
            return assignment == Assignment::Benign && birads_12;
        case FilterRule::E4: {
            if (assignment != Assignment::Negative || !exam.birads || *exam.birads != 0)
                return false;
            bool any_follow_up = false;
            bool all_resolved = true;
            for (const auto& rec : timeline.exams) {
                if (!is_follow_up(rec, exam, kFollowUpMonths)) continue;
                any_follow_up = true;
                const bool resolved =
                    rec.birads && (*rec.birads == 1 || *rec.birads == 2 || *rec.birads == 3);
                all_resolved = all_resolved && resolved;
            }
            return !(any_follow_up && all_resolved);
        }
        case FilterRule::E5: {
            if (assignment != Assignment::Negative || !birads_12) return false;
            for (const auto& rec : timeline.exams)
                if (is_follow_up(rec, exam, kNegativeQuietMonths)) return true;
            return false;
        }
        case FilterRule::OccultOnly: {
            if (assignment != Assignment::Malignant) return false;
            const BreastLabels l = assign_breast_labels(exam, timeline.pathology);
            bool any_visible = false;
            if (l.left_malignant && !exam.occult_left) any_visible = true;
            if (l.right_malignant && !exam.occult_right) any_visible = true;
            return !any_visible;
        }
        case FilterRule::Pass:
            return true;
    }
    return false;
}

std::vector<FilterOutcome> filter_test_set(const PatientTimeline& timeline) {
    return filter_test_set(timeline,
                           {FilterRule::E1, FilterRule::E2, FilterRule::E3, FilterRule::E4,
                            FilterRule::E5, FilterRule::OccultOnly});
}

std::vector<FilterOutcome> filter_test_set(const PatientTimeline& timeline,
                                           const std::vector<FilterRule>& rule_order) {
    for (std::size_t i = 1; i < timeline.exams.size(); ++i)
        if (timeline.exams[i].date < timeline.exams[i - 1].date)
            throw std::invalid_argument("filter_test_set: timeline not sorted by date");
    for (std::size_t i = 1; i < timeline.pathology.size(); ++i)
        if (timeline.pathology[i].date < timeline.pathology[i - 1].date)
            throw std::invalid_argument("filter_test_set: pathology not sorted by date");

    std::vector<FilterOutcome> outcomes;
    for (const auto& exam : timeline.exams) {
        if (exam.kind != ExamKind::ScreeningMammo) continue;
        FilterOutcome out;
        out.exam_id = exam.exam_id;
        out.assignment = initial_assignment(exam, timeline.pathology);
        out.rule = FilterRule::Pass;
        for (FilterRule rule : rule_order) {
            if (rule_triggers(rule, exam, out.assignment, timeline)) {
                out.rule = rule;
                break;
            }
        }
        out.included = out.rule == FilterRule::Pass;
        outcomes.push_back(out);
    }
    return outcomes;
}

}  // namespace mms
