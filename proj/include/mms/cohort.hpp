#pragma once

#include <chrono>
#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mms/types.hpp"

namespace mms {

struct Date {
    int year = 1970;
    unsigned month = 1;  // 1..12
    unsigned day = 1;    // 1..31

    std::chrono::year_month_day ymd() const {
        return std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day};
    }
    std::chrono::sys_days days() const { return std::chrono::sys_days(ymd()); }
    auto operator<=>(const Date& o) const {
        return days().time_since_epoch().count() <=> o.days().time_since_epoch().count();
    }
    bool operator==(const Date& o) const = default;
};

Date date_from_string(const std::string& iso);  // YYYY-MM-DD
std::string to_string(const Date& d);

// [date, date + months], both ends inclusive, end-of-month clamped.
std::pair<Date, Date> month_window(const Date& date, int months);

// [date, date + days], both ends inclusive.
std::pair<Date, Date> day_window(const Date& date, int days);

enum class ExamKind { ScreeningMammo, DiagnosticMammo, OtherBreastImaging };

struct ExamRecord {
    std::string exam_id;
    std::string patient_id;
    Date date;
    ExamKind kind = ExamKind::ScreeningMammo;
    std::optional<int> birads;  // 0..6
    bool occult_left = false;   // cancer on this breast known to be occult
    bool occult_right = false;
};

struct PathologyRecord {
    std::string patient_id;
    Date date;
    Laterality laterality = Laterality::Left;
    bool malignant = false;
    bool benign = false;
};

struct PatientTimeline {
    std::string patient_id;
    std::vector<ExamRecord> exams;          // sorted by date
    std::vector<PathologyRecord> pathology; // sorted by date
};

inline constexpr int kPathologyWindowDays = 120;
inline constexpr int kFollowUpMonths = 6;
inline constexpr int kNegativeQuietMonths = 11;

struct BreastLabels {
    int left_malignant = 0;
    int left_benign = 0;
    int right_malignant = 0;
    int right_benign = 0;
};

// A flag is positive iff a matching-laterality pathology record inside
// [exam date, exam date + 120 days] sets it.
BreastLabels assign_breast_labels(const ExamRecord& exam,
                                  const std::vector<PathologyRecord>& pathology);

enum class Assignment { Malignant, Benign, Negative };

// Malignant beats Benign; exams with no in-window pathology are Negative.
Assignment initial_assignment(const ExamRecord& exam,
                              const std::vector<PathologyRecord>& pathology);

enum class FilterRule { E1, E2, E3, E4, E5, OccultOnly, Pass };

const char* to_string(FilterRule r);
const char* to_string(Assignment a);

struct FilterOutcome {
    std::string exam_id;
    bool included = false;
    FilterRule rule = FilterRule::Pass;
    Assignment assignment = Assignment::Negative;
};

// Per-rule predicates, exposed so precedence can be probed independently of
// the canonical E1 -> E2 -> E3 -> E4 -> E5 -> OccultOnly order.
bool rule_triggers(FilterRule rule, const ExamRecord& exam, Assignment assignment,
                   const PatientTimeline& timeline);

// Applies the test-set filtering rules to every screening exam of the
// timeline, first triggered rule wins. Throws if the timeline is unsorted.
std::vector<FilterOutcome> filter_test_set(const PatientTimeline& timeline);

// Same, with an explicit rule order (used to probe precedence sensitivity).
std::vector<FilterOutcome> filter_test_set(const PatientTimeline& timeline,
                                           const std::vector<FilterRule>& rule_order);

}  // namespace mms
