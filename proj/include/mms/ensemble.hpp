#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mms/types.hpp"

namespace mms {

struct ModelId {
    std::string id;  // unique
    Modality modality = Modality::FFDM;
    std::optional<int> fold;
    std::optional<int> seed;

    bool operator<(const ModelId& o) const { return id < o.id; }
    bool operator==(const ModelId& o) const { return id == o.id; }
};

struct BreastKey {
    std::string exam_id;
    Laterality laterality = Laterality::Left;

    bool operator<(const BreastKey& o) const {
        return exam_id != o.exam_id ? exam_id < o.exam_id : laterality < o.laterality;
    }
    bool operator==(const BreastKey& o) const {
        return exam_id == o.exam_id && laterality == o.laterality;
    }
};

struct BreastScore {
    BreastKey breast;
    std::string model_id;
    Scalar score_malignant = 0;
    Scalar score_benign = 0;
};

// Arithmetic mean of image-level predictions over all views and test-time
// augmentation repetitions of one breast under one model.
BreastScore breast_score(const BreastKey& breast, const std::string& model_id,
                         const std::vector<ImagePrediction>& image_preds);

// Multiset of selected models, id -> multiplicity.
using Selection = std::map<std::string, int>;

// Weighted average with weights equal to selection multiplicities,
// renormalized over the models whose modality is present for this exam.
// `available` carries each selected model's score when present.
Scalar modality_ensemble(const std::map<std::string, Scalar>& available,
                         const Selection& selection);

struct GreedyCandidates {
    // Candidate model -> malignant score per breast, aligned with `labels`.
    std::map<ModelId, std::vector<Scalar>> scores;
    std::vector<int> labels;  // breast-level malignant labels
};

struct GreedyTrace {
    std::vector<std::string> picks;   // model chosen at each step
    std::vector<Scalar> auroc_after;  // selection-set AUROC after each step
    Selection selection;
};

inline constexpr int kDefaultEnsembleSize = 12;

// Greedy ensemble selection with repetition; with alternation enabled, step t
// can only add a model of modality cycle[t % 3].
GreedyTrace greedy_select(const GreedyCandidates& candidates, int target_size,
                          bool alternation,
                          const std::vector<Modality>& cycle = {Modality::FFDM,
                                                                Modality::CVIEW,
                                                                Modality::DBT});

struct OperatingPoint {
    Scalar threshold = 0;
    Scalar base_percentile = 0;   // percentile of the lowest positive score
    Scalar final_percentile = 0;  // base minus the safety margin
};

// Threshold at (percentile of the minimum positive score) - margin, with
// nearest-rank percentile semantics: the p-th percentile value is the score
// with floor(p/100 * N) scores strictly below it.
OperatingPoint operating_point(const std::vector<Scalar>& scores,
                               const std::vector<int>& labels,
                               Scalar margin_percentiles);

enum class BreastFlag { Green, Gray };
enum class TriageCategory { AllGreen, Mixed, AllGray };

struct TriageResult {
    std::string exam_id;
    BreastFlag left = BreastFlag::Gray;
    BreastFlag right = BreastFlag::Gray;
    TriageCategory category = TriageCategory::AllGray;
};

// Green iff score < threshold (boundary stays Gray).
TriageResult triage(const std::string& exam_id, Scalar left_score, Scalar right_score,
                    Scalar threshold);

struct RecallSavingsRow {
    Scalar percentile = 0;
    Scalar threshold = 0;
    Scalar sensitivity = 0;
    Scalar specificity = 0;
    Scalar fnr = 0;
    Scalar fpr = 0;
    Scalar fraction_recalls_saved = 0;
    Scalar fraction_workload_saved = 0;
};

struct RecallSavingsInput {
    std::vector<std::string> exam_ids;
    std::vector<Scalar> exam_scores;  // max of the two breast scores
    std::vector<int> cancer_labels;
    std::vector<int> radiologist_recalls;
};

// Hypothetically removes exams scoring below each percentile threshold from
// review and tabulates the consequences.
std::vector<RecallSavingsRow> recall_savings_curve(const RecallSavingsInput& input,
                                                   const std::vector<Scalar>& percentile_grid);

}  // namespace mms
