#include "mms/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mms/metrics.hpp"

namespace mms {

BreastScore breast_score(const BreastKey& breast, const std::string& model_id,
                         const std::vector<ImagePrediction>& image_preds) {
    if (image_preds.empty()) throw std::invalid_argument("breast_score: no image predictions");
    BreastScore out;
    out.breast = breast;
    out.model_id = model_id;
    for (const auto& p : image_preds) {
        out.score_malignant += p.y_malignant;
        out.score_benign += p.y_benign;
    }
    out.score_malignant /= static_cast<Scalar>(image_preds.size());
    out.score_benign /= static_cast<Scalar>(image_preds.size());
    return out;
}

Scalar modality_ensemble(const std::map<std::string, Scalar>& available,
                         const Selection& selection) {
    Scalar weighted = 0;
    long weight = 0;
    for (const auto& [model, count] : selection) {
        auto it = available.find(model);
        if (it == available.end()) continue;  // modality missing for this exam
        weighted += static_cast<Scalar>(count) * it->second;
        weight += count;
    }
    if (weight == 0)
        throw std::invalid_argument("modality_ensemble: no selected model available");
    return weighted / static_cast<Scalar>(weight);
}

namespace {

Scalar ensemble_auroc(const std::map<ModelId, std::vector<Scalar>>& scores,
                      const Selection& selection, const std::vector<int>& labels) {
    const std::size_t n = labels.size();
    std::vector<Scalar> ens(n, 0);
    long weight = 0;
    for (const auto& [model, count] : selection) {
        for (const auto& [candidate, values] : scores) {
            if (candidate.id != model) continue;
            for (std::size_t i = 0; i < n; ++i)
                ens[i] += static_cast<Scalar>(count) * values[i];
            weight += count;
        }
    }
    std::vector<ScoredCase> cases(n);
    for (std::size_t i = 0; i < n; ++i)
        cases[i] = {"", ens[i] / static_cast<Scalar>(weight), labels[i]};
    return auroc(cases);
}

}  // namespace

GreedyTrace greedy_select(const GreedyCandidates& candidates, int target_size,
                          bool alternation, const std::vector<Modality>& cycle) {
    if (candidates.scores.empty()) throw std::invalid_argument("greedy_select: no candidates");
    if (target_size < 1) throw std::invalid_argument("greedy_select: target size must be >= 1");
    for (const auto& [model, values] : candidates.scores)
        if (values.size() != candidates.labels.size())
            throw std::invalid_argument("greedy_select: misaligned scores for " + model.id);
    if (alternation) {
        for (Modality m : cycle) {
            bool any = false;
            for (const auto& [model, values] : candidates.scores)
                any = any || model.modality == m;
            if (!any)
                throw std::invalid_argument(
                    "greedy_select: alternation needs at least one candidate per modality");
        }
    }

    GreedyTrace trace;
    for (int step = 0; step < target_size; ++step) {
        const ModelId* best = nullptr;
        Scalar best_auc = -1;
        for (const auto& [model, values] : candidates.scores) {
            if (alternation && model.modality != cycle[static_cast<std::size_t>(step) % cycle.size()])
                continue;
            Selection trial = trace.selection;
            trial[model.id] += 1;
            const Scalar auc = ensemble_auroc(candidates.scores, trial, candidates.labels);
            if (auc > best_auc) {
                best_auc = auc;
                best = &model;
            }
        }
        if (!best) throw std::invalid_argument("greedy_select: no admissible candidate");
        trace.selection[best->id] += 1;
        trace.picks.push_back(best->id);
        trace.auroc_after.push_back(best_auc);
    }
    return trace;
}

namespace {

// Value whose rank puts floor(p/100 * N) scores strictly below it.
Scalar value_at_percentile(std::vector<Scalar> sorted, Scalar percentile) {
    const auto n = static_cast<long>(sorted.size());
    const Scalar target = percentile / 100.0 * static_cast<Scalar>(n);
    long k = static_cast<long>(std::floor(target + 1e-9));
    if (k >= n) return std::numeric_limits<Scalar>::infinity();
    k = std::max(k, 0L);
    return sorted[static_cast<std::size_t>(k)];
}

}  // namespace

OperatingPoint operating_point(const std::vector<Scalar>& scores,
                               const std::vector<int>& labels,
                               Scalar margin_percentiles) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("operating_point: misaligned inputs");
    Scalar min_pos = std::numeric_limits<Scalar>::infinity();
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (labels[i]) min_pos = std::min(min_pos, scores[i]);
    if (!std::isfinite(min_pos))
        throw std::invalid_argument("operating_point: needs at least one positive");

    std::vector<Scalar> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    long below = 0;
    for (Scalar s : sorted)
        if (s < min_pos) ++below;

    OperatingPoint out;
    out.base_percentile =
        100.0 * static_cast<Scalar>(below) / static_cast<Scalar>(sorted.size());
    out.final_percentile = std::max<Scalar>(out.base_percentile - margin_percentiles, 0);
    out.threshold = value_at_percentile(sorted, out.final_percentile);
    return out;
}

TriageResult triage(const std::string& exam_id, Scalar left_score, Scalar right_score,
                    Scalar threshold) {
    TriageResult out;
    out.exam_id = exam_id;
    out.left = left_score < threshold ? BreastFlag::Green : BreastFlag::Gray;
    out.right = right_score < threshold ? BreastFlag::Green : BreastFlag::Gray;
    const int greens = (out.left == BreastFlag::Green) + (out.right == BreastFlag::Green);
    out.category = greens == 2   ? TriageCategory::AllGreen
                   : greens == 1 ? TriageCategory::Mixed
                                 : TriageCategory::AllGray;
    return out;
}

std::vector<RecallSavingsRow> recall_savings_curve(const RecallSavingsInput& input,
                                                   const std::vector<Scalar>& percentile_grid) {
    const std::size_t n = input.exam_scores.size();
    if (input.exam_ids.size() != n || input.cancer_labels.size() != n ||
        input.radiologist_recalls.size() != n)
        throw std::invalid_argument("recall_savings_curve: misaligned inputs");
    if (n == 0) throw std::invalid_argument("recall_savings_curve: no exams");

    std::vector<Scalar> sorted = input.exam_scores;
    std::sort(sorted.begin(), sorted.end());
    long total_pos = 0, total_neg = 0, total_recalled = 0;
    for (std::size_t i = 0; i < n; ++i) {
        (input.cancer_labels[i] ? total_pos : total_neg) += 1;
        total_recalled += input.radiologist_recalls[i] ? 1 : 0;
    }

    std::vector<RecallSavingsRow> rows;
    for (Scalar pct : percentile_grid) {
        const Scalar threshold = value_at_percentile(sorted, pct);
        long rejected = 0, rejected_pos = 0, rejected_recalled = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(input.exam_scores[i] < threshold)) continue;
            ++rejected;
            rejected_pos += input.cancer_labels[i] ? 1 : 0;
            rejected_recalled += input.radiologist_recalls[i] ? 1 : 0;
        }
        RecallSavingsRow row;
        row.percentile = pct;
        row.threshold = threshold;
        row.sensitivity = total_pos == 0
                              ? 1
                              : static_cast<Scalar>(total_pos - rejected_pos) /
                                    static_cast<Scalar>(total_pos);
        row.fnr = 1 - row.sensitivity;
        row.specificity = total_neg == 0
                              ? 1
                              : static_cast<Scalar>(rejected - rejected_pos) /
                                    static_cast<Scalar>(total_neg);
        row.fpr = 1 - row.specificity;
        row.fraction_recalls_saved =
            total_recalled == 0 ? 0
                                : static_cast<Scalar>(rejected_recalled) /
                                      static_cast<Scalar>(total_recalled);
        row.fraction_workload_saved =
            static_cast<Scalar>(rejected) / static_cast<Scalar>(n);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace mms
