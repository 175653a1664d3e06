#include "mms/head.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mms {

namespace {

Scalar sigmoid(Scalar x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TargetPlanes fuse_scores(const TargetPlanes& class_probs, const ScorePlane& objectness) {
    const auto& cm = class_probs.malignant;
    const auto& cb = class_probs.benign;
    if (cm.rows() != cb.rows() || cm.cols() != cb.cols() ||
        cm.rows() != objectness.rows() || cm.cols() != objectness.cols())
        throw std::invalid_argument("fuse_scores: shape mismatch");
    return {cm * objectness, cb * objectness};
}

TopKSelection topk_select(const ScoreGrid& candidates, const FeatureGrid& features,
                          int k, Scalar nms_threshold, bool include_global_pool) {
    if (k < 1) throw std::invalid_argument("topk_select: k must be >= 1");
    if (candidates.h != features.h || candidates.w != features.w)
        throw std::invalid_argument("topk_select: grid/feature shape mismatch");
    if (features.values.rows() != static_cast<Eigen::Index>(candidates.boxes.size()))
        throw std::invalid_argument("topk_select: feature row count mismatch");

    const NmsResult deduped = nms(candidates.boxes, Target::Malignant, nms_threshold);

    TopKSelection sel;
    sel.requested_k = k;
    const int kept = std::min<int>(k, static_cast<int>(deduped.survivors.size()));
    sel.truncated = kept < k;

    const int extra = include_global_pool ? 2 : 0;
    sel.features.resize(kept + extra, features.dim());
    for (int i = 0; i < kept; ++i) {
        const auto& surv = deduped.survivors[static_cast<std::size_t>(i)];
        sel.boxes.push_back(surv.box);
        sel.features.row(i) = features.values.row(static_cast<Eigen::Index>(surv.input_index));
    }
    if (include_global_pool) {
        sel.features.row(kept) = features.values.colwise().maxCoeff();
        sel.features.row(kept + 1) = features.values.colwise().mean();
    }
    return sel;
}

Vec gated_attention(const Mat& q, const AttentionParams& params) {
    if (q.rows() < 1) throw std::invalid_argument("gated_attention: empty input");
    const Eigen::Index S = q.cols();
    const Eigen::Index L = params.w_vec.size();
    if (params.V.rows() != L || params.U.rows() != L || params.V.cols() != S ||
        params.U.cols() != S)
        throw std::invalid_argument("gated_attention: parameter dimension mismatch");

    // Gates for all K vectors at once: (L x K) columns.
    const Mat pre_tanh = params.V * q.transpose();
    const Mat pre_sig = params.U * q.transpose();
    const Mat gated =
        pre_tanh.array().tanh() * (1.0 / (1.0 + (-pre_sig.array()).exp()));
    Vec logits = gated.transpose() * params.w_vec;

    // Softmax with max subtraction; value-identical to the exp-ratio form.
    const Scalar m = logits.maxCoeff();
    Vec alpha = (logits.array() - m).exp();
    alpha /= alpha.sum();
    return alpha;
}

ImagePrediction image_prediction(const Mat& q, const Vec& alpha, const HeadParams& head) {
    if (q.rows() != alpha.size())
        throw std::invalid_argument("image_prediction: weight/vector count mismatch");
    if (std::abs(alpha.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("image_prediction: attention weights must sum to 1");
    if (head.w_image.rows() != q.cols() || head.w_image.cols() != 2)
        throw std::invalid_argument("image_prediction: head parameter shape mismatch");

    const Vec z_attn = q.transpose() * alpha;
    const Vec logits = head.w_image.transpose() * z_attn;
    return {sigmoid(logits(0)), sigmoid(logits(1))};
}

ImagePrediction dbt_image_prediction(const SliceStack& stack,
                                     const std::vector<FeatureGrid>& slice_features,
                                     int k, Scalar nms_threshold,
                                     const AttentionParams& attention,
                                     const HeadParams& head,
                                     bool include_global_pool) {
    if (slice_features.size() != stack.grids.size())
        throw std::invalid_argument("dbt_image_prediction: one feature grid per slice required");
    if (stack.grids.empty())
        throw std::invalid_argument("dbt_image_prediction: empty stack");

    const std::vector<DetBox> survivors = mss(stack, Target::Malignant, nms_threshold);
    const int kept = std::min<int>(k, static_cast<int>(survivors.size()));
    const Eigen::Index dim = slice_features.front().dim();

    const int extra = include_global_pool ? 2 : 0;
    Mat q(kept + extra, dim);
    for (int i = 0; i < kept; ++i) {
        const DetBox& b = survivors[static_cast<std::size_t>(i)];
        const FeatureGrid& fg = slice_features[static_cast<std::size_t>(*b.slice)];
        const Eigen::Index cell =
            static_cast<Eigen::Index>(b.source_anchor->row) * fg.w + b.source_anchor->col;
        q.row(i) = fg.values.row(cell);
    }
    if (include_global_pool) {
        Vec mx = Vec::Constant(dim, -std::numeric_limits<Scalar>::infinity());
        Vec sum = Vec::Zero(dim);
        long cells = 0;
        for (const auto& fg : slice_features) {
            mx = mx.cwiseMax(fg.values.colwise().maxCoeff().transpose());
            sum += fg.values.colwise().sum().transpose();
            cells += fg.values.rows();
        }
        q.row(kept) = mx.transpose();
        q.row(kept + 1) = (sum / static_cast<Scalar>(cells)).transpose();
    }

    return image_prediction(q, gated_attention(q, attention), head);
}

LossBreakdown compose_loss(std::optional<Scalar> det_loss, const ImagePrediction& y_hat,
                           int y_malignant, int y_benign, Scalar top1_malignant_score,
                           long n_gt_boxes, Scalar consistency_weight) {
    if ((y_malignant != 0 && y_malignant != 1) || (y_benign != 0 && y_benign != 1))
        throw std::invalid_argument("compose_loss: labels must be 0 or 1");

    LossBreakdown out;
    const bool include_detection = (n_gt_boxes != 0) || (y_malignant + y_benign < 1);
    if (include_detection) {
        if (!det_loss)
            throw std::invalid_argument("compose_loss: detection loss required for this example");
        if (*det_loss < 0)
            throw std::invalid_argument("compose_loss: detection loss must be nonnegative");
        out.detection_term = *det_loss;
    }

    auto bce = [](Scalar p, int y) {
        p = std::clamp(p, kBceClamp, 1 - kBceClamp);
        return -(y * std::log(p) + (1 - y) * std::log(1 - p));
    };
    out.bce_term = bce(y_hat.y_malignant, y_malignant) + bce(y_hat.y_benign, y_benign);
    out.consistency_term =
        consistency_weight * std::abs(top1_malignant_score - y_hat.y_malignant);
    out.total = out.detection_term.value_or(0) + out.bce_term + out.consistency_term;
    return out;
}

PseudoLabelResult pseudo_labels(const std::vector<DetBox>& boxes, int label_malignant,
                                int label_benign) {
    PseudoLabelResult out;
    auto top1 = [&](Target t) -> const DetBox* {
        const DetBox* best = nullptr;
        for (const auto& b : boxes)
            if (!best || b.score(t) > best->score(t)) best = &b;
        return best;
    };
    if (label_malignant) {
        if (const DetBox* b = top1(Target::Malignant))
            out.boxes.push_back(*b);
        else
            out.warnings.push_back("malignant label positive but no boxes available");
    }
    if (label_benign) {
        if (const DetBox* b = top1(Target::Benign))
            out.boxes.push_back(*b);
        else
            out.warnings.push_back("benign label positive but no boxes available");
    }
    return out;
}

SliceChoice training_slice_policy(int n_slices,
                                  const std::vector<std::vector<int>>& lesion_slices,
                                  bool positive_label, Phase phase,
                                  std::mt19937_64& rng) {
    if (n_slices < 1) throw std::invalid_argument("training_slice_policy: need slices");

    std::vector<int> annotated;
    for (const auto& lesion : lesion_slices)
        annotated.insert(annotated.end(), lesion.begin(), lesion.end());

    if (!annotated.empty()) {
        if (phase == Phase::Train) {
            std::uniform_int_distribution<std::size_t> pick(0, annotated.size() - 1);
            return {false, annotated[pick(rng)]};
        }
        // Validation: center slice of one lesion (the first annotated one,
        // deterministically).
        for (const auto& lesion : lesion_slices) {
            if (lesion.empty()) continue;
            std::vector<int> sorted = lesion;
            std::sort(sorted.begin(), sorted.end());
            return {false, sorted[sorted.size() / 2]};
        }
    }
    if (positive_label) return {true, 0};
    if (phase == Phase::Train) {
        std::uniform_int_distribution<int> pick(0, n_slices - 1);
        return {false, pick(rng)};
    }
    return {false, n_slices / 2};
}

}  // namespace mms
