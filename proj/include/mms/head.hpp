#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mms/detect.hpp"
#include "mms/types.hpp"

namespace mms {

// Per-cell scores for one target over the h x w anchor grid.
using ScorePlane = Eigen::ArrayXXd;

struct TargetPlanes {
    ScorePlane malignant;  // h x w
    ScorePlane benign;     // h x w
};

// F = C (*) O: target-specific probabilities times objectness, broadcast over
// the target dimension.
TargetPlanes fuse_scores(const TargetPlanes& class_probs, const ScorePlane& objectness);

// Feature vectors for the h x w grid cells, one row per cell (row-major).
struct FeatureGrid {
    int h = 0;
    int w = 0;
    Mat values;  // (h * w) x dim

    Eigen::Index dim() const { return values.cols(); }
};

struct AttentionParams {
    Vec w_vec;  // L
    Mat V;      // L x S
    Mat U;      // L x S
};

// (L, S) = (64, 256) for the L architecture, (80, 320) for X.
inline constexpr int kAttentionDimL_ArchL = 64;
inline constexpr int kFeatureDimS_ArchL = 256;
inline constexpr int kAttentionDimL_ArchX = 80;
inline constexpr int kFeatureDimS_ArchX = 320;

struct HeadParams {
    Mat w_image;  // S x 2, columns (malignant, benign)
};

struct TopKSelection {
    Mat features;                // rows: selected box cells, then optional pools
    std::vector<DetBox> boxes;   // aligned with the box rows only
    int requested_k = 0;
    bool truncated = false;      // fewer than K survivors existed
};

// NMS on fused-score candidates, top-K survivors by malignant score, feature
// gather at each survivor's cell. With include_global_pool the max- and
// average-pooled feature vectors over the whole grid are appended as two
// extra rows.
TopKSelection topk_select(const ScoreGrid& candidates, const FeatureGrid& features,
                          int k, Scalar nms_threshold, bool include_global_pool);

// Gated attention weights: softmax over k of
// w^T (tanh(V q_k) (*) sigmoid(U q_k)).
Vec gated_attention(const Mat& q, const AttentionParams& params);

// y = sigmoid(w_image^T sum_k alpha_k q_k).
ImagePrediction image_prediction(const Mat& q, const Vec& alpha, const HeadParams& head);

// Full 3D inference path: MSS over the stack (malignant target), top-K over
// the whole volume, per-slice feature gather, attention, head. The two
// optional pooled vectors are taken over every cell of every slice.
ImagePrediction dbt_image_prediction(const SliceStack& stack,
                                     const std::vector<FeatureGrid>& slice_features,
                                     int k, Scalar nms_threshold,
                                     const AttentionParams& attention,
                                     const HeadParams& head,
                                     bool include_global_pool = false);

struct LossBreakdown {
    std::optional<Scalar> detection_term;  // absent when skipped
    Scalar bce_term = 0;
    Scalar consistency_term = 0;
    Scalar total = 0;
};

inline constexpr Scalar kConsistencyWeight = 10.0;
inline constexpr Scalar kBceClamp = 1e-7;

// Assembles the training objective. The detection term is included iff
// n_gt_boxes != 0 or the breast label sums below 1 (positive images without
// box labels skip it). The consistency term treats the top-1 score as a
// constant; only the image prediction carries sensitivity.
LossBreakdown compose_loss(std::optional<Scalar> det_loss, const ImagePrediction& y_hat,
                           int y_malignant, int y_benign, Scalar top1_malignant_score,
                           long n_gt_boxes, Scalar consistency_weight = kConsistencyWeight);

struct PseudoLabelResult {
    std::vector<DetBox> boxes;
    std::vector<std::string> warnings;  // positive label with no boxes to pick from
};

// Top-1 malignant box for malignant-positive breasts, top-1 benign box for
// benign-positive breasts; nothing for negatives.
PseudoLabelResult pseudo_labels(const std::vector<DetBox>& boxes, int label_malignant,
                                int label_benign);

enum class Phase { Train, Validate };

struct SliceChoice {
    bool cview_fallback = false;
    int slice = 0;  // meaningful when !cview_fallback
};

// Which DBT slice to load. Annotated lesions each contribute their list of
// annotated slice indices; positives without annotations fall back to the
// C-View image.
SliceChoice training_slice_policy(int n_slices,
                                  const std::vector<std::vector<int>>& lesion_slices,
                                  bool positive_label, Phase phase,
                                  std::mt19937_64& rng);

}  // namespace mms
