#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mms/types.hpp"

namespace mms {

struct ScoredCase {
    std::string unit_id;
    Scalar score = 0;
    int label = 0;  // {0, 1}
};

// Trapezoidal area under the ROC curve with equal scores grouped into one
// threshold step; equals the tie-adjusted concordance probability exactly
// (both reduce to the same integer numerator over 2 * P * N).
Scalar auroc(const std::vector<ScoredCase>& cases);

// Trapezoidal area under the precision-recall points at every distinct
// threshold, anchored at recall 0 with the highest-threshold precision.
Scalar auprc(const std::vector<ScoredCase>& cases);

struct GroundTruthBox {
    BBox2D geom;
    std::optional<int> slice;
    std::string lesion_id;
    std::string image_id;
};

// True-positive criterion: center distance under max(half GT diagonal,
// 100 px), plus, for DBT, slice distance within 25% of the slice count.
bool match_tp(const DetBox& pred, const GroundTruthBox& gt,
              std::optional<int> n_slices);

inline constexpr Scalar kTpCenterDistanceFloorPx = 100.0;
inline constexpr Scalar kTpSliceTolerance = 0.25;

enum class FrocLevel { Lesion, Breast };

struct FrocCurve {
    struct Point {
        Scalar fp_per_image = 0;
        Scalar sensitivity = 0;
    };
    std::vector<Point> points;  // both coordinates nondecreasing
    long n_images = 0;
    FrocLevel level = FrocLevel::Lesion;
};

struct FrocInput {
    // Every evaluated image appears here, possibly with an empty list.
    std::map<std::string, std::vector<DetBox>> predictions;  // image_id -> boxes
    std::vector<GroundTruthBox> gts;
    std::map<std::string, std::string> breast_of_image;  // image_id -> breast id
    std::map<std::string, std::optional<int>> n_slices;  // image_id -> slices (DBT)
};

FrocCurve froc(const FrocInput& input, FrocLevel level);

// Area under the step-interpolated curve over fp/image in [0, 1]; the final
// sensitivity extends horizontally if the curve ends early.
Scalar aufroc1(const FrocCurve& curve);

// Step interpolation: sensitivity of the last point at or below the query,
// 0 when the query precedes every point.
Scalar sensitivity_at_fp(const FrocCurve& curve, Scalar fp_per_image);

}  // namespace mms
