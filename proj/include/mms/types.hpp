#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>

namespace mms {

using Scalar = double;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
// Binary mask, row-major pixel grid. A set pixel (r, c) occupies the unit
// square [r, r+1) x [c, c+1).
using MaskGrid = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

enum class Laterality { Left, Right };

enum class View { CC, MLO, LM, ML, XCCL, XCC, TAN, XCCM, AT, RL, RM };

enum class Modality { FFDM, CVIEW, DBT };

enum class Target { Malignant, Benign };

struct ImageKey {
    std::string patient_id;
    std::string exam_id;
    Laterality laterality = Laterality::Left;
    View view = View::CC;
    Modality modality = Modality::FFDM;
    std::string image_id;  // unique within a dataset
};

// Axis-aligned box, continuous center/size coordinates.
struct BBox2D {
    Scalar cx = 0;
    Scalar cy = 0;
    Scalar w = 0;  // > 0 for a valid box
    Scalar h = 0;  // > 0 for a valid box

    Scalar left() const { return cx - w / 2; }
    Scalar right() const { return cx + w / 2; }
    Scalar top() const { return cy - h / 2; }
    Scalar bottom() const { return cy + h / 2; }
    Scalar area() const { return w * h; }
};

struct GridIndex {
    int row = 0;
    int col = 0;
};

// One bounding-box prediction. For DBT-origin boxes `slice` identifies the
// slice the box came from; 2D-origin boxes have no slice unless a later
// ensembling step attaches one for display on the DBT volume.
struct DetBox {
    BBox2D geom;
    std::optional<int> slice;
    Scalar score_malignant = 0;  // in [0, 1]
    Scalar score_benign = 0;     // in [0, 1]
    Modality origin = Modality::FFDM;
    std::optional<GridIndex> source_anchor;

    Scalar score(Target t) const {
        return t == Target::Malignant ? score_malignant : score_benign;
    }
};

struct AffineParams {
    Scalar rotation_deg = 0;
    Scalar translate_frac_x = 0;  // fraction of width
    Scalar translate_frac_y = 0;  // fraction of height
    Scalar scale = 1;             // > 0
    Scalar shear_deg = 0;
    bool hflip = false;
};

struct CropWindow {
    long top = 0;
    long left = 0;
    long height = 0;  // > 0
    long width = 0;   // > 0
};

// Fixed tensor windows used by the preprocessing pipeline.
inline constexpr long kFfdmWindowRows = 2866;
inline constexpr long kFfdmWindowCols = 1814;
inline constexpr long kDbtWindowRows = 2166;
inline constexpr long kDbtWindowCols = 1339;

struct ImageGeom {
    long rows = 0;
    long cols = 0;
    std::optional<int> n_slices;  // present iff modality DBT
};

struct ImagePrediction {
    Scalar y_malignant = 0.5;
    Scalar y_benign = 0.5;

    Scalar value(Target t) const {
        return t == Target::Malignant ? y_malignant : y_benign;
    }
};

const char* to_string(Laterality l);
const char* to_string(View v);
const char* to_string(Modality m);
Laterality laterality_from_string(const std::string& s);
View view_from_string(const std::string& s);
Modality modality_from_string(const std::string& s);

}  // namespace mms
