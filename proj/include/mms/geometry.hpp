#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mms/types.hpp"

namespace mms {

// Intersection-over-union of two axis-aligned boxes. Zero-area boxes have
// IoU 0 against anything, including themselves.
Scalar iou(const BBox2D& a, const BBox2D& b);

// Euclidean distance between box centers.
Scalar center_distance(const BBox2D& a, const BBox2D& b);

struct MaskIouResult {
    Scalar value = 0;
    bool valid = true;  // false when the union inside the band is empty
};

// IoU of two equal-sized masks restricted to rows
// [exclude_rows, rows - exclude_rows). Throws on dimension mismatch or when
// the exclusion bands swallow the whole mask.
MaskIouResult mask_iou(const MaskGrid& a, const MaskGrid& b, long exclude_rows);

// Largest 4-connected component of the set pixels; all-zero input stays
// all-zero. Output is a subset of the input.
MaskGrid largest_connected_component(const MaskGrid& m);

// All 4-connected components, largest first (ties by first-seen pixel order).
std::vector<MaskGrid> connected_components(const MaskGrid& m);

// Tight axis-aligned box around the set pixels of a mask, in the continuous
// convention where pixel (r, c) covers [r, r+1) x [c, c+1). Empty mask yields
// a zero-area box.
BBox2D tight_box(const MaskGrid& m);

struct AffineAugmentResult {
    MaskGrid mask;
    std::vector<BBox2D> boxes;  // tight box per surviving component
};

// Applies the affine transform (about the image center, nearest-neighbor
// resampling) to a segmentation mask and re-extracts tight boxes from the
// transformed components. Components mapped entirely off the canvas drop out
// of the box list.
AffineAugmentResult affine_augment(const MaskGrid& seg, const AffineParams& params);

// Nearest-neighbor resize of a binary mask to (rows, cols).
MaskGrid resize_mask(const MaskGrid& m, long rows, long cols);

// Translation-plus-shrink crop used when only box labels exist: the window
// moves by at most jitter_px per axis and shrinks by a uniform draw in
// [shrink_min_px, shrink_max_px] per axis. Never rotates or shears.
CropWindow simple_crop_augment(const CropWindow& window, long jitter_px,
                               long shrink_min_px, long shrink_max_px,
                               std::mt19937_64& rng);

}  // namespace mms
