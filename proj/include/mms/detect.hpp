#pragma once

#include <map>
#include <string>
#include <vector>

#include "mms/geometry.hpp"
#include "mms/types.hpp"

namespace mms {

// Candidate boxes arranged on the h x w anchor grid of a detection head,
// one candidate per cell, row-major.
struct ScoreGrid {
    int h = 0;
    int w = 0;
    std::vector<DetBox> boxes;  // size h * w, boxes[r * w + c] belongs to cell (r, c)

    const DetBox& at(int r, int c) const { return boxes[static_cast<std::size_t>(r) * w + c]; }
    DetBox& at(int r, int c) { return boxes[static_cast<std::size_t>(r) * w + c]; }
};

struct SliceStack {
    std::vector<ScoreGrid> grids;  // one per slice, identical (h, w)

    int n_slices() const { return static_cast<int>(grids.size()); }
};

struct NmsSurvivor {
    DetBox box;
    std::size_t input_index = 0;            // position in the input list
    std::vector<std::size_t> suppressed;    // input indices removed by this box
};

struct NmsResult {
    std::vector<NmsSurvivor> survivors;  // sorted by target score descending

    std::vector<DetBox> boxes() const;
};

// Greedy NMS on the chosen target score. Ties are broken by ascending input
// index, so output is deterministic for equal scores.
NmsResult nms(const std::vector<DetBox>& boxes, Target target, Scalar iou_threshold);

// Max-Slice-Selection: per-cell argmax over the depth dimension, planar NMS
// on the selected candidates, then relocation of survivors to their source
// slices. Equal per-cell scores resolve to the lowest slice index. Survivors
// keep the geometry and scores of the slice they came from.
std::vector<DetBox> mss(const SliceStack& stack, Target target, Scalar iou_threshold);

// Rescales box geometry between image coordinate spaces. Slice indices are
// untouched; they are simply not part of the planar geometry.
std::vector<DetBox> to_shared_space(const std::vector<DetBox>& boxes,
                                    const ImageGeom& from, const ImageGeom& to);

struct MultiModalEnsemble {
    std::vector<DetBox> unified;          // displayed on FFDM / C-View
    std::vector<DetBox> dbt_displayable;  // subset with a slice index to show on DBT
};

inline constexpr Scalar kMultiModalIouThreshold = 0.05;

// NMS across the concatenated per-modality box sets (all already in the
// C-View coordinate space). A unified survivor is DBT-displayable when it is
// DBT-origin, or when it suppressed at least one DBT-origin box; in the
// latter case it carries the slice of its highest-scored suppressed DBT box.
MultiModalEnsemble ensemble_boxes_multimodal(
    const std::map<Modality, std::vector<DetBox>>& per_modality, Target target,
    Scalar iou_threshold = kMultiModalIouThreshold);

struct TripletImage {
    ImageKey key;
    ImageGeom geom;
    MaskGrid foreground;         // native-resolution foreground mask
    std::string acquisition_id;  // links a C-View to its source DBT
};

struct TripletMatch {
    ImageKey ffdm;
    ImageKey cview;
    ImageKey dbt;
    Scalar iou = 0;
};

struct TripletMatchReport {
    std::vector<TripletMatch> triplets;
    std::vector<std::string> warnings;  // skipped pairs (no aspect-ratio match, ...)
};

inline constexpr Scalar kTripletIouThreshold = 0.96589;
inline constexpr long kTripletExcludeRows = 50;

// Matches FFDM images to C-View images of the same view by field-of-view
// agreement (largest component, 50-row exclusion band, band IoU >= threshold,
// best IoU per C-View), then attaches the DBT sharing the C-View's
// acquisition id.
TripletMatchReport match_triplets(const std::vector<TripletImage>& exam_images,
                                  Scalar iou_threshold = kTripletIouThreshold);

}  // namespace mms
