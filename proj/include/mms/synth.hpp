#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mms/types.hpp"

namespace mms {

// Desk-scale synthetic dataset: exams with planted lesions whose boxes are
// field-of-view aligned across modalities, score grids where planted cells
// dominate, breast labels, ground-truth boxes (C-View space), foreground
// masks for triplet matching, and a patient timeline that exercises every
// filtering rule.
struct SynthConfig {
    long n_exams = 40;
    Scalar prevalence = 0.2;
    int n_slices = 70;
    Scalar lesion_min_px = 80;  // lesion box side range, C-View pixels
    Scalar lesion_max_px = 220;
    long n_mask_exams = 2;      // exams that also emit foreground masks
    std::uint64_t seed = 0;
};

struct SynthManifest {
    std::filesystem::path predictions;
    std::filesystem::path labels;
    std::filesystem::path gt_boxes;
    std::filesystem::path timeline;
    std::filesystem::path masks;
};

SynthManifest synth_generate(const SynthConfig& config,
                             const std::filesystem::path& out_dir);

}  // namespace mms
