#include "mms/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mms {

std::vector<DetBox> NmsResult::boxes() const {
    std::vector<DetBox> out;
    out.reserve(survivors.size());
    for (const auto& s : survivors) out.push_back(s.box);
    return out;
}

NmsResult nms(const std::vector<DetBox>& boxes, Target target, Scalar iou_threshold) {
    std::vector<std::size_t> order(boxes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return boxes[a].score(target) > boxes[b].score(target);
    });

    NmsResult result;
    std::vector<char> removed(boxes.size(), 0);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t idx = order[i];
        if (removed[idx]) continue;
        NmsSurvivor surv;
        surv.box = boxes[idx];
        surv.input_index = idx;
        for (std::size_t j = i + 1; j < order.size(); ++j) {
            const std::size_t cand = order[j];
            if (removed[cand]) continue;
            if (iou(boxes[idx].geom, boxes[cand].geom) > iou_threshold) {
                removed[cand] = 1;
                surv.suppressed.push_back(cand);
            }
        }
        result.survivors.push_back(std::move(surv));
    }
    return result;
}

std::vector<DetBox> mss(const SliceStack& stack, Target target, Scalar iou_threshold) {
    if (stack.grids.empty()) return {};
    const int h = stack.grids.front().h;
    const int w = stack.grids.front().w;
    for (const auto& g : stack.grids)
        if (g.h != h || g.w != w || g.boxes.size() != static_cast<std::size_t>(h) * w)
            throw std::invalid_argument("mss: slice grids must share dimensions");

    // Depth reduction: the best slice per grid cell, lowest slice on ties.
    std::vector<DetBox> planar;
    planar.reserve(static_cast<std::size_t>(h) * w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            int best_slice = 0;
            Scalar best = stack.grids[0].at(r, c).score(target);
            for (int s = 1; s < stack.n_slices(); ++s) {
                const Scalar v = stack.grids[s].at(r, c).score(target);
                if (v > best) {
                    best = v;
                    best_slice = s;
                }
            }
            DetBox box = stack.grids[best_slice].at(r, c);
            box.slice = best_slice;  // grids[i] is slice i by construction
            box.origin = Modality::DBT;
            box.source_anchor = GridIndex{r, c};
            planar.push_back(box);
        }
    }

    return nms(planar, target, iou_threshold).boxes();
}

std::vector<DetBox> to_shared_space(const std::vector<DetBox>& boxes,
                                    const ImageGeom& from, const ImageGeom& to) {
    if (from.rows <= 0 || from.cols <= 0 || to.rows <= 0 || to.cols <= 0)
        throw std::invalid_argument("to_shared_space: invalid geometry");
    const Scalar sx = static_cast<Scalar>(to.cols) / static_cast<Scalar>(from.cols);
    const Scalar sy = static_cast<Scalar>(to.rows) / static_cast<Scalar>(from.rows);
    std::vector<DetBox> out = boxes;
    for (auto& b : out) {
        b.geom.cx *= sx;
        b.geom.w *= sx;
        b.geom.cy *= sy;
        b.geom.h *= sy;
    }
    return out;
}

MultiModalEnsemble ensemble_boxes_multimodal(
    const std::map<Modality, std::vector<DetBox>>& per_modality, Target target,
    Scalar iou_threshold) {
    std::vector<DetBox> all;
    for (Modality m : {Modality::FFDM, Modality::CVIEW, Modality::DBT}) {
        auto it = per_modality.find(m);
        if (it == per_modality.end()) continue;
        for (DetBox b : it->second) {
            b.origin = m;
            if (m != Modality::DBT) b.slice.reset();
            all.push_back(b);
        }
    }

    const NmsResult merged = nms(all, target, iou_threshold);
    MultiModalEnsemble out;
    for (const auto& surv : merged.survivors) {
        DetBox unified = surv.box;
        out.unified.push_back(unified);

        if (unified.origin == Modality::DBT) {
            out.dbt_displayable.push_back(unified);
            continue;
        }
        // Slice comes from the best suppressed DBT box, if any.
        const DetBox* best_dbt = nullptr;
        for (std::size_t idx : surv.suppressed) {
            const DetBox& sup = all[idx];
            if (sup.origin != Modality::DBT) continue;
            if (!best_dbt || sup.score(target) > best_dbt->score(target)) best_dbt = &sup;
        }
        if (best_dbt) {
            DetBox display = unified;
            display.slice = best_dbt->slice;
            out.dbt_displayable.push_back(display);
        }
    }
    return out;
}

namespace {

// The Hologic FFDM/C-View acquisition sizes with matching aspect ratios.
struct ResizePair {
    long ffdm_rows, ffdm_cols, cview_rows, cview_cols;
};
constexpr ResizePair kResizePairs[] = {
    {4096, 3328, 2457, 1996},
    {3328, 2560, 2457, 1890},
};

bool aspect_close(long r1, long c1, long r2, long c2) {
    const double a = static_cast<double>(r1) / static_cast<double>(c1);
    const double b = static_cast<double>(r2) / static_cast<double>(c2);
    return std::abs(a - b) / b <= 1e-3;
}

}  // namespace

TripletMatchReport match_triplets(const std::vector<TripletImage>& exam_images,
                                  Scalar iou_threshold) {
    TripletMatchReport report;

    // Group by view; only same-view pairs are candidates.
    std::map<int, std::vector<const TripletImage*>> by_view;
    for (const auto& img : exam_images)
        by_view[static_cast<int>(img.key.view) * 2 + static_cast<int>(img.key.laterality)]
            .push_back(&img);

    for (const auto& [view_key, images] : by_view) {
        (void)view_key;
        std::vector<const TripletImage*> ffdms, cviews, dbts;
        for (const auto* img : images) {
            switch (img->key.modality) {
                case Modality::FFDM: ffdms.push_back(img); break;
                case Modality::CVIEW: cviews.push_back(img); break;
                case Modality::DBT: dbts.push_back(img); break;
            }
        }

        for (const auto* cview : cviews) {
            const TripletImage* best_ffdm = nullptr;
            Scalar best_iou = 0;
            for (const auto* ffdm : ffdms) {
                bool listed = false;
                for (const auto& p : kResizePairs)
                    if (ffdm->geom.rows == p.ffdm_rows && ffdm->geom.cols == p.ffdm_cols &&
                        cview->geom.rows == p.cview_rows && cview->geom.cols == p.cview_cols)
                        listed = true;
                if (!listed && !aspect_close(ffdm->geom.rows, ffdm->geom.cols,
                                             cview->geom.rows, cview->geom.cols)) {
                    report.warnings.push_back("no aspect-ratio match: " + ffdm->key.image_id +
                                              " vs " + cview->key.image_id);
                    continue;
                }
                MaskGrid resized =
                    resize_mask(ffdm->foreground, cview->geom.rows, cview->geom.cols);
                MaskGrid fg_f = largest_connected_component(resized);
                MaskGrid fg_c = largest_connected_component(cview->foreground);
                const auto r = mask_iou(fg_f, fg_c, kTripletExcludeRows);
                if (!r.valid || r.value < iou_threshold) continue;
                if (r.value > best_iou) {
                    best_iou = r.value;
                    best_ffdm = ffdm;
                }
            }
            if (!best_ffdm) continue;

            const TripletImage* dbt = nullptr;
            for (const auto* d : dbts)
                if (d->acquisition_id == cview->acquisition_id) dbt = d;
            if (!dbt) {
                report.warnings.push_back("no DBT shares acquisition id of " +
                                          cview->key.image_id);
                continue;
            }
            report.triplets.push_back(
                {best_ffdm->key, cview->key, dbt->key, best_iou});
        }
    }
    return report;
}

}  // namespace mms
