#include "mms/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "mms/geometry.hpp"

namespace mms {

namespace {

// Cases sorted by score descending with equal scores grouped; yields the
// (positives, negatives) added per threshold step.
std::vector<std::pair<long, long>> threshold_groups(std::vector<ScoredCase> cases) {
    std::sort(cases.begin(), cases.end(), [](const ScoredCase& a, const ScoredCase& b) {
        return a.score > b.score;
    });
    std::vector<std::pair<long, long>> groups;
    std::size_t i = 0;
    while (i < cases.size()) {
        std::size_t j = i;
        long tp = 0, fp = 0;
        while (j < cases.size() && cases[j].score == cases[i].score) {
            (cases[j].label ? tp : fp) += 1;
            ++j;
        }
        groups.emplace_back(tp, fp);
        i = j;
    }
    return groups;
}

}  // namespace

Scalar auroc(const std::vector<ScoredCase>& cases) {
    long pos = 0, neg = 0;
    for (const auto& c : cases) {
        if (!std::isfinite(c.score)) throw std::invalid_argument("auroc: non-finite score");
        (c.label ? pos : neg) += 1;
    }
    if (pos == 0 || neg == 0)
        throw std::invalid_argument("auroc: needs at least one positive and one negative");

    // Trapezoid over grouped thresholds, accumulated as an integer numerator
    // scaled by 2: each negative in a group pairs fully with all positives
    // above the group and half with positives inside it.
    long long num2 = 0;
    long tp_before = 0;
    for (auto [tp, fp] : threshold_groups(cases)) {
        num2 += 2LL * fp * tp_before + static_cast<long long>(fp) * tp;
        tp_before += tp;
    }
    return static_cast<Scalar>(num2) / (2.0 * static_cast<Scalar>(pos) * static_cast<Scalar>(neg));
}

Scalar auprc(const std::vector<ScoredCase>& cases) {
    long pos = 0;
    for (const auto& c : cases) {
        if (!std::isfinite(c.score)) throw std::invalid_argument("auprc: non-finite score");
        pos += c.label ? 1 : 0;
    }
    if (pos == 0) throw std::invalid_argument("auprc: needs at least one positive");

    Scalar area = 0;
    long tp = 0, predicted = 0;
    Scalar prev_recall = 0;
    Scalar prev_precision = -1;  // set from the first threshold group
    for (auto [gtp, gfp] : threshold_groups(cases)) {
        tp += gtp;
        predicted += gtp + gfp;
        const Scalar recall = static_cast<Scalar>(tp) / static_cast<Scalar>(pos);
        const Scalar precision = static_cast<Scalar>(tp) / static_cast<Scalar>(predicted);
        if (prev_precision < 0) prev_precision = precision;  // anchor at recall 0
        area += (recall - prev_recall) * (precision + prev_precision) / 2;
        prev_recall = recall;
        prev_precision = precision;
    }
    return area;
}

bool match_tp(const DetBox& pred, const GroundTruthBox& gt,
              std::optional<int> n_slices) {
    const Scalar diag = std::hypot(gt.geom.w, gt.geom.h);
    const Scalar dist = center_distance(pred.geom, gt.geom);
    if (dist >= std::max(diag / 2, kTpCenterDistanceFloorPx)) return false;
    if (!gt.slice.has_value()) return true;  // 2D ground truth
    if (!pred.slice.has_value() || !n_slices.has_value())
        throw std::invalid_argument("match_tp: DBT ground truth needs prediction slice and slice count");
    const Scalar tol = kTpSliceTolerance * static_cast<Scalar>(*n_slices);
    return std::abs(static_cast<Scalar>(*pred.slice - *gt.slice)) <= tol;
}

FrocCurve froc(const FrocInput& input, FrocLevel level) {
    if (level == FrocLevel::Lesion && input.gts.empty())
        throw std::invalid_argument("froc: lesion level needs ground-truth boxes");
    for (const auto& gt : input.gts)
        if (!input.predictions.count(gt.image_id))
            throw std::invalid_argument("froc: ground truth on unknown image " + gt.image_id);

    // Match every prediction once; the sweep then just counts by score.
    struct Scored {
        Scalar score;
        bool matches_any;
        std::vector<std::string> lesions;   // lesion ids this prediction hits
        std::vector<std::string> breasts;   // breasts those lesions belong to
    };
    std::vector<Scored> preds;
    std::set<std::string> all_lesions;
    std::set<std::string> positive_breasts;
    for (const auto& gt : input.gts) {
        all_lesions.insert(gt.lesion_id);
        auto it = input.breast_of_image.find(gt.image_id);
        if (it != input.breast_of_image.end()) positive_breasts.insert(it->second);
    }

    for (const auto& [image_id, boxes] : input.predictions) {
        std::optional<int> slices;
        if (auto it = input.n_slices.find(image_id); it != input.n_slices.end())
            slices = it->second;
        for (const auto& box : boxes) {
            Scored s;
            s.score = box.score_malignant;
            s.matches_any = false;
            for (const auto& gt : input.gts) {
                if (gt.image_id != image_id) continue;
                if (!match_tp(box, gt, slices)) continue;
                s.matches_any = true;
                s.lesions.push_back(gt.lesion_id);
                if (auto it = input.breast_of_image.find(image_id);
                    it != input.breast_of_image.end())
                    s.breasts.push_back(it->second);
            }
            preds.push_back(std::move(s));
        }
    }

    std::sort(preds.begin(), preds.end(),
              [](const Scored& a, const Scored& b) { return a.score > b.score; });

    FrocCurve curve;
    curve.level = level;
    curve.n_images = static_cast<long>(input.predictions.size());
    if (curve.n_images == 0) throw std::invalid_argument("froc: no images");

    const Scalar denom = level == FrocLevel::Lesion
                             ? static_cast<Scalar>(all_lesions.size())
                             : static_cast<Scalar>(positive_breasts.size());
    if (denom == 0) throw std::invalid_argument("froc: no positive units");

    long fp = 0;
    std::set<std::string> hit_lesions;
    std::set<std::string> hit_breasts;
    std::size_t i = 0;
    while (i < preds.size()) {
        std::size_t j = i;
        while (j < preds.size() && preds[j].score == preds[i].score) {
            if (preds[j].matches_any) {
                for (const auto& l : preds[j].lesions) hit_lesions.insert(l);
                for (const auto& b : preds[j].breasts) hit_breasts.insert(b);
            } else {
                ++fp;
            }
            ++j;
        }
        FrocCurve::Point p;
        p.fp_per_image = static_cast<Scalar>(fp) / static_cast<Scalar>(curve.n_images);
        p.sensitivity = (level == FrocLevel::Lesion
                             ? static_cast<Scalar>(hit_lesions.size())
                             : static_cast<Scalar>(hit_breasts.size())) /
                        denom;
        curve.points.push_back(p);
        i = j;
    }
    return curve;
}

Scalar aufroc1(const FrocCurve& curve) {
    Scalar area = 0;
    Scalar x = 0;
    Scalar sens = 0;  // sensitivity is 0 left of the first point
    for (const auto& p : curve.points) {
        if (p.fp_per_image >= 1.0) {
            area += (1.0 - x) * sens;
            return area;
        }
        if (p.fp_per_image > x) {
            area += (p.fp_per_image - x) * sens;
            x = p.fp_per_image;
        }
        sens = p.sensitivity;
    }
    area += (1.0 - x) * sens;
    return area;
}

Scalar sensitivity_at_fp(const FrocCurve& curve, Scalar fp_per_image) {
    Scalar sens = 0;
    for (const auto& p : curve.points) {
        if (p.fp_per_image > fp_per_image) break;
        sens = p.sensitivity;
    }
    return sens;
}

}  // namespace mms
