#include "mms/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mms {

namespace {

bool valid_area(const BBox2D& b) { return b.w > 0 && b.h > 0; }

}  // namespace

Scalar iou(const BBox2D& a, const BBox2D& b) {
    if (!valid_area(a) || !valid_area(b)) return 0;
    const Scalar ix = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
    const Scalar iy = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
    if (ix <= 0 || iy <= 0) return 0;
    const Scalar inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

Scalar center_distance(const BBox2D& a, const BBox2D& b) {
    return std::hypot(a.cx - b.cx, a.cy - b.cy);
}

MaskIouResult mask_iou(const MaskGrid& a, const MaskGrid& b, long exclude_rows) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("mask_iou: dimension mismatch");
    if (exclude_rows < 0 || 2 * exclude_rows >= a.rows())
        throw std::invalid_argument("mask_iou: exclusion bands cover the whole mask");

    const long band = a.rows() - 2 * exclude_rows;
    const auto pa = a.middleRows(exclude_rows, band) != 0;
    const auto pb = b.middleRows(exclude_rows, band) != 0;
    const long inter = (pa && pb).count();
    const long uni = (pa || pb).count();
    if (uni == 0) return {0, false};
    return {static_cast<Scalar>(inter) / static_cast<Scalar>(uni), true};
}

std::vector<MaskGrid> connected_components(const MaskGrid& m) {
    std::vector<MaskGrid> out;
    MaskGrid seen = MaskGrid::Zero(m.rows(), m.cols());
    // Scanline flood fill: stack holds horizontal runs, not pixels.
    struct Run {
        long row, c0, c1;  // [c0, c1]
    };
    std::vector<Run> stack;
    for (long r0 = 0; r0 < m.rows(); ++r0) {
        for (long c0 = 0; c0 < m.cols(); ++c0) {
            if (m(r0, c0) == 0 || seen(r0, c0)) continue;
            MaskGrid comp = MaskGrid::Zero(m.rows(), m.cols());
            stack.clear();
            stack.push_back({r0, c0, c0});
            while (!stack.empty()) {
                Run run = stack.back();
                stack.pop_back();
                long lo = run.c0;
                while (lo > 0 && m(run.row, lo - 1) && !seen(run.row, lo - 1)) --lo;
                long hi = run.c1;
                while (hi + 1 < m.cols() && m(run.row, hi + 1) && !seen(run.row, hi + 1)) ++hi;
                for (long c = lo; c <= hi; ++c) {
                    seen(run.row, c) = 1;
                    comp(run.row, c) = 1;
                }
                for (long nr : {run.row - 1, run.row + 1}) {
                    if (nr < 0 || nr >= m.rows()) continue;
                    long c = lo;
                    while (c <= hi) {
                        if (m(nr, c) && !seen(nr, c)) {
                            const long start = c;
                            while (c <= hi && m(nr, c) && !seen(nr, c)) ++c;
                            stack.push_back({nr, start, c - 1});
                        } else {
                            ++c;
                        }
                    }
                }
            }
            out.push_back(std::move(comp));
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const MaskGrid& x, const MaskGrid& y) {
        return x.cast<long>().sum() > y.cast<long>().sum();
    });
    return out;
}

MaskGrid largest_connected_component(const MaskGrid& m) {
    auto comps = connected_components(m);
    if (comps.empty()) return MaskGrid::Zero(m.rows(), m.cols());
    return comps.front();
}

BBox2D tight_box(const MaskGrid& m) {
    long rmin = m.rows(), rmax = -1, cmin = m.cols(), cmax = -1;
    for (long r = 0; r < m.rows(); ++r)
        for (long c = 0; c < m.cols(); ++c)
            if (m(r, c)) {
                rmin = std::min(rmin, r);
                rmax = std::max(rmax, r);
                cmin = std::min(cmin, c);
                cmax = std::max(cmax, c);
            }
    if (rmax < 0) return {};
    BBox2D b;
    b.w = static_cast<Scalar>(cmax - cmin + 1);
    b.h = static_cast<Scalar>(rmax - rmin + 1);
    b.cx = static_cast<Scalar>(cmin) + b.w / 2;
    b.cy = static_cast<Scalar>(rmin) + b.h / 2;
    return b;
}

AffineAugmentResult affine_augment(const MaskGrid& seg, const AffineParams& params) {
    if (params.scale <= 0) throw std::invalid_argument("affine_augment: scale must be > 0");
    const long rows = seg.rows();
    const long cols = seg.cols();
    const Scalar cx = static_cast<Scalar>(cols) / 2;
    const Scalar cy = static_cast<Scalar>(rows) / 2;
    const Scalar rot = params.rotation_deg * std::numbers::pi / 180.0;
    const Scalar shear = params.shear_deg * std::numbers::pi / 180.0;

    // Forward map about the center: scale, shear (x by y), rotate, translate,
    // then the optional horizontal flip. Inverted here for output sampling.
    const Scalar ca = std::cos(rot), sa = std::sin(rot);
    const Scalar ts = std::tan(shear);
    // forward linear part: R * Shear_x * Scale
    const Scalar s = params.scale;
    const Scalar m00 = s * ca;
    const Scalar m01 = s * (ca * ts - sa);
    const Scalar m10 = s * sa;
    const Scalar m11 = s * (sa * ts + ca);
    const Scalar tx = params.translate_frac_x * static_cast<Scalar>(cols);
    const Scalar ty = params.translate_frac_y * static_cast<Scalar>(rows);

    const Scalar det = m00 * m11 - m01 * m10;
    if (std::abs(det) < 1e-12) throw std::invalid_argument("affine_augment: singular transform");
    const Scalar i00 = m11 / det, i01 = -m01 / det;
    const Scalar i10 = -m10 / det, i11 = m00 / det;

    // Label input components first so boxes can be tracked through the
    // transform per component.
    auto comps = connected_components(seg);
    MaskGrid out = MaskGrid::Zero(rows, cols);
    std::vector<MaskGrid> out_comps(comps.size(), MaskGrid());
    for (auto& oc : out_comps) oc = MaskGrid::Zero(rows, cols);

    for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) {
            // Output pixel center, undo flip, then the inverse affine.
            Scalar x = static_cast<Scalar>(c) + 0.5;
            const Scalar y = static_cast<Scalar>(r) + 0.5;
            if (params.hflip) x = static_cast<Scalar>(cols) - x;
            const Scalar dx = x - cx - tx;
            const Scalar dy = y - cy - ty;
            const Scalar sx = i00 * dx + i01 * dy + cx;
            const Scalar sy = i10 * dx + i11 * dy + cy;
            const long sc = static_cast<long>(std::floor(sx));
            const long sr = static_cast<long>(std::floor(sy));
            if (sr < 0 || sr >= rows || sc < 0 || sc >= cols) continue;
            if (!seg(sr, sc)) continue;
            out(r, c) = 1;
            for (std::size_t k = 0; k < comps.size(); ++k)
                if (comps[k](sr, sc)) out_comps[k](r, c) = 1;
        }
    }

    AffineAugmentResult result;
    result.mask = std::move(out);
    for (const auto& oc : out_comps) {
        BBox2D b = tight_box(oc);
        if (b.w > 0 && b.h > 0) result.boxes.push_back(b);
    }
    return result;
}

MaskGrid resize_mask(const MaskGrid& m, long rows, long cols) {
    if (rows <= 0 || cols <= 0) throw std::invalid_argument("resize_mask: bad size");
    MaskGrid out(rows, cols);
    const Scalar sr = static_cast<Scalar>(m.rows()) / static_cast<Scalar>(rows);
    const Scalar sc = static_cast<Scalar>(m.cols()) / static_cast<Scalar>(cols);
    std::vector<long> col_map(static_cast<std::size_t>(cols));
    for (long c = 0; c < cols; ++c)
        col_map[static_cast<std::size_t>(c)] =
            std::clamp(static_cast<long>((static_cast<Scalar>(c) + 0.5) * sc), 0L, m.cols() - 1);
    for (long r = 0; r < rows; ++r) {
        const long src_r =
            std::clamp(static_cast<long>((static_cast<Scalar>(r) + 0.5) * sr), 0L, m.rows() - 1);
        for (long c = 0; c < cols; ++c)
            out(r, c) = m(src_r, col_map[static_cast<std::size_t>(c)]);
    }
    return out;
}

CropWindow simple_crop_augment(const CropWindow& window, long jitter_px,
                               long shrink_min_px, long shrink_max_px,
                               std::mt19937_64& rng) {
    if (jitter_px < 0 || shrink_min_px < 0 || shrink_max_px < shrink_min_px)
        throw std::invalid_argument("simple_crop_augment: bad parameters");
    if (window.height <= shrink_max_px || window.width <= shrink_max_px)
        throw std::invalid_argument("simple_crop_augment: shrink exceeds window");

    std::uniform_int_distribution<long> jit(-jitter_px, jitter_px);
    std::uniform_int_distribution<long> shrink(shrink_min_px, shrink_max_px);
    CropWindow out = window;
    out.top += jit(rng);
    out.left += jit(rng);
    out.height -= shrink(rng);
    out.width -= shrink(rng);
    return out;
}

}  // namespace mms
