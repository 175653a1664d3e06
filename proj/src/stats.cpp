#include "mms/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "mms/rng.hpp"

namespace mms {

Scalar norm_quantile(Scalar p) {
    // Wichura (1988), algorithm AS241 (PPND16).
    if (p <= 0 || p >= 1) throw std::invalid_argument("norm_quantile: p must be in (0,1)");
    const Scalar q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const Scalar r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    Scalar r = q < 0 ? p : 1 - p;
    r = std::sqrt(-std::log(r));
    Scalar val;
    if (r <= 5) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                  3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0 ? -val : val;
}

Scalar norm_cdf(Scalar z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

BootstrapCi bootstrap_ci(const std::vector<ScoredCase>& cases, const CaseMetric& metric,
                         long n_resamples, std::uint64_t seed) {
    if (cases.empty()) throw std::invalid_argument("bootstrap_ci: no cases");
    if (n_resamples < 1) throw std::invalid_argument("bootstrap_ci: n_resamples < 1");

    std::vector<Scalar> values;
    values.reserve(n_resamples);
    long redraws = 0;
    const long redraw_budget = n_resamples / 2;

    for (long i = 0; i < n_resamples; ++i) {
        auto rng = substream(seed, static_cast<std::uint64_t>(i));
        std::uniform_int_distribution<std::size_t> pick(0, cases.size() - 1);
        for (;;) {
            std::vector<ScoredCase> resample;
            resample.reserve(cases.size());
            bool has_pos = false, has_neg = false;
            for (std::size_t k = 0; k < cases.size(); ++k) {
                const ScoredCase& c = cases[pick(rng)];
                (c.label ? has_pos : has_neg) = true;
                resample.push_back(c);
            }
            if (has_pos && has_neg) {
                values.push_back(metric(resample));
                break;
            }
            if (++redraws > redraw_budget)
                throw std::runtime_error("bootstrap_ci: metric undefined on most resamples");
        }
    }

    std::sort(values.begin(), values.end());
    const auto n = static_cast<long>(values.size());
    auto nearest_rank = [&](Scalar pct) {
        long idx = static_cast<long>(std::ceil(pct * static_cast<Scalar>(n))) - 1;
        return values[static_cast<std::size_t>(std::clamp(idx, 0L, n - 1))];
    };
    return {nearest_rank(0.025), nearest_rank(0.975), redraws};
}

std::vector<Scalar> percentile_ranks(const std::vector<Scalar>& scores) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<Scalar> ranks(n, 0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        // Mean of 1-based ranks [i+1, j], scaled by n.
        const Scalar mean_rank = static_cast<Scalar>(i + 1 + j) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            ranks[order[k]] = mean_rank / static_cast<Scalar>(n);
        i = j;
    }
    return ranks;
}

namespace {

Scalar paired_metric_value(PairedMetric metric, const std::vector<Scalar>& scores,
                           const std::vector<int>& labels) {
    std::vector<ScoredCase> cases(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        cases[i] = {"", scores[i], labels[i]};
    return metric == PairedMetric::Auroc ? auroc(cases) : auprc(cases);
}

void validate_paired(const PairedPredictions& data) {
    const std::size_t n = data.unit_ids.size();
    if (data.model_a_scores.size() != n || data.model_b_scores.size() != n ||
        data.labels.size() != n)
        throw std::invalid_argument("permutation_test: misaligned inputs");
    if (n == 0) throw std::invalid_argument("permutation_test: no units");
    std::set<std::string> seen;
    for (const auto& id : data.unit_ids)
        if (!seen.insert(id).second)
            throw std::invalid_argument("permutation_test: duplicate unit " + id);
}

}  // namespace

TestResult permutation_test(const PairedPredictions& data, PairedMetric metric,
                            long n_iter, std::uint64_t seed) {
    validate_paired(data);
    if (n_iter < 1) throw std::invalid_argument("permutation_test: n_iter < 1");

    const std::vector<Scalar> a = percentile_ranks(data.model_a_scores);
    const std::vector<Scalar> b = percentile_ranks(data.model_b_scores);
    const Scalar observed = paired_metric_value(metric, b, data.labels) -
                            paired_metric_value(metric, a, data.labels);

    const std::size_t n = a.size();
    std::vector<Scalar> pa(n), pb(n);
    long at_least = 0;
    for (long it = 0; it < n_iter; ++it) {
        auto rng = substream(seed, static_cast<std::uint64_t>(it));
        std::bernoulli_distribution swap_unit(0.5);
        for (std::size_t i = 0; i < n; ++i) {
            if (swap_unit(rng)) {
                pa[i] = b[i];
                pb[i] = a[i];
            } else {
                pa[i] = a[i];
                pb[i] = b[i];
            }
        }
        const Scalar diff = paired_metric_value(metric, pb, data.labels) -
                            paired_metric_value(metric, pa, data.labels);
        if (diff >= observed) ++at_least;
    }

    TestResult result;
    result.statistic = observed;
    result.p_value = static_cast<Scalar>(at_least) / static_cast<Scalar>(n_iter);
    return result;
}

namespace {

// Percentile rank of an arbitrary score against a basis collection, matching
// percentile_ranks() on in-basis values.
Scalar rank_against(const std::vector<Scalar>& sorted_basis, Scalar s) {
    const auto lo = std::lower_bound(sorted_basis.begin(), sorted_basis.end(), s);
    const auto hi = std::upper_bound(sorted_basis.begin(), sorted_basis.end(), s);
    const Scalar below = static_cast<Scalar>(lo - sorted_basis.begin());
    const Scalar equal = static_cast<Scalar>(hi - lo);
    return (below + (equal + 1) / 2) / static_cast<Scalar>(sorted_basis.size());
}

Scalar froc_metric(const FrocPermutationInput& input,
                   const std::vector<const std::map<std::string, std::vector<DetBox>>*>& sides) {
    FrocInput eval = input.eval;
    for (auto& [id, boxes] : eval.predictions) boxes.clear();
    for (const auto* unit_boxes : sides)
        for (const auto& [image_id, boxes] : *unit_boxes) {
            auto it = eval.predictions.find(image_id);
            if (it == eval.predictions.end())
                throw std::invalid_argument("permutation_test_froc: unknown image " + image_id);
            it->second.insert(it->second.end(), boxes.begin(), boxes.end());
        }
    return aufroc1(froc(eval, input.level));
}

}  // namespace

TestResult permutation_test_froc(const FrocPermutationInput& input, long n_iter,
                                 std::uint64_t seed) {
    if (input.units.empty()) throw std::invalid_argument("permutation_test_froc: no units");
    if (n_iter < 1) throw std::invalid_argument("permutation_test_froc: n_iter < 1");
    {
        std::set<std::string> seen;
        for (const auto& u : input.units)
            if (!seen.insert(u.unit_id).second)
                throw std::invalid_argument("permutation_test_froc: duplicate unit " + u.unit_id);
    }

    // Percentile-rank basis: each model's top-1 score per unit.
    auto basis_of = [&](bool model_a) {
        std::vector<Scalar> basis;
        for (const auto& u : input.units) {
            const auto& boxes_by_image = model_a ? u.model_a_boxes : u.model_b_boxes;
            Scalar top = -1;
            for (const auto& [id, boxes] : boxes_by_image)
                for (const auto& b : boxes) top = std::max(top, b.score_malignant);
            if (top >= 0) basis.push_back(top);
        }
        std::sort(basis.begin(), basis.end());
        if (basis.empty())
            throw std::invalid_argument("permutation_test_froc: a model has no boxes");
        return basis;
    };
    const std::vector<Scalar> basis_a = basis_of(true);
    const std::vector<Scalar> basis_b = basis_of(false);

    // Rescale every box score through its model's basis, once, before swaps.
    std::vector<FrocUnit> units = input.units;
    for (auto& u : units) {
        for (auto& [id, boxes] : u.model_a_boxes)
            for (auto& b : boxes) b.score_malignant = rank_against(basis_a, b.score_malignant);
        for (auto& [id, boxes] : u.model_b_boxes)
            for (auto& b : boxes) b.score_malignant = rank_against(basis_b, b.score_malignant);
    }

    std::vector<const std::map<std::string, std::vector<DetBox>>*> side_a, side_b;
    side_a.reserve(units.size());
    side_b.reserve(units.size());
    for (const auto& u : units) {
        side_a.push_back(&u.model_a_boxes);
        side_b.push_back(&u.model_b_boxes);
    }
    const Scalar observed = froc_metric(input, side_b) - froc_metric(input, side_a);

    long at_least = 0;
    for (long it = 0; it < n_iter; ++it) {
        auto rng = substream(seed, static_cast<std::uint64_t>(it));
        std::bernoulli_distribution swap_unit(0.5);
        auto pa = side_a;
        auto pb = side_b;
        for (std::size_t i = 0; i < units.size(); ++i)
            if (swap_unit(rng)) std::swap(pa[i], pb[i]);
        const Scalar diff = froc_metric(input, pb) - froc_metric(input, pa);
        if (diff >= observed) ++at_least;
    }

    TestResult result;
    result.statistic = observed;
    result.p_value = static_cast<Scalar>(at_least) / static_cast<Scalar>(n_iter);
    return result;
}

Scalar reduction_of_error(Scalar auc_baseline, Scalar auc_improved) {
    if (auc_baseline >= 1)
        throw std::invalid_argument("reduction_of_error: baseline has no error");
    return 1 - (1 - auc_improved) / (1 - auc_baseline);
}

TestResult two_prop_ztest(long r1, long n1, long r2, long n2) {
    if (n1 < 1 || n2 < 1 || r1 < 0 || r2 < 0 || r1 > n1 || r2 > n2)
        throw std::invalid_argument("two_prop_ztest: bad counts");
    const Scalar p1 = static_cast<Scalar>(r1) / static_cast<Scalar>(n1);
    const Scalar p2 = static_cast<Scalar>(r2) / static_cast<Scalar>(n2);
    const Scalar pooled = static_cast<Scalar>(r1 + r2) / static_cast<Scalar>(n1 + n2);
    if (pooled <= 0 || pooled >= 1)
        throw std::invalid_argument("two_prop_ztest: pooled proportion has zero variance");
    const Scalar se = std::sqrt(pooled * (1 - pooled) *
                                (1.0 / static_cast<Scalar>(n1) + 1.0 / static_cast<Scalar>(n2)));
    TestResult result;
    result.statistic = (p1 - p2) / se;
    result.p_value = 2 * (1 - norm_cdf(std::abs(result.statistic)));
    result.effect = cohens_h(p1, p2);
    return result;
}

Scalar cohens_h(Scalar p1, Scalar p2) {
    if (p1 < 0 || p1 > 1 || p2 < 0 || p2 > 1)
        throw std::invalid_argument("cohens_h: proportions must be in [0,1]");
    return 2 * std::asin(std::sqrt(p1)) - 2 * std::asin(std::sqrt(p2));
}

long sample_size(Scalar p1, Scalar p2, Scalar alpha, Scalar power) {
    if (p1 <= 0 || p1 >= 1 || p2 <= 0 || p2 >= 1)
        throw std::invalid_argument("sample_size: proportions must be in (0,1)");
    if (p1 == p2) throw std::invalid_argument("sample_size: proportions must differ");
    const Scalar za = norm_quantile(1 - alpha / 2);
    const Scalar zb = norm_quantile(power);
    const Scalar n = (za + zb) * (za + zb) * (p1 * (1 - p1) + p2 * (1 - p2)) /
                     ((p1 - p2) * (p1 - p2));
    return std::lround(n);
}

}  // namespace mms
