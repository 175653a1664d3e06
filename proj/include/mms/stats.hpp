#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mms/metrics.hpp"
#include "mms/types.hpp"

namespace mms {

// Standard normal quantile (Wichura's AS241, full double precision).
Scalar norm_quantile(Scalar p);
// Standard normal CDF.
Scalar norm_cdf(Scalar z);

struct PairedPredictions {
    std::vector<std::string> unit_ids;
    std::vector<Scalar> model_a_scores;
    std::vector<Scalar> model_b_scores;
    std::vector<int> labels;  // {0, 1}
};

struct TestResult {
    Scalar statistic = 0;
    Scalar p_value = 1;
    std::optional<Scalar> effect;
    std::optional<std::pair<Scalar, Scalar>> ci;
};

struct BootstrapCi {
    Scalar lo = 0;
    Scalar hi = 0;
    long n_redraws = 0;  // resamples lacking both classes, redrawn
};

using CaseMetric = std::function<Scalar(const std::vector<ScoredCase>&)>;

// Percentile bootstrap (2.5th, 97.5th) over unit-level resamples with
// replacement. Single-class resamples are redrawn and counted; more invalid
// draws than n_resamples / 2 is an error.
BootstrapCi bootstrap_ci(const std::vector<ScoredCase>& cases, const CaseMetric& metric,
                         long n_resamples = 1000, std::uint64_t seed = 0);

enum class PairedMetric { Auroc, Auprc };

// Paired permutation test on percentile-rank-transformed scores: the observed
// statistic is metric(B) - metric(A); each iteration swaps every unit's pair
// independently with probability 1/2; the one-sided p-value is the fraction
// of null differences at least as large as the observed one.
TestResult permutation_test(const PairedPredictions& data, PairedMetric metric,
                            long n_iter = 10000, std::uint64_t seed = 0);

// Percentile ranks of `scores` within the same vector: mean rank for ties,
// scaled to (0, 1].
std::vector<Scalar> percentile_ranks(const std::vector<Scalar>& scores);

// One swappable unit: an image (lesion level) or a whole breast (breast
// level), carrying each model's boxes keyed by image id.
struct FrocUnit {
    std::string unit_id;
    std::map<std::string, std::vector<DetBox>> model_a_boxes;
    std::map<std::string, std::vector<DetBox>> model_b_boxes;
};

struct FrocPermutationInput {
    std::vector<FrocUnit> units;
    // Shared evaluation context: ground truth, breast mapping, slice counts,
    // and the image universe. Predictions inside are ignored; box sets come
    // from the units.
    FrocInput eval;
    FrocLevel level = FrocLevel::Lesion;
};

// FROC flavor of the permutation test: each model's box scores are rescaled
// through percentile ranks of its per-unit top-1 scores, whole units swap
// between models, and the metric is AUFROC_1.
TestResult permutation_test_froc(const FrocPermutationInput& input, long n_iter = 10000,
                                 std::uint64_t seed = 0);

// Proportional reduction of error: 1 - (1 - improved) / (1 - baseline).
Scalar reduction_of_error(Scalar auc_baseline, Scalar auc_improved);

// Two-tailed two-proportion z-test with pooled variance; effect size is
// Cohen's h.
TestResult two_prop_ztest(long r1, long n1, long r2, long n2);

Scalar cohens_h(Scalar p1, Scalar p2);

// Per-group sample size for a two-proportion z-test, rounded to nearest.
long sample_size(Scalar p1, Scalar p2, Scalar alpha = 0.05, Scalar power = 0.80);

}  // namespace mms
