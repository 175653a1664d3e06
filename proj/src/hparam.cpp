#include "mms/hparam.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "mms/rng.hpp"

namespace mms {

HparamConfig hparam_sample(DatasetVersion version, Modality modality, std::uint64_t seed,
                           std::uint64_t draw_index) {
    auto rng = substream(seed, draw_index);

    const bool v1 = version == DatasetVersion::V1;
    std::uniform_real_distribution<Scalar> log_lr(-6.046, v1 ? -5.456 : -5.398);
    std::uniform_real_distribution<Scalar> log_wd(-3.523, v1 ? -3.155 : -3.260);
    std::uniform_real_distribution<Scalar> momentum(0.80, 0.92);

    const std::vector<int> ks = v1 ? std::vector<int>{4, 5, 6, 7, 8, 9, 10}
                                   : std::vector<int>{5, 6, 7, 8, 9};
    const std::vector<std::string> archs =
        v1 ? std::vector<std::string>{"s", "m", "l", "x"} : std::vector<std::string>{"l", "x"};
    const std::vector<int> heights_short = {1536, 1664, 1792, 1920, 2048};
    const std::vector<int> heights_tall = {2048, 2176, 2304, 2432, 2560, 2688, 2816};
    const std::vector<int>& heights =
        (!v1 && modality == Modality::FFDM) ? heights_tall : heights_short;

    HparamConfig cfg;
    cfg.learning_rate = std::pow(10.0, log_lr(rng));
    cfg.weight_decay = std::pow(10.0, log_wd(rng));
    cfg.momentum = momentum(rng);
    cfg.top_k = ks[std::uniform_int_distribution<std::size_t>(0, ks.size() - 1)(rng)];
    cfg.architecture =
        archs[std::uniform_int_distribution<std::size_t>(0, archs.size() - 1)(rng)];
    cfg.image_height =
        heights[std::uniform_int_distribution<std::size_t>(0, heights.size() - 1)(rng)];
    return cfg;
}

}  // namespace mms
