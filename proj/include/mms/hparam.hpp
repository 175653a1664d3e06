#pragma once

#include <cstdint>
#include <string>

#include "mms/types.hpp"

namespace mms {

enum class DatasetVersion { V1, V2 };

struct HparamConfig {
    Scalar learning_rate = 0;
    Scalar weight_decay = 0;
    Scalar momentum = 0;
    int top_k = 0;
    std::string architecture;  // one of s, m, l, x
    int image_height = 0;
};

// Random-search draw from the tuning distributions: log-uniform learning
// rate and weight decay, uniform momentum, uniform choices for K,
// architecture, and image height. V2 narrows the sets and gives FFDM its own
// taller height range.
HparamConfig hparam_sample(DatasetVersion version, Modality modality, std::uint64_t seed,
                           std::uint64_t draw_index = 0);

}  // namespace mms
