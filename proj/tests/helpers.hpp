#pragma once

#include <cstdint>
#include <vector>

#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"

namespace fedsim::testing {

// Small deterministic classification fixture: 20 samples, 3 classes, dim 4.
inline LabeledDataset small_fixture(std::uint64_t seed = 42) {
    Rng rng(seed);
    LabeledDataset data;
    data.feature_dim = 4;
    data.num_classes = 3;
    for (std::size_t i = 0; i < 20; ++i) {
        std::size_t label = static_cast<std::size_t>(rng.bounded(3));
        data.labels.push_back(label);
        for (std::size_t d = 0; d < 4; ++d)
            data.features.push_back((d == label ? 2.0 : 0.0) + rng.normal());
    }
    return data;
}

inline ParamVector random_params(const Layout& layout, std::uint64_t seed, double scale = 0.5) {
    Rng rng(seed);
    ParamVector p = zeros_like(layout);
    for (double& v : p.values) v = scale * rng.normal();
    return p;
}

} // namespace fedsim::testing
