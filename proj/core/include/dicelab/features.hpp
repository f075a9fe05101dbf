#pragma once

#include <cstdint>
#include <vector>

#include "dicelab/tensor.hpp"

namespace dicelab {

// Per-utterance frame features of a fixed dimension (acoustic features or a
// model layer's activations), keyed by dense utterance ids.
struct FeatureDump {
    int dim = 0;
    std::vector<uint32_t> ids;
    std::vector<Tensor> feats;  // feats[i] has shape [T_i x dim]

    int64_t total_frames() const {
        int64_t n = 0;
        for (const auto& f : feats) n += f.rows();
        return n;
    }
};

}  // namespace dicelab
