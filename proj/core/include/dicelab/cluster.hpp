#pragma once

#include <cstdint>
#include <vector>

#include "dicelab/features.hpp"
#include "dicelab/tensor.hpp"

namespace dicelab {

struct Codebook {
    Tensor centroids;  // [K x dim]
    int k = 0;
    int dim = 0;
    double inertia = 0.0;
    uint64_t seed = 0;
    int iterations = 0;
    int64_t sample_count = 0;
    std::vector<double> inertia_history;  // per Lloyd iteration, not serialized
};

// k-means++ seeding, Lloyd iterations to tol on max centroid shift, empty
// clusters repaired by splitting the highest-inertia cluster at its farthest
// point. Dumps beyond max_fit_frames are fitted on a seeded subsample.
Codebook kmeans_fit(const FeatureDump& dump, int k, uint64_t seed, int max_iters = 100, double tol = 1e-4,
                    int64_t max_fit_frames = 1000000);

// z_t = argmin_i ||x_t - c_i||, ties to the lowest index
std::vector<uint16_t> assign_hard(const Codebook& codebook, const Tensor& feats);

// p(i|x) = softmax(-rho_i / tau), rho = unsquared L2 distance. Rows are
// computed and returned in double so they sum to 1 within 1e-9; file
// serialization rounds to 32-bit floats.
Tensor64 soft_labels(const Codebook& codebook, const Tensor& feats, double tau);

}  // namespace dicelab
