#include "dicelab/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dicelab/errors.hpp"
#include "dicelab/rng.hpp"

namespace dicelab {

namespace {

double dist_sq(const float* a, const float* b, int dim) {
    double acc = 0.0;
    for (int j = 0; j < dim; ++j) {
        const double d = static_cast<double>(a[j]) - static_cast<double>(b[j]);
        acc += d * d;
    }
    return acc;
}

double dist_sq(const float* a, const double* b, int dim) {
    double acc = 0.0;
    for (int j = 0; j < dim; ++j) {
        const double d = static_cast<double>(a[j]) - b[j];
        acc += d * d;
    }
    return acc;
}

}  // namespace

Codebook kmeans_fit(const FeatureDump& dump, int k, uint64_t seed, int max_iters, double tol,
                    int64_t max_fit_frames) {
    if (k < 2) throw ConfigError("cluster count must be at least 2");
    if (dump.dim < 1) throw ConfigError("feature dump has no dimension");
    const int dim = dump.dim;
    const int64_t total = dump.total_frames();
    if (total < k)
        throw ConfigError("cannot fit " + std::to_string(k) + " clusters on " + std::to_string(total) + " frames");

    // flatten (optionally subsampled) frames into one contiguous matrix
    std::vector<float> frames;
    int64_t n = std::min<int64_t>(total, max_fit_frames);
    frames.reserve(static_cast<size_t>(n) * dim);
    if (total <= max_fit_frames) {
        for (const auto& f : dump.feats)
            frames.insert(frames.end(), f.data(), f.data() + f.numel());
    } else {
        std::vector<int64_t> pick(static_cast<size_t>(total));
        for (int64_t i = 0; i < total; ++i) pick[static_cast<size_t>(i)] = i;
        Rng sub_rng = Rng::from(seed, "subsample");
        sub_rng.shuffle(pick);
        pick.resize(static_cast<size_t>(max_fit_frames));
        std::sort(pick.begin(), pick.end());
        size_t cursor = 0;
        int64_t base = 0;
        for (const auto& f : dump.feats) {
            const int64_t rows = f.rows();
            while (cursor < pick.size() && pick[cursor] < base + rows) {
                const int64_t local = pick[cursor] - base;
                const float* row = f.data() + local * dim;
                frames.insert(frames.end(), row, row + dim);
                ++cursor;
            }
            base += rows;
        }
    }
    n = static_cast<int64_t>(frames.size()) / dim;
    auto frame = [&](int64_t i) { return frames.data() + i * dim; };

    // k-means++ seeding
    Rng rng = Rng::from(seed, "kmeanspp");
    std::vector<double> centroids(static_cast<size_t>(k) * dim);
    std::vector<double> min_d2(static_cast<size_t>(n));
    {
        const int64_t first = static_cast<int64_t>(rng.uniform_index(static_cast<uint64_t>(n)));
        for (int j = 0; j < dim; ++j) centroids[static_cast<size_t>(j)] = frame(first)[j];
        for (int64_t i = 0; i < n; ++i) min_d2[static_cast<size_t>(i)] = dist_sq(frame(i), centroids.data(), dim);
        for (int c = 1; c < k; ++c) {
            double total_d2 = 0.0;
            for (int64_t i = 0; i < n; ++i) total_d2 += min_d2[static_cast<size_t>(i)];
            int64_t chosen = n - 1;
            if (total_d2 > 0.0) {
                const double u = rng.uniform() * total_d2;
                double cum = 0.0;
                for (int64_t i = 0; i < n; ++i) {
                    cum += min_d2[static_cast<size_t>(i)];
                    if (u < cum) {
                        chosen = i;
                        break;
                    }
                }
            } else {
                chosen = static_cast<int64_t>(rng.uniform_index(static_cast<uint64_t>(n)));
            }
            double* cc = centroids.data() + static_cast<size_t>(c) * dim;
            for (int j = 0; j < dim; ++j) cc[j] = frame(chosen)[j];
            for (int64_t i = 0; i < n; ++i)
                min_d2[static_cast<size_t>(i)] = std::min(min_d2[static_cast<size_t>(i)], dist_sq(frame(i), cc, dim));
        }
    }

    Codebook cb;
    cb.k = k;
    cb.dim = dim;
    cb.seed = seed;
    cb.sample_count = n;

    std::vector<int> assign(static_cast<size_t>(n), 0);
    std::vector<double> sums(static_cast<size_t>(k) * dim);
    std::vector<int64_t> counts(static_cast<size_t>(k));
    std::vector<double> cluster_inertia(static_cast<size_t>(k));
    std::vector<double> point_d2(static_cast<size_t>(n));

    for (int iter = 0; iter < max_iters; ++iter) {
        // assignment (fixed sequential order keeps everything deterministic)
        double inertia = 0.0;
        std::fill(cluster_inertia.begin(), cluster_inertia.end(), 0.0);
        for (int64_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d2 = dist_sq(frame(i), centroids.data(), dim);
            for (int c = 1; c < k; ++c) {
                const double d2 = dist_sq(frame(i), centroids.data() + static_cast<size_t>(c) * dim, dim);
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = c;
                }
            }
            assign[static_cast<size_t>(i)] = best;
            point_d2[static_cast<size_t>(i)] = best_d2;
            cluster_inertia[static_cast<size_t>(best)] += best_d2;
            inertia += best_d2;
        }

        // empty-cluster repair: move each empty centroid onto the farthest
        // point of the currently worst (highest-inertia) cluster
        std::fill(counts.begin(), counts.end(), 0);
        for (int64_t i = 0; i < n; ++i) counts[static_cast<size_t>(assign[static_cast<size_t>(i)])]++;
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<size_t>(c)] != 0) continue;
            int worst = 0;
            for (int w = 1; w < k; ++w)
                if (cluster_inertia[static_cast<size_t>(w)] > cluster_inertia[static_cast<size_t>(worst)]) worst = w;
            int64_t farthest = -1;
            double far_d2 = -1.0;
            for (int64_t i = 0; i < n; ++i)
                if (assign[static_cast<size_t>(i)] == worst && point_d2[static_cast<size_t>(i)] > far_d2) {
                    far_d2 = point_d2[static_cast<size_t>(i)];
                    farthest = i;
                }
            if (farthest < 0) continue;  // even the worst cluster is empty: degenerate data
            inertia -= far_d2;
            cluster_inertia[static_cast<size_t>(worst)] -= far_d2;
            assign[static_cast<size_t>(farthest)] = c;
            point_d2[static_cast<size_t>(farthest)] = 0.0;
            counts[static_cast<size_t>(worst)]--;
            counts[static_cast<size_t>(c)] = 1;
            double* cc = centroids.data() + static_cast<size_t>(c) * dim;
            for (int j = 0; j < dim; ++j) cc[j] = frame(farthest)[j];
        }

        cb.inertia = inertia;
        cb.inertia_history.push_back(inertia);
        cb.iterations = iter + 1;

        // update step with double accumulation
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (int64_t i = 0; i < n; ++i) {
            const int c = assign[static_cast<size_t>(i)];
            double* row = sums.data() + static_cast<size_t>(c) * dim;
            const float* x = frame(i);
            for (int j = 0; j < dim; ++j) row[j] += x[j];
            counts[static_cast<size_t>(c)]++;
        }
        double max_shift = 0.0;
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<size_t>(c)] == 0) continue;
            double* cc = centroids.data() + static_cast<size_t>(c) * dim;
            double shift2 = 0.0;
            for (int j = 0; j < dim; ++j) {
                const double next = sums[static_cast<size_t>(c) * dim + j] / static_cast<double>(counts[static_cast<size_t>(c)]);
                const double d = next - cc[j];
                shift2 += d * d;
                cc[j] = next;
            }
            max_shift = std::max(max_shift, std::sqrt(shift2));
        }
        if (max_shift < tol) break;
    }

    cb.centroids = Tensor({k, dim});
    for (int c = 0; c < k; ++c)
        for (int j = 0; j < dim; ++j)
            cb.centroids.at(c, j) = static_cast<float>(centroids[static_cast<size_t>(c) * dim + j]);
    return cb;
}

std::vector<uint16_t> assign_hard(const Codebook& cb, const Tensor& feats) {
    if (feats.rank() != 2 || feats.cols() != cb.dim)
        throw DimensionError("feature dim " + feats.shape_str() + " does not match codebook dim " +
                             std::to_string(cb.dim));
    const int T = feats.rows();
    std::vector<uint16_t> out(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
        const float* x = feats.data() + static_cast<size_t>(t) * cb.dim;
        int best = 0;
        double best_d2 = dist_sq(x, cb.centroids.data(), cb.dim);
        for (int c = 1; c < cb.k; ++c) {
            const double d2 = dist_sq(x, cb.centroids.data() + static_cast<size_t>(c) * cb.dim, cb.dim);
            if (d2 < best_d2) {
                best_d2 = d2;
                best = c;
            }
        }
        out[static_cast<size_t>(t)] = static_cast<uint16_t>(best);
    }
    return out;
}

Tensor64 soft_labels(const Codebook& cb, const Tensor& feats, double tau) {
    if (tau <= 0.0) throw ConfigError("soft-label temperature must be positive");
    if (feats.rank() != 2 || feats.cols() != cb.dim)
        throw DimensionError("feature dim " + feats.shape_str() + " does not match codebook dim " +
                             std::to_string(cb.dim));
    const int T = feats.rows();
    Tensor64 out({T, cb.k});
    std::vector<double> logit(static_cast<size_t>(cb.k));
    for (int t = 0; t < T; ++t) {
        const float* x = feats.data() + static_cast<size_t>(t) * cb.dim;
        double mx = -1e300;
        for (int c = 0; c < cb.k; ++c) {
            const double rho = std::sqrt(dist_sq(x, cb.centroids.data() + static_cast<size_t>(c) * cb.dim, cb.dim));
            logit[static_cast<size_t>(c)] = -rho / tau;
            mx = std::max(mx, logit[static_cast<size_t>(c)]);
        }
        double denom = 0.0;
        for (int c = 0; c < cb.k; ++c) denom += std::exp(logit[static_cast<size_t>(c)] - mx);
        for (int c = 0; c < cb.k; ++c)
            out.at(t, c) = std::exp(logit[static_cast<size_t>(c)] - mx) / denom;
    }
    return out;
}

}  // namespace dicelab
