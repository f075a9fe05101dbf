#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace dicelab {

// 64-bit FNV-1a, used for seed derivation and content digests.
inline uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Combines a seed with tags into a new stream seed. Streams derived with
// distinct tags are independent for our purposes.
inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
    uint64_t s = seed ^ (0x9e3779b97f4a7c15ull + (tag << 6) + (tag >> 2));
    splitmix64(s);
    return splitmix64(s);
}

inline uint64_t mix_seed(uint64_t seed, std::string_view tag) {
    return mix_seed(seed, fnv1a64(tag));
}

// Small deterministic generator. Same bit stream on every platform; the
// standard <random> distributions are implementation-defined, so we roll
// the few we need ourselves.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {
        // warm up so that small seeds do not produce correlated first draws
        splitmix64(state_);
    }

    static Rng from(uint64_t seed, std::string_view tag) { return Rng(mix_seed(seed, tag)); }
    static Rng from(uint64_t seed, uint64_t tag) { return Rng(mix_seed(seed, tag)); }
    static Rng from(uint64_t seed, std::string_view tag, uint64_t tag2) {
        return Rng(mix_seed(mix_seed(seed, tag), tag2));
    }

    uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t uniform_index(uint64_t n) { return n ? next_u64() % n : 0; }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; generates pairs and caches the second value.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // avoid log(0)
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Fisher-Yates over [0, n) index vector.
    template <typename Int>
    void shuffle(std::vector<Int>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace dicelab
