#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <dicelab/errors.hpp>
#include <dicelab/mfcc.hpp>
#include <dicelab/rng.hpp>
#include <vector>

using namespace dicelab;

namespace {

// quadratic-time reference DFT
std::vector<std::complex<double>> dft_oracle(const std::vector<std::complex<double>>& x) {
    const size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (size_t k = 0; k < n; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (size_t j = 0; j < n; ++j) {
            const double ang = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(j) / static_cast<double>(n);
            acc += x[j] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

std::vector<float> tone(double freq, double seconds, double amp = 0.5) {
    const int n = static_cast<int>(seconds * kSampleRate);
    std::vector<float> s(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        s[static_cast<size_t>(i)] = static_cast<float>(amp * std::sin(2.0 * M_PI * freq * i / kSampleRate));
    return s;
}

}  // namespace

TEST_CASE("fft matches the direct DFT") {
    Rng rng(31);
    for (size_t n : {8ul, 64ul, 512ul}) {
        std::vector<std::complex<double>> x(n);
        for (auto& v : x) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        auto ref = dft_oracle(x);
        auto got = x;
        dsp::fft_radix2(got);
        for (size_t k = 0; k < n; ++k) CHECK(std::abs(got[k] - ref[k]) < 1e-9);
    }
    std::vector<std::complex<double>> bad(3);
    CHECK_THROWS_AS(dsp::fft_radix2(bad), DimensionError);
}

TEST_CASE("silence gives a constant c0 column and zero deltas") {
    std::vector<float> silence(kSampleRate, 0.0f);  // 1 s
    Tensor f = mfcc_features(silence);
    REQUIRE(f.rows() == 50);
    REQUIRE(f.cols() == kMfccDim);
    for (int t = 1; t < f.rows(); ++t) CHECK(f.at(t, 0) == f.at(0, 0));
    for (int t = 0; t < f.rows(); ++t)
        for (int j = kNumCeps; j < kMfccDim; ++j) CHECK(f.at(t, j) == 0.0f);
}

TEST_CASE("frame count follows floor(samples / hop)") {
    CHECK(mfcc_features(tone(440.0, 2.0)).rows() == 100);
    CHECK(mfcc_features(std::vector<float>(32000 + 319, 0.1f)).rows() == 100);
    CHECK(frame_count(32000) == 100);
}

TEST_CASE("different tones are far apart in feature space") {
    Tensor a = mfcc_features(tone(440.0, 1.0));
    Tensor b = mfcc_features(tone(880.0, 1.0));
    REQUIRE(a.rows() == b.rows());
    std::vector<double> ma(kMfccDim, 0.0), mb(kMfccDim, 0.0);
    for (int t = 0; t < a.rows(); ++t)
        for (int j = 0; j < kMfccDim; ++j) {
            ma[static_cast<size_t>(j)] += a.at(t, j) / a.rows();
            mb[static_cast<size_t>(j)] += b.at(t, j) / b.rows();
        }
    double d2 = 0.0;
    for (int j = 0; j < kMfccDim; ++j) {
        const double d = ma[static_cast<size_t>(j)] - mb[static_cast<size_t>(j)];
        d2 += d * d;
    }
    CHECK(std::sqrt(d2) > 1.0);
}

TEST_CASE("extraction is bit-identical across runs") {
    auto s = tone(523.25, 1.3, 0.4);
    Tensor a = mfcc_features(s);
    Tensor b = mfcc_features(s);
    REQUIRE(a.numel() == b.numel());
    for (int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("too-short input is rejected as bad data") {
    std::vector<float> tiny(399, 0.0f);
    CHECK_THROWS_AS(mfcc_features(tiny), DataError);
}

TEST_CASE("mel filterbank rows are nonnegative and cover the band") {
    const auto& fb = dsp::mel_filterbank();
    const int bins = kFftSize / 2 + 1;
    REQUIRE(static_cast<int>(fb.size()) == kNumMels * bins);
    for (double w : fb) CHECK(w >= 0.0);
    for (int m = 0; m < kNumMels; ++m) {
        double s = 0.0;
        for (int k = 0; k < bins; ++k) s += fb[static_cast<size_t>(m) * bins + k];
        CHECK(s > 0.0);  // every filter catches at least one bin
    }
}
