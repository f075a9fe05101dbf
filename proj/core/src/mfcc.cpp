#include "dicelab/mfcc.hpp"

#include <cmath>

#include "dicelab/errors.hpp"

namespace dicelab {
namespace dsp {

void fft_radix2(std::vector<std::complex<double>>& a) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw DimensionError("fft size must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        for (size_t i = 0; i < n; i += len) {
            for (size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

std::vector<double> power_spectrum_512(const double* frame, int n) {
    if (n < 1 || n > kWinSamples) throw DimensionError("frame length out of range");
    std::vector<std::complex<double>> buf(kFftSize, {0.0, 0.0});
    for (int j = 0; j < n; ++j) {
        const double w = 0.5 * (1.0 - std::cos(2.0 * M_PI * j / (kWinSamples - 1)));
        buf[static_cast<size_t>(j)] = frame[j] * w;
    }
    fft_radix2(buf);
    std::vector<double> pow(kFftSize / 2 + 1);
    for (int k = 0; k <= kFftSize / 2; ++k) pow[static_cast<size_t>(k)] = std::norm(buf[static_cast<size_t>(k)]);
    return pow;
}

static double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
static double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

const std::vector<double>& mel_filterbank() {
    static const std::vector<double> fb = [] {
        const int bins = kFftSize / 2 + 1;
        std::vector<double> w(static_cast<size_t>(kNumMels) * bins, 0.0);
        const double mel_lo = hz_to_mel(0.0);
        const double mel_hi = hz_to_mel(kSampleRate / 2.0);
        std::vector<double> edges(kNumMels + 2);
        for (int i = 0; i < kNumMels + 2; ++i)
            edges[static_cast<size_t>(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (kNumMels + 1));
        for (int m = 0; m < kNumMels; ++m) {
            const double lo = edges[static_cast<size_t>(m)];
            const double mid = edges[static_cast<size_t>(m) + 1];
            const double hi = edges[static_cast<size_t>(m) + 2];
            for (int k = 0; k < bins; ++k) {
                const double f = static_cast<double>(k) * kSampleRate / kFftSize;
                double v = 0.0;
                if (f >= lo && f <= mid && mid > lo)
                    v = (f - lo) / (mid - lo);
                else if (f > mid && f <= hi && hi > mid)
                    v = (hi - f) / (hi - mid);
                w[static_cast<size_t>(m) * bins + k] = v;
            }
        }
        return w;
    }();
    return fb;
}

}  // namespace dsp

namespace {

// 13 orthonormal DCT-II coefficients of the 26 log mel energies
void dct13(const double* log_mel, double* ceps) {
    const int M = kNumMels;
    for (int k = 0; k < kNumCeps; ++k) {
        double acc = 0.0;
        for (int m = 0; m < M; ++m) acc += log_mel[m] * std::cos(M_PI * k * (m + 0.5) / M);
        const double scale = (k == 0) ? std::sqrt(1.0 / M) : std::sqrt(2.0 / M);
        ceps[k] = acc * scale;
    }
}

// +-2 regression deltas with clamped edges, denominator 2*(1+4)=10
void deltas(const std::vector<double>& src, int T, int width, std::vector<double>& dst) {
    dst.assign(src.size(), 0.0);
    auto clamp_t = [T](int t) { return t < 0 ? 0 : (t >= T ? T - 1 : t); };
    for (int t = 0; t < T; ++t) {
        for (int j = 0; j < width; ++j) {
            double num = 0.0;
            for (int n = 1; n <= 2; ++n) {
                const double fwd = src[static_cast<size_t>(clamp_t(t + n)) * width + j];
                const double bwd = src[static_cast<size_t>(clamp_t(t - n)) * width + j];
                num += n * (fwd - bwd);
            }
            dst[static_cast<size_t>(t) * width + j] = num / 10.0;
        }
    }
}

}  // namespace

Tensor mfcc_features(const std::vector<float>& samples) {
    const int64_t N = static_cast<int64_t>(samples.size());
    if (N < kWinSamples)
        throw DataError("signal too short for feature extraction: " + std::to_string(N) + " samples, need " +
                        std::to_string(kWinSamples));
    const int T = frame_count(N);
    const auto& fb = dsp::mel_filterbank();
    const int bins = kFftSize / 2 + 1;

    std::vector<double> ceps(static_cast<size_t>(T) * kNumCeps);
    std::vector<double> frame(kWinSamples);
    for (int t = 0; t < T; ++t) {
        const int64_t start = static_cast<int64_t>(t) * kHopSamples;
        const int n = static_cast<int>(std::min<int64_t>(kWinSamples, N - start));
        for (int j = 0; j < n; ++j) frame[static_cast<size_t>(j)] = static_cast<double>(samples[static_cast<size_t>(start) + j]);
        const auto pow = dsp::power_spectrum_512(frame.data(), n);
        double log_mel[kNumMels];
        for (int m = 0; m < kNumMels; ++m) {
            double e = 0.0;
            const double* row = fb.data() + static_cast<size_t>(m) * bins;
            for (int k = 0; k < bins; ++k) e += row[k] * pow[static_cast<size_t>(k)];
            log_mel[m] = std::log(std::max(e, 1e-10));
        }
        dct13(log_mel, ceps.data() + static_cast<size_t>(t) * kNumCeps);
    }

    std::vector<double> d1, d2;
    deltas(ceps, T, kNumCeps, d1);
    deltas(d1, T, kNumCeps, d2);

    Tensor out({T, kMfccDim});
    for (int t = 0; t < T; ++t) {
        for (int j = 0; j < kNumCeps; ++j) {
            out.at(t, j) = static_cast<float>(ceps[static_cast<size_t>(t) * kNumCeps + j]);
            out.at(t, kNumCeps + j) = static_cast<float>(d1[static_cast<size_t>(t) * kNumCeps + j]);
            out.at(t, 2 * kNumCeps + j) = static_cast<float>(d2[static_cast<size_t>(t) * kNumCeps + j]);
        }
    }
    return out;
}

}  // namespace dicelab
