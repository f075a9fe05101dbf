#pragma once

#include <complex>
#include <vector>

#include "dicelab/tensor.hpp"

namespace dicelab {

// Frame geometry shared by the feature extractor, the conv frontend and the
// ground-truth labels: 16 kHz audio, 20 ms hop -> 320 samples per frame.
inline constexpr int kSampleRate = 16000;
inline constexpr int kHopSamples = 320;
inline constexpr int kWinSamples = 400;  // 25 ms
inline constexpr int kFftSize = 512;
inline constexpr int kNumMels = 26;
inline constexpr int kNumCeps = 13;
inline constexpr int kMfccDim = 39;  // ceps + deltas + delta-deltas

inline int frame_count(int64_t num_samples) { return static_cast<int>(num_samples / kHopSamples); }

// 13 cepstra + delta + delta-delta per 20 ms frame; rows = floor(N/320).
// Throws DataError if the signal is shorter than one 25 ms window.
Tensor mfcc_features(const std::vector<float>& samples);

namespace dsp {

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a);

// |FFT|^2 of a Hann-windowed frame zero-padded to kFftSize; returns
// kFftSize/2+1 bins. n may be less than kWinSamples for the tail frame.
std::vector<double> power_spectrum_512(const double* frame, int n);

// Triangular mel filterbank as a [kNumMels x kFftSize/2+1] weight matrix.
const std::vector<double>& mel_filterbank();

}  // namespace dsp
}  // namespace dicelab
