#pragma once

#include <cstdint>
#include <vector>

#include "dicelab/rng.hpp"

namespace dicelab {

// Knobs for the synthetic corpus. Durations are whole 20 ms frames so that
// segment boundaries, feature frames and truth labels line up exactly.
struct CorpusConfig {
    int n_utts = 0;
    int phonemes = 0;  // P
    int speakers = 0;  // S
    uint64_t seed = 0;
    int min_frames = 50;   // 1 s
    int max_frames = 200;  // 4 s

    void validate() const;
};

// A phoneme's spectral identity: a small bank of sinusoids.
struct FormantTemplate {
    int num = 0;
    double freq[3] = {0, 0, 0};
    double amp[3] = {0, 0, 0};
};

struct SpeakerParams {
    double pitch_factor = 1.0;  // multiplies every formant frequency
    double tilt = 1.0;          // per-formant amplitude rolloff
};

struct SegmentPlan {
    int phoneme = 0;
    int frames = 0;
};

struct UttPlan {
    std::vector<SegmentPlan> segments;
    int total_frames = 0;
};

struct Utterance {
    std::vector<float> samples;
    std::vector<uint16_t> frame_truth;
    int speaker_id = 0;
    uint64_t seed = 0;
};

FormantTemplate phoneme_template(int p, int P);
SpeakerParams speaker_params(int s, int S);

uint64_t utt_seed_of(uint64_t corpus_seed, int utt_id);
int speaker_of(int utt_id, int speakers);

// Segment/duration plan for one utterance; draws only from the "plan"
// sub-stream, so truth labels can be recovered without synthesizing audio.
UttPlan plan_utterance(uint64_t utt_seed, const CorpusConfig& cfg);
std::vector<uint16_t> plan_truth(const UttPlan& plan);

// Full audio for a given plan (exposed separately so tests can drive
// hand-built segment lists); 20 dB SNR noise, samples clamped to [-1, 1].
Utterance synth_from_plan(const UttPlan& plan, uint64_t utt_seed, int speaker_id, const CorpusConfig& cfg);
Utterance synth_utterance(uint64_t utt_seed, int speaker_id, const CorpusConfig& cfg);

}  // namespace dicelab
