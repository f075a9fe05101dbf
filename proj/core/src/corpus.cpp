#include "dicelab/corpus.hpp"

#include <cmath>
#include <string>

#include "dicelab/errors.hpp"
#include "dicelab/mfcc.hpp"

namespace dicelab {

namespace {
constexpr int kMinSegFrames = 5;   // 100 ms
constexpr int kMaxSegFrames = 20;  // 400 ms
constexpr int kFadeSamples = 160;  // 10 ms edge ramp per segment
constexpr double kMasterGain = 0.3;
constexpr double kSnrAmplitudeRatio = 10.0;  // 20 dB
}  // namespace

void CorpusConfig::validate() const {
    if (n_utts < 1) throw ConfigError("corpus needs at least one utterance");
    if (phonemes < 2) throw ConfigError("corpus needs at least two pseudo-phonemes");
    if (speakers < 1) throw ConfigError("corpus needs at least one speaker");
    if (phonemes > 64) throw ConfigError("pseudo-phoneme count capped at 64, got " + std::to_string(phonemes));
    if (speakers > 64) throw ConfigError("speaker count capped at 64, got " + std::to_string(speakers));
    if (min_frames < kMinSegFrames || max_frames < min_frames)
        throw ConfigError("bad utterance duration range [" + std::to_string(min_frames) + ", " +
                          std::to_string(max_frames) + "] frames");
}

FormantTemplate phoneme_template(int p, int P) {
    if (p < 0 || p >= P) throw ConfigError("phoneme id out of range");
    FormantTemplate t;
    // Primary formant spread geometrically over 300..1900 Hz so neighbours
    // stay apart on the mel axis regardless of P; upper formants at
    // phoneme-dependent ratios give each template its own envelope shape.
    // Everything is capped so that even the highest-pitched speaker stays
    // below Nyquist.
    const double lo = 300.0, hi = 1900.0;
    const double f1 = lo * std::pow(hi / lo, static_cast<double>(p) / P);
    t.num = 2 + (p % 2);
    t.freq[0] = f1;
    t.freq[1] = std::min(f1 * (1.9 + 0.13 * (p % 3)), 7200.0);
    t.freq[2] = std::min(f1 * (3.1 + 0.17 * (p % 5)), 7200.0);
    t.amp[0] = 1.0;
    t.amp[1] = 0.6;
    t.amp[2] = 0.4;
    return t;
}

SpeakerParams speaker_params(int s, int S) {
    if (s < 0 || s >= S) throw ConfigError("speaker id out of range");
    SpeakerParams sp;
    const double u = (S > 1) ? static_cast<double>(s) / (S - 1) : 0.5;
    sp.pitch_factor = std::pow(2.0, (u - 0.5) * 0.25);  // about +-9 %
    sp.tilt = 0.7 + 0.6 * u;
    return sp;
}

uint64_t utt_seed_of(uint64_t corpus_seed, int utt_id) {
    return mix_seed(mix_seed(corpus_seed, "utt"), static_cast<uint64_t>(utt_id));
}

int speaker_of(int utt_id, int speakers) { return utt_id % speakers; }

UttPlan plan_utterance(uint64_t utt_seed, const CorpusConfig& cfg) {
    cfg.validate();
    Rng rng = Rng::from(utt_seed, "plan");
    UttPlan plan;
    plan.total_frames =
        cfg.min_frames + static_cast<int>(rng.uniform_index(static_cast<uint64_t>(cfg.max_frames - cfg.min_frames + 1)));
    int remaining = plan.total_frames;
    while (remaining > 0) {
        SegmentPlan seg;
        seg.phoneme = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(cfg.phonemes)));
        int d = kMinSegFrames +
                static_cast<int>(rng.uniform_index(static_cast<uint64_t>(kMaxSegFrames - kMinSegFrames + 1)));
        // Keep every segment, including the last, inside [100, 400] ms: never
        // leave a remainder shorter than the minimum segment.
        if (remaining - d == 0) {
            seg.frames = d;
        } else if (remaining - d < kMinSegFrames) {
            seg.frames = (remaining <= kMaxSegFrames) ? remaining : remaining - kMinSegFrames;
        } else {
            seg.frames = d;
        }
        plan.segments.push_back(seg);
        remaining -= seg.frames;
    }
    return plan;
}

std::vector<uint16_t> plan_truth(const UttPlan& plan) {
    std::vector<uint16_t> truth;
    truth.reserve(static_cast<size_t>(plan.total_frames));
    for (const auto& seg : plan.segments)
        truth.insert(truth.end(), static_cast<size_t>(seg.frames), static_cast<uint16_t>(seg.phoneme));
    return truth;
}

Utterance synth_from_plan(const UttPlan& plan, uint64_t utt_seed, int speaker_id, const CorpusConfig& cfg) {
    const SpeakerParams spk = speaker_params(speaker_id, cfg.speakers);
    Rng wave_rng = Rng::from(utt_seed, "wave");
    Rng noise_rng = Rng::from(utt_seed, "noise");

    const int64_t total_samples = static_cast<int64_t>(plan.total_frames) * kHopSamples;
    std::vector<double> x(static_cast<size_t>(total_samples), 0.0);

    int64_t pos = 0;
    for (const auto& seg : plan.segments) {
        const FormantTemplate tmpl = phoneme_template(seg.phoneme, cfg.phonemes);
        const int64_t len = static_cast<int64_t>(seg.frames) * kHopSamples;
        double phase[3];
        for (int i = 0; i < tmpl.num; ++i) phase[i] = wave_rng.uniform(0.0, 2.0 * M_PI);
        for (int64_t n = 0; n < len; ++n) {
            double v = 0.0;
            for (int i = 0; i < tmpl.num; ++i) {
                const double f = tmpl.freq[i] * spk.pitch_factor;
                const double a = tmpl.amp[i] * std::pow(spk.tilt, i);
                v += a * std::sin(2.0 * M_PI * f * static_cast<double>(n) / kSampleRate + phase[i]);
            }
            double env = 1.0;
            if (n < kFadeSamples) env = static_cast<double>(n) / kFadeSamples;
            const int64_t from_end = len - 1 - n;
            if (from_end < kFadeSamples) env = std::min(env, static_cast<double>(from_end) / kFadeSamples);
            x[static_cast<size_t>(pos + n)] = kMasterGain * env * v;
        }
        pos += len;
    }

    double sum_sq = 0.0;
    for (double v : x) sum_sq += v * v;
    const double rms = std::sqrt(sum_sq / static_cast<double>(total_samples));
    const double noise_std = rms / kSnrAmplitudeRatio;

    Utterance utt;
    utt.speaker_id = speaker_id;
    utt.seed = utt_seed;
    utt.samples.resize(static_cast<size_t>(total_samples));
    for (int64_t n = 0; n < total_samples; ++n) {
        double v = x[static_cast<size_t>(n)] + noise_rng.normal(0.0, noise_std);
        v = std::min(1.0, std::max(-1.0, v));
        utt.samples[static_cast<size_t>(n)] = static_cast<float>(v);
    }
    utt.frame_truth = plan_truth(plan);
    return utt;
}

Utterance synth_utterance(uint64_t utt_seed, int speaker_id, const CorpusConfig& cfg) {
    return synth_from_plan(plan_utterance(utt_seed, cfg), utt_seed, speaker_id, cfg);
}

}  // namespace dicelab
