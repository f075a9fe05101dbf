#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <dicelab/corpus.hpp>
#include <dicelab/errors.hpp>
#include <dicelab/mfcc.hpp>

using namespace dicelab;

namespace {
CorpusConfig small_cfg() {
    CorpusConfig cfg;
    cfg.n_utts = 4;
    cfg.phonemes = 4;
    cfg.speakers = 2;
    cfg.seed = 7;
    return cfg;
}
}  // namespace

TEST_CASE("config validation enforces desk-scale bounds") {
    CorpusConfig cfg = small_cfg();
    CHECK_NOTHROW(cfg.validate());
    cfg.phonemes = 65;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_cfg();
    cfg.speakers = 65;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_cfg();
    cfg.phonemes = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_cfg();
    cfg.n_utts = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_cfg();
    cfg.speakers = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("synthesis is bit-identical for a fixed seed") {
    CorpusConfig cfg = small_cfg();
    cfg.n_utts = 1;
    cfg.phonemes = 2;
    cfg.speakers = 1;
    const uint64_t us = utt_seed_of(cfg.seed, 0);
    Utterance a = synth_utterance(us, 0, cfg);
    Utterance b = synth_utterance(us, 0, cfg);
    REQUIRE(a.samples.size() == b.samples.size());
    CHECK(a.samples == b.samples);
    CHECK(a.frame_truth == b.frame_truth);

    Utterance c = synth_utterance(utt_seed_of(cfg.seed, 0) ^ 1, 0, cfg);
    CHECK(a.samples != c.samples);
}

TEST_CASE("frame truth flips exactly at segment boundaries") {
    CorpusConfig cfg = small_cfg();
    UttPlan plan;
    plan.segments = {{0, 5}, {1, 3}, {2, 42}};  // boundaries at 100 ms and 160 ms
    plan.total_frames = 50;
    Utterance u = synth_from_plan(plan, 99, 0, cfg);
    REQUIRE(static_cast<int>(u.frame_truth.size()) == 50);
    for (int t = 0; t < 5; ++t) CHECK(u.frame_truth[static_cast<size_t>(t)] == 0);
    for (int t = 5; t < 8; ++t) CHECK(u.frame_truth[static_cast<size_t>(t)] == 1);
    for (int t = 8; t < 50; ++t) CHECK(u.frame_truth[static_cast<size_t>(t)] == 2);
    CHECK(u.samples.size() == 50u * kHopSamples);
}

TEST_CASE("waveform invariants: range, length, truth alignment") {
    CorpusConfig cfg = small_cfg();
    for (int id = 0; id < cfg.n_utts; ++id) {
        Utterance u = synth_utterance(utt_seed_of(cfg.seed, id), speaker_of(id, cfg.speakers), cfg);
        CHECK(u.samples.size() % kHopSamples == 0);
        CHECK(u.frame_truth.size() == u.samples.size() / kHopSamples);
        const int frames = static_cast<int>(u.frame_truth.size());
        CHECK(frames >= cfg.min_frames);
        CHECK(frames <= cfg.max_frames);
        for (float s : u.samples) {
            CHECK(s >= -1.0f);
            CHECK(s <= 1.0f);
        }
        for (uint16_t p : u.frame_truth) CHECK(p < cfg.phonemes);
        double rms = 0.0;
        for (float s : u.samples) rms += static_cast<double>(s) * s;
        CHECK(std::sqrt(rms / static_cast<double>(u.samples.size())) > 0.01);
    }
}

TEST_CASE("segment plans stay inside the 100-400 ms contract") {
    CorpusConfig cfg = small_cfg();
    for (int id = 0; id < 500; ++id) {
        UttPlan plan = plan_utterance(utt_seed_of(cfg.seed, id), cfg);
        int sum = 0;
        for (const auto& seg : plan.segments) {
            CHECK(seg.frames >= 5);
            CHECK(seg.frames <= 20);
            CHECK(seg.phoneme >= 0);
            CHECK(seg.phoneme < cfg.phonemes);
            sum += seg.frames;
        }
        CHECK(sum == plan.total_frames);
        CHECK(plan.total_frames >= cfg.min_frames);
        CHECK(plan.total_frames <= cfg.max_frames);
    }
}

TEST_CASE("long-run frame label histogram is uniform within 5 percent") {
    CorpusConfig cfg = small_cfg();
    cfg.n_utts = 1000;
    std::vector<int64_t> hist(static_cast<size_t>(cfg.phonemes), 0);
    int64_t total = 0;
    for (int id = 0; id < cfg.n_utts; ++id) {
        UttPlan plan = plan_utterance(utt_seed_of(cfg.seed, id), cfg);
        for (const auto& seg : plan.segments) {
            hist[static_cast<size_t>(seg.phoneme)] += seg.frames;
            total += seg.frames;
        }
    }
    const double expect = static_cast<double>(total) / cfg.phonemes;
    for (int64_t c : hist) CHECK(std::fabs(static_cast<double>(c) - expect) / expect < 0.05);
}

TEST_CASE("phoneme templates and speaker params are well-formed") {
    for (int P : {2, 4, 16, 64}) {
        for (int p = 0; p < P; ++p) {
            FormantTemplate t = phoneme_template(p, P);
            CHECK(t.num >= 2);
            CHECK(t.num <= 3);
            for (int i = 0; i < t.num; ++i) {
                CHECK(t.freq[i] > 100.0);
                // loudest speaker pitch factor is ~1.091; product must stay under Nyquist
                CHECK(t.freq[i] * 1.1 < 8000.0);
                CHECK(t.amp[i] > 0.0);
            }
        }
    }
    CHECK_THROWS_AS(phoneme_template(4, 4), ConfigError);
    for (int S : {1, 2, 64}) {
        for (int s = 0; s < S; ++s) {
            SpeakerParams sp = speaker_params(s, S);
            CHECK(sp.pitch_factor > 0.8);
            CHECK(sp.pitch_factor < 1.2);
            CHECK(sp.tilt > 0.5);
            CHECK(sp.tilt < 1.5);
        }
    }
    CHECK(speaker_params(0, 2).pitch_factor != speaker_params(1, 2).pitch_factor);
}

TEST_CASE("features of distinct phonemes separate in feature space") {
    // one long utterance per phoneme, then compare mean feature vectors
    CorpusConfig cfg = small_cfg();
    std::vector<std::vector<double>> means;
    for (int p = 0; p < cfg.phonemes; ++p) {
        UttPlan plan;
        plan.segments = {{p, 50}};
        plan.total_frames = 50;
        Utterance u = synth_from_plan(plan, 1234 + static_cast<uint64_t>(p), 0, cfg);
        Tensor f = mfcc_features(u.samples);
        std::vector<double> m(kMfccDim, 0.0);
        for (int t = 0; t < f.rows(); ++t)
            for (int j = 0; j < kMfccDim; ++j) m[static_cast<size_t>(j)] += f.at(t, j) / f.rows();
        means.push_back(std::move(m));
    }
    for (size_t i = 0; i < means.size(); ++i)
        for (size_t j = i + 1; j < means.size(); ++j) {
            double d2 = 0.0;
            for (int k = 0; k < kMfccDim; ++k) {
                const double d = means[i][static_cast<size_t>(k)] - means[j][static_cast<size_t>(k)];
                d2 += d * d;
            }
            CHECK(std::sqrt(d2) > 1.0);
        }
}
