#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <dicelab/cluster.hpp>
#include <dicelab/errors.hpp>
#include <dicelab/io.hpp>
#include <dicelab/mfcc.hpp>
#include <dicelab/model.hpp>
#include <dicelab/rng.hpp>
#include <filesystem>
#include <fstream>
#include <random>

using namespace dicelab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        uint64_t tag = (static_cast<uint64_t>(rd()) << 32) ^ rd();
        path = fs::temp_directory_path() / ("dicelab_io_test_" + std::to_string(tag));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Tensor random_tensor(std::vector<int> shape, uint64_t seed) {
    Rng rng(seed);
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
}

bool same_bytes(const Tensor& a, const Tensor& b) {
    return a.same_shape(b) &&
           std::memcmp(a.data(), b.data(), static_cast<size_t>(a.numel()) * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("checkpoint round-trip preserves config, weights, and trainer state") {
    TempDir dir;
    ModelConfig cfg = ModelConfig::toy_base(16);
    cfg = narrow_variant(cfg, 2);
    Encoder enc(cfg);
    enc.init_params(99);

    const fs::path path = dir.path / "model.ckpt";
    SUBCASE("weights only") {
        io::save_checkpoint(path, cfg, enc.params());
        io::Checkpoint loaded = io::load_checkpoint(path);
        CHECK(loaded.model.same_arch(cfg));
        CHECK_FALSE(loaded.trainer.present);
        REQUIRE(loaded.params.size() == enc.params().size());
        for (const auto& [name, t] : enc.params()) {
            REQUIRE(loaded.params.count(name) == 1);
            CHECK(same_bytes(loaded.params.at(name), t));
        }
        CHECK_FALSE(fs::exists(dir.path / "model.ckpt.tmp"));
    }
    SUBCASE("with optimizer state") {
        io::TrainerState state;
        state.present = true;
        state.step = 1234;
        state.config_digest = 0xdeadbeefcafef00dull;
        for (const auto& [name, t] : enc.params()) {
            state.m[name] = random_tensor(t.shape(), fnv1a64(name));
            state.v[name] = random_tensor(t.shape(), fnv1a64(name) + 1);
        }
        io::save_checkpoint(path, cfg, enc.params(), &state);
        io::Checkpoint loaded = io::load_checkpoint(path);
        REQUIRE(loaded.trainer.present);
        CHECK(loaded.trainer.step == 1234);
        CHECK(loaded.trainer.config_digest == 0xdeadbeefcafef00dull);
        for (const auto& [name, t] : state.m) CHECK(same_bytes(loaded.trainer.m.at(name), t));
        for (const auto& [name, t] : state.v) CHECK(same_bytes(loaded.trainer.v.at(name), t));
    }
}

TEST_CASE("corrupted artifacts are rejected as data errors") {
    TempDir dir;
    const fs::path path = dir.path / "bad.ckpt";
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE this is not a checkpoint";
    }
    CHECK_THROWS_AS(io::load_checkpoint(path), DataError);

    ModelConfig cfg;
    cfg.conv_channels = {4, 4, 4, 4, 4};
    Encoder enc(cfg);
    enc.init_params(1);
    const fs::path good = dir.path / "good.ckpt";
    io::save_checkpoint(good, cfg, enc.params());
    // truncate the tail and expect a hard failure
    const auto full = fs::file_size(good);
    fs::resize_file(good, full / 2);
    CHECK_THROWS_AS(io::load_checkpoint(good), DataError);

    CHECK_THROWS_AS(io::load_checkpoint(dir.path / "missing.ckpt"), DataError);
}

TEST_CASE("feature dump round-trip") {
    TempDir dir;
    FeatureDump dump;
    dump.dim = 13;
    dump.ids = {0, 1, 7};
    dump.feats.push_back(random_tensor({5, 13}, 3));
    dump.feats.push_back(random_tensor({9, 13}, 4));
    dump.feats.push_back(random_tensor({1, 13}, 5));

    const fs::path path = dir.path / "feats.bin";
    io::save_feature_dump(path, dump);
    FeatureDump loaded = io::load_feature_dump(path);
    CHECK(loaded.dim == 13);
    CHECK(loaded.ids == dump.ids);
    REQUIRE(loaded.feats.size() == 3);
    for (size_t i = 0; i < 3; ++i) CHECK(same_bytes(loaded.feats[i], dump.feats[i]));
    CHECK(loaded.total_frames() == 15);
}

TEST_CASE("codebook round-trip keeps centroid bytes and metadata") {
    TempDir dir;
    Codebook cb;
    cb.k = 8;
    cb.dim = 5;
    cb.centroids = random_tensor({8, 5}, 6);
    cb.inertia = 123.456789;
    cb.seed = 424242;

    const fs::path path = dir.path / "codebook.bin";
    io::save_codebook(path, cb);
    Codebook loaded = io::load_codebook(path);
    CHECK(loaded.k == 8);
    CHECK(loaded.dim == 5);
    CHECK(same_bytes(loaded.centroids, cb.centroids));
    CHECK(std::memcmp(&loaded.inertia, &cb.inertia, sizeof(double)) == 0);
    CHECK(loaded.seed == 424242);
}

TEST_CASE("hard and soft label round-trips") {
    TempDir dir;
    io::HardLabelFile hard;
    hard.ids = {0, 1};
    hard.labels = {{3, 1, 4, 1, 5}, {9, 2, 6}};
    const fs::path hp = dir.path / "labels.hard";
    io::save_hard_labels(hp, hard);
    io::HardLabelFile hl = io::load_hard_labels(hp);
    CHECK(hl.ids == hard.ids);
    CHECK(hl.labels == hard.labels);

    io::SoftLabelFile soft;
    soft.k = 4;
    soft.ids = {0, 1};
    soft.probs.push_back(random_tensor({5, 4}, 7));
    soft.probs.push_back(random_tensor({3, 4}, 8));
    const fs::path sp = dir.path / "labels.soft";
    io::save_soft_labels(sp, soft);
    io::SoftLabelFile sl = io::load_soft_labels(sp);
    CHECK(sl.k == 4);
    CHECK(sl.ids == soft.ids);
    REQUIRE(sl.probs.size() == 2);
    CHECK(same_bytes(sl.probs[0], soft.probs[0]));
    CHECK(same_bytes(sl.probs[1], soft.probs[1]));
}

TEST_CASE("corpus generation writes a manifest that replays exactly") {
    TempDir dir;
    CorpusConfig cfg;
    cfg.n_utts = 3;
    cfg.phonemes = 4;
    cfg.speakers = 2;
    cfg.seed = 77;
    cfg.min_frames = 50;
    cfg.max_frames = 60;

    io::CorpusManifest m = io::generate_corpus(cfg, dir.path / "corpus");
    CHECK(m.utts.size() == 3);
    CHECK(fs::exists(m.wave_path()));
    CHECK(fs::exists(m.manifest_path()));
    CHECK_FALSE(fs::exists(m.dir / "waves.f32.tmp"));

    io::CorpusManifest loaded = io::load_corpus_manifest(m.manifest_path());
    CHECK(loaded.cfg.n_utts == 3);
    CHECK(loaded.cfg.seed == 77);
    REQUIRE(loaded.utts.size() == 3);

    for (size_t u = 0; u < 3; ++u) {
        const auto& e = loaded.utts[u];
        CHECK(e.seed == utt_seed_of(cfg.seed, static_cast<int>(u)));
        // stored samples match a fresh synthesis from the recorded seed
        Utterance again = synth_utterance(e.seed, e.speaker, cfg);
        std::vector<float> stored = io::load_waveform(loaded, u);
        REQUIRE(stored.size() == again.samples.size());
        CHECK(std::memcmp(stored.data(), again.samples.data(), stored.size() * sizeof(float)) == 0);
        // truth labels replay from the plan without touching audio
        UttPlan plan = plan_utterance(e.seed, cfg);
        CHECK(plan_truth(plan) == again.frame_truth);
        CHECK(e.frames == again.frame_truth.size());
        CHECK(static_cast<size_t>(e.frames) == stored.size() / 320);
    }

    auto all = io::load_all_waveforms(loaded);
    REQUIRE(all.size() == 3);
    for (size_t u = 0; u < 3; ++u) {
        auto one = io::load_waveform(loaded, u);
        CHECK(all[u] == one);
    }

    // regenerating the same corpus produces byte-identical artifacts
    io::CorpusManifest m2 = io::generate_corpus(cfg, dir.path / "corpus2");
    CHECK(io::digest_file(m.wave_path()) == io::digest_file(m2.wave_path()));
    CHECK(io::digest_file(m.manifest_path()) == io::digest_file(m2.manifest_path()));
}

TEST_CASE("file digests react to any byte change") {
    TempDir dir;
    const fs::path p = dir.path / "blob.bin";
    {
        std::ofstream out(p, std::ios::binary);
        for (int i = 0; i < 1000; ++i) out.put(static_cast<char>(i % 251));
    }
    uint64_t d1 = io::digest_file(p);
    CHECK(io::digest_file(p) == d1);
    {
        std::fstream out(p, std::ios::binary | std::ios::in | std::ios::out);
        out.seekp(500);
        out.put('\x7f');
    }
    CHECK(io::digest_file(p) != d1);
}
