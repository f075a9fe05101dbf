#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dicelab/cluster.hpp"
#include "dicelab/io.hpp"
#include "dicelab/mfcc.hpp"
#include "dicelab/train.hpp"

using namespace dicelab;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        std::random_device rd;
        uint64_t tag = (static_cast<uint64_t>(rd()) << 32) ^ rd();
        path = std::filesystem::temp_directory_path() / ("dicelab_conv_" + std::to_string(tag));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

}  // namespace

// The end-to-end optimization contract: a 2-layer model trained for 2000
// steps on K=16 acoustic-cluster targets must beat the uniform-prediction
// baseline ln 16 by at least 10% in masked cross-entropy.
TEST_CASE("2000 steps on acoustic cluster targets beat the uniform baseline by 10%") {
    TempDir tmp;
    CorpusConfig cc;
    cc.n_utts = 50;
    cc.phonemes = 8;
    cc.speakers = 4;
    cc.seed = 611;
    cc.min_frames = 100;
    cc.max_frames = 100;
    io::CorpusManifest corpus = io::generate_corpus(cc, tmp.path / "corpus");

    // acoustic features -> k-means codebook -> per-frame hard targets
    FeatureDump dump;
    dump.dim = 39;
    const auto waves = io::load_all_waveforms(corpus);
    for (size_t i = 0; i < corpus.utts.size(); ++i) {
        dump.ids.push_back(corpus.utts[i].id);
        dump.feats.push_back(mfcc_features(waves[i]));
    }
    Codebook cb = kmeans_fit(dump, 16, 612);
    io::HardLabelFile labels;
    for (size_t i = 0; i < dump.feats.size(); ++i) {
        labels.ids.push_back(dump.ids[i]);
        labels.labels.push_back(assign_hard(cb, dump.feats[i]));
    }
    const auto label_path = tmp.path / "targets.lab";
    io::save_hard_labels(label_path, labels);

    ModelConfig mc;
    mc.L = 2;
    mc.D = 32;
    mc.H = 4;
    mc.F = 128;
    mc.K = 16;
    mc.conv_channels = {32, 32, 32, 32, 32};

    TrainConfig cfg;
    cfg.steps = 2000;
    cfg.batch_size = 4;
    cfg.max_frames_per_batch = 400;
    cfg.seed = 613;
    cfg.mode = LossMode::hard;
    cfg.hard_labels = label_path;
    cfg.out_dir = tmp.path / "run";
    cfg.log_every = 100;

    TrainResult res = train(cfg, corpus, mc);
    REQUIRE(res.records.size() == 2000);

    const double ln_k = std::log(16.0);
    CHECK(std::fabs(res.records.front().loss.total - ln_k) < 0.1);
    CHECK(res.records.back().loss.total < 0.9 * ln_k);
    CHECK(std::filesystem::exists(res.checkpoint_path));
}
