#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dicelab/cluster.hpp"
#include "dicelab/corpus.hpp"
#include "dicelab/features.hpp"
#include "dicelab/model.hpp"
#include "dicelab/tensor.hpp"

// Binary artifact formats. All integers and floats are little-endian; every
// writer goes through a write-to-temp + atomic-rename path so a failed run
// never leaves a partial file behind.
namespace dicelab::io {

// FNV-1a over a whole file; used for artifact identity checks in manifests.
uint64_t digest_file(const std::filesystem::path& path);

// ---- checkpoints ("DICE") ----

// Optimizer/trainer state appended to a checkpoint so a run can resume
// bit-for-bit: step count, a digest guarding against config drift, and the
// Adam moment tensors keyed like the parameters they track.
struct TrainerState {
    bool present = false;
    int64_t step = 0;
    uint64_t config_digest = 0;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
};

struct Checkpoint {
    ModelConfig model;
    std::map<std::string, Tensor> params;
    TrainerState trainer;
};

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& model,
                     const std::map<std::string, Tensor>& params, const TrainerState* trainer = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Builds a ready-to-run Encoder from a checkpoint: architecture from the
// stored config, weights copied by registered name. Extra stored tensors
// (distillation projections, probe heads) are ignored; a missing or
// misshapen weight is a data error.
Encoder encoder_from_checkpoint(const Checkpoint& ckpt);

// ---- feature dumps ("DICF") ----

void save_feature_dump(const std::filesystem::path& path, const FeatureDump& dump);
FeatureDump load_feature_dump(const std::filesystem::path& path);

// ---- codebooks ("DICB") ----

void save_codebook(const std::filesystem::path& path, const Codebook& cb);
Codebook load_codebook(const std::filesystem::path& path);

// ---- label files ("DICL" hard / "DICS" soft) ----

struct HardLabelFile {
    std::vector<uint32_t> ids;
    std::vector<std::vector<uint16_t>> labels;
};

struct SoftLabelFile {
    int k = 0;
    std::vector<uint32_t> ids;
    std::vector<Tensor> probs;  // [T x K] rows, rounded to f32 on disk
};

void save_hard_labels(const std::filesystem::path& path, const HardLabelFile& f);
HardLabelFile load_hard_labels(const std::filesystem::path& path);
void save_soft_labels(const std::filesystem::path& path, const SoftLabelFile& f);
SoftLabelFile load_soft_labels(const std::filesystem::path& path);

// ---- corpus manifest (JSON) + waveform store (raw f32 records) ----

struct CorpusManifest {
    CorpusConfig cfg;
    struct Entry {
        uint32_t id = 0;
        int speaker = 0;
        uint64_t seed = 0;      // utterance seed; replays plan and truth
        uint64_t offset = 0;    // byte offset into the waveform store
        uint32_t samples = 0;
        uint32_t frames = 0;
    };
    std::vector<Entry> utts;
    std::filesystem::path dir;  // directory holding manifest.json + waves.f32

    std::filesystem::path wave_path() const { return dir / "waves.f32"; }
    std::filesystem::path manifest_path() const { return dir / "manifest.json"; }
};

// Synthesizes every utterance, writes waves.f32 and manifest.json under
// out_dir, and returns the manifest.
CorpusManifest generate_corpus(const CorpusConfig& cfg, const std::filesystem::path& out_dir);
CorpusManifest load_corpus_manifest(const std::filesystem::path& manifest_path);

std::vector<float> load_waveform(const CorpusManifest& m, size_t utt_index);
// one vector per manifest entry, in manifest order
std::vector<std::vector<float>> load_all_waveforms(const CorpusManifest& m);

}  // namespace dicelab::io
