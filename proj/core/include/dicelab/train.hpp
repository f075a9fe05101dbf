#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dicelab/errors.hpp"
#include "dicelab/io.hpp"
#include "dicelab/losses.hpp"
#include "dicelab/model.hpp"

#include <json.hpp>

namespace dicelab {

// Which objective drives the update. `mixed` combines the masked-prediction
// loss with the feature-distillation loss at weight lambda.
enum class LossMode : uint8_t { hard = 0, soft = 1, feat = 2, mixed = 3 };

const char* loss_mode_name(LossMode m);
LossMode loss_mode_from_name(const std::string& name);

struct TrainConfig {
    int64_t steps = 2000;
    int batch_size = 4;
    int64_t max_frames_per_batch = 1600;

    double peak_lr = 5e-4;
    int64_t warmup_steps = -1;  // < 0: default to 8% of steps (at least 1)
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-6;
    double clip_norm = 1.0;  // 0 disables clipping

    uint64_t seed = 0;
    LossMode mode = LossMode::hard;
    double lambda = 0.0;  // mixed mode only; may be infinity (pure feature loss)

    std::filesystem::path hard_labels;         // hard mode (or the ssl side of mixed)
    std::filesystem::path soft_labels;         // soft mode (or the ssl side of mixed)
    std::filesystem::path teacher_checkpoint;  // feat and mixed modes

    std::filesystem::path out_dir;
    int64_t checkpoint_every = 1000;
    int64_t log_every = 10;

    // Run at most this many total steps in this invocation (0: to completion).
    // Excluded from the digest: it decides how far a run gets, not where the
    // trajectory goes, so a stopped run's checkpoint resumes cleanly.
    int64_t stop_after = 0;

    int64_t effective_warmup() const;
    int64_t effective_stop() const;
    void validate() const;

    // Digest over the trajectory-determining scalars (steps, batching, the
    // schedule, optimizer constants, seed, loss mode); guards resumes against
    // config drift. Paths are excluded: artifact identity is checked by
    // content, and moving a directory must not invalidate its checkpoints.
    uint64_t digest() const;
};

// Per-step diagnostics kept in memory for every step; the on-disk train.log
// only carries the logged subset.
struct StepRecord {
    int64_t step = 0;
    LossReport loss;
    double lr = 0.0;
    double grad_norm = 0.0;          // before clipping
    double grad_norm_clipped = 0.0;  // after clipping (== grad_norm when under the limit)
};

struct TrainResult {
    io::Checkpoint checkpoint;  // final state (weights + optimizer)
    std::filesystem::path checkpoint_path;
    std::vector<StepRecord> records;  // steps actually executed by this call
};

// Deterministic epoch-cycled batching: each epoch reshuffles utterance order
// from (seed, epoch), then packs batches greedily up to batch_size utterances
// and max_frames frames, dropping the incomplete remainder batch. Batches are
// consumed one per step; fast-forwarding replays the same sequence.
class Batcher {
public:
    Batcher(std::vector<int> frames_per_utt, uint64_t seed, int batch_size, int64_t max_frames);

    std::vector<int> next();  // utterance indices for the next step
    void skip(int64_t steps);

private:
    void build_epoch();

    std::vector<int> frames_;
    uint64_t seed_;
    int batch_size_;
    int64_t max_frames_;
    int64_t epoch_ = -1;
    size_t cursor_ = 0;
    std::vector<std::vector<int>> batches_;
};

// Runs the optimization loop from a fresh, seeded initialization.
TrainResult train(const TrainConfig& cfg, const io::CorpusManifest& corpus, const ModelConfig& model_cfg);

// Continues a checkpointed run until cfg.steps. The checkpoint must carry
// optimizer state and a matching config digest; resuming at step == steps is
// a no-op that returns the checkpoint unchanged.
TrainResult resume(const std::filesystem::path& checkpoint_path, const TrainConfig& cfg,
                   const io::CorpusManifest& corpus, const ModelConfig& model_cfg);

// ---- JSON mirrors (train --config files, experiment manifests) ----

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// A complete training job as read from a --config file: the train settings
// plus the model architecture and corpus it applies to, and an optional
// checkpoint to resume from.
struct TrainJob {
    TrainConfig train;
    ModelConfig model;
    std::filesystem::path corpus_manifest;
    std::filesystem::path resume_from;  // empty: fresh run
};

TrainJob train_job_from_file(const std::filesystem::path& path);

}  // namespace dicelab
