#include "dicelab/train.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>

#include "dicelab/rng.hpp"

namespace dicelab {

const char* loss_mode_name(LossMode m) {
    switch (m) {
        case LossMode::hard: return "hard";
        case LossMode::soft: return "soft";
        case LossMode::feat: return "feat";
        case LossMode::mixed: return "mixed";
    }
    throw ConfigError("unknown loss mode value");
}

LossMode loss_mode_from_name(const std::string& name) {
    if (name == "hard") return LossMode::hard;
    if (name == "soft") return LossMode::soft;
    if (name == "feat") return LossMode::feat;
    if (name == "mixed") return LossMode::mixed;
    throw ConfigError("unknown loss mode \"" + name + "\" (expected hard, soft, feat, or mixed)");
}

int64_t TrainConfig::effective_warmup() const {
    if (warmup_steps >= 0) return warmup_steps;
    return std::max<int64_t>(1, steps * 8 / 100);
}

int64_t TrainConfig::effective_stop() const {
    return stop_after > 0 ? std::min(stop_after, steps) : steps;
}

void TrainConfig::validate() const {
    if (steps < 1) throw ConfigError("steps must be at least 1");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (max_frames_per_batch < 1) throw ConfigError("frame cap must be at least 1");
    if (!(peak_lr >= 0.0) || !std::isfinite(peak_lr)) throw ConfigError("peak learning rate must be finite and >= 0");
    if (effective_warmup() > steps) throw ConfigError("warmup cannot exceed total steps");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("optimizer epsilon must be finite and positive");
    if (!(clip_norm >= 0.0) || !std::isfinite(clip_norm)) throw ConfigError("clip norm must be finite and >= 0");
    if (checkpoint_every < 1) throw ConfigError("checkpoint interval must be at least 1");
    if (log_every < 1) throw ConfigError("log interval must be at least 1");
    if (stop_after < 0) throw ConfigError("stop_after cannot be negative");
    if (out_dir.empty()) throw ConfigError("output directory not set");
    if (std::isnan(lambda) || lambda < 0.0) throw ConfigError("loss mixture weight must be >= 0");

    const bool has_hard = !hard_labels.empty();
    const bool has_soft = !soft_labels.empty();
    const bool has_teacher = !teacher_checkpoint.empty();
    switch (mode) {
        case LossMode::hard:
            if (!has_hard) throw ConfigError("hard loss mode needs a hard label file");
            if (has_soft || has_teacher) throw ConfigError("hard loss mode takes only hard labels");
            break;
        case LossMode::soft:
            if (!has_soft) throw ConfigError("soft loss mode needs a soft label file");
            if (has_hard || has_teacher) throw ConfigError("soft loss mode takes only soft labels");
            break;
        case LossMode::feat:
            if (!has_teacher) throw ConfigError("feature loss mode needs a teacher checkpoint");
            if (has_hard || has_soft) throw ConfigError("feature loss mode takes no label files");
            break;
        case LossMode::mixed:
            if (!has_teacher) throw ConfigError("mixed loss mode needs a teacher checkpoint");
            if (has_hard == has_soft)
                throw ConfigError("mixed loss mode needs exactly one of hard or soft labels");
            break;
    }
}

uint64_t TrainConfig::digest() const {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "v1;steps=%lld;batch=%d;cap=%lld;lr=%.17g;warmup=%lld;b1=%.17g;b2=%.17g;eps=%.17g;"
                  "clip=%.17g;seed=%llu;mode=%s;lambda=%.17g",
                  static_cast<long long>(steps), batch_size, static_cast<long long>(max_frames_per_batch), peak_lr,
                  static_cast<long long>(effective_warmup()), beta1, beta2, eps, clip_norm,
                  static_cast<unsigned long long>(seed), loss_mode_name(mode), lambda);
    return fnv1a64(buf);
}

// ---- batching ----

Batcher::Batcher(std::vector<int> frames_per_utt, uint64_t seed, int batch_size, int64_t max_frames)
    : frames_(std::move(frames_per_utt)), seed_(seed), batch_size_(batch_size), max_frames_(max_frames) {
    if (batch_size_ < 1) throw ConfigError("batch size must be at least 1");
    if (static_cast<int>(frames_.size()) < batch_size_)
        throw ConfigError("batch size " + std::to_string(batch_size_) + " exceeds the corpus size " +
                          std::to_string(frames_.size()));
}

void Batcher::build_epoch() {
    ++epoch_;
    batches_.clear();
    cursor_ = 0;
    std::vector<int> order(frames_.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::from(seed_, "shuffle", static_cast<uint64_t>(epoch_));
    rng.shuffle(order);
    std::vector<int> cur;
    int64_t cur_frames = 0;
    for (int u : order) {
        if (!cur.empty() &&
            (static_cast<int>(cur.size()) == batch_size_ || cur_frames + frames_[static_cast<size_t>(u)] > max_frames_)) {
            batches_.push_back(cur);
            cur.clear();
            cur_frames = 0;
        }
        cur.push_back(u);
        cur_frames += frames_[static_cast<size_t>(u)];
    }
    // the trailing partial batch is the epoch remainder and is dropped
    if (static_cast<int>(cur.size()) == batch_size_) batches_.push_back(cur);
}

std::vector<int> Batcher::next() {
    while (cursor_ >= batches_.size()) {
        build_epoch();
        if (batches_.empty()) throw ConfigError("corpus cannot form a single full batch under the frame cap");
    }
    return batches_[cursor_++];
}

void Batcher::skip(int64_t steps) {
    for (int64_t i = 0; i < steps; ++i) (void)next();
}

// ---- the loop ----

namespace {

uint64_t mask_seed_of(uint64_t seed, int64_t step, uint32_t utt_id) {
    uint64_t h = mix_seed(seed, "mask");
    h = mix_seed(h, static_cast<uint64_t>(step));
    return mix_seed(h, static_cast<uint64_t>(utt_id));
}

double lr_at(const TrainConfig& cfg, int64_t s) {
    const int64_t w = cfg.effective_warmup();
    if (s < w) return cfg.peak_lr * static_cast<double>(s + 1) / static_cast<double>(w);
    return cfg.peak_lr * static_cast<double>(cfg.steps - s) / static_cast<double>(cfg.steps - w);
}

struct Targets {
    bool use_hard = false;
    bool use_soft = false;
    bool use_feat = false;
    std::map<uint32_t, std::vector<uint16_t>> hard;
    std::map<uint32_t, Tensor> soft;
    std::optional<Encoder> teacher;
    ProjectionSet proj;
};

Targets load_targets(const TrainConfig& cfg, const io::CorpusManifest& corpus, const ModelConfig& model_cfg) {
    Targets t;
    t.use_feat = cfg.mode == LossMode::feat || cfg.mode == LossMode::mixed;
    if (cfg.mode != LossMode::feat) {
        t.use_hard = !cfg.hard_labels.empty();
        t.use_soft = !t.use_hard;
    }

    if (t.use_hard) {
        io::HardLabelFile f = io::load_hard_labels(cfg.hard_labels);
        for (size_t i = 0; i < f.ids.size(); ++i) t.hard[f.ids[i]] = std::move(f.labels[i]);
    }
    if (t.use_soft) {
        io::SoftLabelFile f = io::load_soft_labels(cfg.soft_labels);
        if (f.k != model_cfg.K)
            throw DimensionError("soft labels carry " + std::to_string(f.k) + " classes, model expects " +
                                 std::to_string(model_cfg.K));
        for (size_t i = 0; i < f.ids.size(); ++i) t.soft[f.ids[i]] = std::move(f.probs[i]);
    }

    for (const auto& e : corpus.utts) {
        if (t.use_hard) {
            auto it = t.hard.find(e.id);
            if (it == t.hard.end()) throw DataError("no hard labels for utterance " + std::to_string(e.id));
            if (it->second.size() != e.frames)
                throw DataError("utterance " + std::to_string(e.id) + " has " + std::to_string(e.frames) +
                                " frames but " + std::to_string(it->second.size()) + " labels");
            for (uint16_t z : it->second)
                if (z >= model_cfg.K)
                    throw DataError("utterance " + std::to_string(e.id) + " label " + std::to_string(z) +
                                    " out of range for K=" + std::to_string(model_cfg.K));
        }
        if (t.use_soft) {
            auto it = t.soft.find(e.id);
            if (it == t.soft.end()) throw DataError("no soft labels for utterance " + std::to_string(e.id));
            if (it->second.rows() != static_cast<int>(e.frames))
                throw DataError("utterance " + std::to_string(e.id) + " has " + std::to_string(e.frames) +
                                " frames but " + std::to_string(it->second.rows()) + " soft label rows");
        }
    }

    if (t.use_feat) {
        io::Checkpoint ck = io::load_checkpoint(cfg.teacher_checkpoint);
        t.teacher.emplace(io::encoder_from_checkpoint(ck));
        t.proj = ProjectionSet::uniform_all_layers(model_cfg.L, t.teacher->config().L);
        t.proj.validate();
    }
    return t;
}

void append_log_line(std::ofstream& log, const StepRecord& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%lld %.17g %.17g %.17g %d\n", static_cast<long long>(r.step), r.loss.total,
                  r.loss.ssl, r.loss.feat, r.loss.masked_frames);
    log << buf;
    log.flush();
}

TrainResult run_loop(const TrainConfig& cfg, const io::CorpusManifest& corpus, const ModelConfig& model_cfg,
                     const io::Checkpoint* start) {
    using Var = Tape<float>::Var;

    const int64_t start_step = start ? start->trainer.step : 0;
    const int64_t stop = cfg.effective_stop();
    const uint64_t digest = cfg.digest();

    Targets targets = load_targets(cfg, corpus, model_cfg);

    std::vector<int> frames;
    frames.reserve(corpus.utts.size());
    for (const auto& e : corpus.utts) frames.push_back(static_cast<int>(e.frames));
    const std::vector<std::vector<float>> waves = io::load_all_waveforms(corpus);

    Encoder student(model_cfg);
    std::map<std::string, Tensor> params;
    std::map<std::string, Tensor> m_state, v_state;
    if (start) {
        params = start->params;
        m_state = start->trainer.m;
        v_state = start->trainer.v;
        for (const auto& [name, value] : student.params()) {
            auto it = params.find(name);
            if (it == params.end()) throw DataError("checkpoint is missing parameter " + name);
            if (it->second.shape() != value.shape())
                throw DataError("checkpoint parameter " + name + " has shape " + it->second.shape_str() +
                                ", model expects " + value.shape_str());
        }
        if (targets.use_feat)
            for (size_t i = 0; i < targets.proj.student_layers.size(); ++i)
                if (!params.count(targets.proj.proj_param_name(i)))
                    throw DataError("checkpoint is missing distillation projection " + targets.proj.proj_param_name(i));
        for (const auto& [name, p] : params) {
            auto im = m_state.find(name);
            auto iv = v_state.find(name);
            if (im == m_state.end() || iv == v_state.end() || im->second.shape() != p.shape() ||
                iv->second.shape() != p.shape())
                throw DataError("checkpoint optimizer state does not cover parameter " + name);
        }
    } else {
        student.init_params(cfg.seed);
        params = student.params();
        if (targets.use_feat) {
            for (size_t i = 0; i < targets.proj.student_layers.size(); ++i) {
                const std::string name = targets.proj.proj_param_name(i);
                Tensor w({model_cfg.D, targets.teacher->config().D});
                init_param_tensor(w, name, cfg.seed);
                params[name] = std::move(w);
            }
        }
        for (const auto& [name, p] : params) {
            m_state[name] = Tensor(p.shape());
            v_state[name] = Tensor(p.shape());
        }
    }

    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream log(cfg.out_dir / "train.log",
                      start ? (std::ios::out | std::ios::app) : (std::ios::out | std::ios::trunc));
    if (!log) throw DataError("cannot open train log in " + cfg.out_dir.string());

    Batcher batcher(frames, cfg.seed, cfg.batch_size, cfg.max_frames_per_batch);
    batcher.skip(start_step);

    TrainResult res;
    auto trainer_state_at = [&](int64_t step) {
        io::TrainerState st;
        st.present = true;
        st.step = step;
        st.config_digest = digest;
        st.m = m_state;
        st.v = v_state;
        return st;
    };

    for (int64_t s = start_step; s < stop; ++s) {
        const std::vector<int> batch = batcher.next();
        const double lr = lr_at(cfg, s);

        Tape<float> tape;
        std::map<std::string, Var> pv;
        for (const auto& [name, p] : params) pv[name] = tape.leaf(p, true);

        Var ssl_acc, feat_acc;
        int masked_total = 0;
        for (int u : batch) {
            const auto& e = corpus.utts[static_cast<size_t>(u)];
            const MaskSpec mask = sample_mask(frames[static_cast<size_t>(u)], model_cfg,
                                              mask_seed_of(cfg.seed, s, e.id));
            masked_total += mask.masked_count();
            auto fwd = student.forward<float>(tape, pv, waves[static_cast<size_t>(u)], mask);

            if (targets.use_hard) {
                Var term = losses::ssl_hard(tape, fwd.logits, targets.hard.at(e.id), mask);
                ssl_acc = ssl_acc.valid() ? tape.add(ssl_acc, term) : term;
            } else if (targets.use_soft) {
                Var term = losses::ssl_soft(tape, fwd.logits, targets.soft.at(e.id), mask);
                ssl_acc = ssl_acc.valid() ? tape.add(ssl_acc, term) : term;
            }
            if (targets.use_feat) {
                const std::vector<Tensor> teacher_all = targets.teacher->layer_features(waves[static_cast<size_t>(u)], mask);
                std::vector<Var> sf, pj;
                std::vector<Tensor> tf;
                for (size_t i = 0; i < targets.proj.student_layers.size(); ++i) {
                    sf.push_back(fwd.feats[static_cast<size_t>(targets.proj.student_layers[i])]);
                    tf.push_back(teacher_all[static_cast<size_t>(targets.proj.teacher_layers[i])]);
                    pj.push_back(pv.at(targets.proj.proj_param_name(i)));
                }
                Var term = losses::feat_distill(tape, sf, tf, pj, targets.proj.alphas);
                feat_acc = feat_acc.valid() ? tape.add(feat_acc, term) : term;
            }
        }

        const double inv_b = 1.0 / static_cast<double>(batch.size());
        Var ssl_mean = ssl_acc.valid() ? tape.scale(ssl_acc, inv_b) : Var{};
        Var feat_mean = feat_acc.valid() ? tape.scale(feat_acc, inv_b) : Var{};
        Var total;
        switch (cfg.mode) {
            case LossMode::hard:
            case LossMode::soft: total = ssl_mean; break;
            case LossMode::feat: total = feat_mean; break;
            case LossMode::mixed: total = losses::mixed(tape, ssl_mean, feat_mean, cfg.lambda); break;
        }

        StepRecord rec;
        rec.step = s;
        rec.lr = lr;
        rec.loss.total = tape.value(total)[0];
        rec.loss.ssl = ssl_mean.valid() ? static_cast<double>(tape.value(ssl_mean)[0]) : 0.0;
        rec.loss.feat = feat_mean.valid() ? static_cast<double>(tape.value(feat_mean)[0]) : 0.0;
        rec.loss.masked_frames = masked_total;

        if (!std::isfinite(rec.loss.total)) {
            const auto diag = cfg.out_dir / "checkpoint-diagnostic.ckpt";
            io::TrainerState st = trainer_state_at(s);
            io::save_checkpoint(diag, model_cfg, params, &st);
            throw NumericError("non-finite training loss at step " + std::to_string(s) +
                               "; diagnostic checkpoint written to " + diag.string());
        }

        tape.backward(total);

        double sq = 0.0;
        for (const auto& [name, var] : pv) {
            const auto& g = tape.grad(var);
            for (int64_t i = 0; i < g.numel(); ++i) {
                const double x = g[i];
                sq += x * x;
            }
        }
        rec.grad_norm = std::sqrt(sq);
        double scale = 1.0;
        if (cfg.clip_norm > 0.0 && rec.grad_norm > cfg.clip_norm) scale = cfg.clip_norm / rec.grad_norm;

        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s + 1));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s + 1));
        double post_sq = 0.0;
        for (auto& [name, p] : params) {
            const auto& g = tape.grad(pv.at(name));
            Tensor& mm = m_state.at(name);
            Tensor& vv = v_state.at(name);
            for (int64_t i = 0; i < p.numel(); ++i) {
                const double gi = static_cast<double>(g[i]) * scale;
                post_sq += gi * gi;
                const double mi = cfg.beta1 * static_cast<double>(mm[i]) + (1.0 - cfg.beta1) * gi;
                const double vi = cfg.beta2 * static_cast<double>(vv[i]) + (1.0 - cfg.beta2) * gi * gi;
                mm[i] = static_cast<float>(mi);
                vv[i] = static_cast<float>(vi);
                const double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps);
                p[i] = static_cast<float>(static_cast<double>(p[i]) - update);
            }
        }
        rec.grad_norm_clipped = std::sqrt(post_sq);

        res.records.push_back(rec);
        if (s % cfg.log_every == 0 || s + 1 == stop) append_log_line(log, rec);

        if ((s + 1) % cfg.checkpoint_every == 0 && s + 1 != stop) {
            io::TrainerState st = trainer_state_at(s + 1);
            io::save_checkpoint(cfg.out_dir / ("checkpoint-" + std::to_string(s + 1) + ".ckpt"), model_cfg, params,
                                &st);
        }
    }

    io::TrainerState st = trainer_state_at(stop);
    const std::string final_name =
        stop == cfg.steps ? std::string("checkpoint-final.ckpt") : "checkpoint-" + std::to_string(stop) + ".ckpt";
    res.checkpoint_path = cfg.out_dir / final_name;
    io::save_checkpoint(res.checkpoint_path, model_cfg, params, &st);
    res.checkpoint.model = model_cfg;
    res.checkpoint.params = std::move(params);
    res.checkpoint.trainer = std::move(st);
    return res;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const io::CorpusManifest& corpus, const ModelConfig& model_cfg) {
    cfg.validate();
    model_cfg.validate();
    return run_loop(cfg, corpus, model_cfg, nullptr);
}

TrainResult resume(const std::filesystem::path& checkpoint_path, const TrainConfig& cfg,
                   const io::CorpusManifest& corpus, const ModelConfig& model_cfg) {
    cfg.validate();
    model_cfg.validate();
    io::Checkpoint ck = io::load_checkpoint(checkpoint_path);
    if (!ck.trainer.present)
        throw ConfigError("checkpoint " + checkpoint_path.string() + " carries no optimizer state to resume from");
    if (ck.trainer.config_digest != cfg.digest())
        throw ConfigError("train config does not match the checkpoint it resumes (digest mismatch)");
    if (!ck.model.same_arch(model_cfg))
        throw ConfigError("checkpoint architecture does not match the requested model");
    if (ck.trainer.step > cfg.steps)
        throw ConfigError("checkpoint is at step " + std::to_string(ck.trainer.step) + ", past the configured " +
                          std::to_string(cfg.steps));
    if (ck.trainer.step >= cfg.effective_stop()) {
        TrainResult res;
        res.checkpoint = std::move(ck);
        res.checkpoint_path = checkpoint_path;
        return res;
    }
    return run_loop(cfg, corpus, model_cfg, &ck);
}

// ---- JSON mirrors ----

namespace {

const char* variant_kind_name(VariantKind k) {
    switch (k) {
        case VariantKind::base: return "base";
        case VariantKind::narrow: return "narrow";
        case VariantKind::shallow: return "shallow";
    }
    throw ConfigError("unknown model variant kind");
}

VariantKind variant_kind_from_name(const std::string& name) {
    if (name == "base") return VariantKind::base;
    if (name == "narrow") return VariantKind::narrow;
    if (name == "shallow") return VariantKind::shallow;
    throw ConfigError("unknown model variant kind \"" + name + "\"");
}

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const char* what) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ConfigError(std::string(what) + " has unknown field \"" + key + "\"");
    }
}

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& c) {
    return nlohmann::json{{"L", c.L},
                          {"D", c.D},
                          {"H", c.H},
                          {"F", c.F},
                          {"K", c.K},
                          {"conv_channels", c.conv_channels},
                          {"mask_span", c.mask_span},
                          {"mask_start_prob", c.mask_start_prob},
                          {"kind", variant_kind_name(c.kind)}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    reject_unknown_keys(j, {"L", "D", "H", "F", "K", "conv_channels", "mask_span", "mask_start_prob", "kind"},
                        "model config");
    ModelConfig c;
    try {
        if (j.contains("L")) c.L = j.at("L").get<int>();
        if (j.contains("D")) c.D = j.at("D").get<int>();
        if (j.contains("H")) c.H = j.at("H").get<int>();
        if (j.contains("F")) c.F = j.at("F").get<int>();
        if (j.contains("K")) c.K = j.at("K").get<int>();
        if (j.contains("conv_channels")) c.conv_channels = j.at("conv_channels").get<std::vector<int>>();
        if (j.contains("mask_span")) c.mask_span = j.at("mask_span").get<int>();
        if (j.contains("mask_start_prob")) c.mask_start_prob = j.at("mask_start_prob").get<double>();
        if (j.contains("kind")) c.kind = variant_kind_from_name(j.at("kind").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad model config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
    nlohmann::json j{{"steps", c.steps},
                     {"batch_size", c.batch_size},
                     {"max_frames_per_batch", c.max_frames_per_batch},
                     {"peak_lr", c.peak_lr},
                     {"warmup_steps", c.warmup_steps},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"eps", c.eps},
                     {"clip_norm", c.clip_norm},
                     {"seed", c.seed},
                     {"mode", loss_mode_name(c.mode)},
                     {"hard_labels", c.hard_labels.string()},
                     {"soft_labels", c.soft_labels.string()},
                     {"teacher_checkpoint", c.teacher_checkpoint.string()},
                     {"out_dir", c.out_dir.string()},
                     {"checkpoint_every", c.checkpoint_every},
                     {"log_every", c.log_every},
                     {"stop_after", c.stop_after}};
    if (std::isinf(c.lambda))
        j["lambda"] = "inf";
    else
        j["lambda"] = c.lambda;
    return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    reject_unknown_keys(j,
                        {"steps", "batch_size", "max_frames_per_batch", "peak_lr", "warmup_steps", "beta1", "beta2",
                         "eps", "clip_norm", "seed", "mode", "lambda", "hard_labels", "soft_labels",
                         "teacher_checkpoint", "out_dir", "checkpoint_every", "log_every", "stop_after"},
                        "train config");
    TrainConfig c;
    try {
        if (j.contains("steps")) c.steps = j.at("steps").get<int64_t>();
        if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
        if (j.contains("max_frames_per_batch")) c.max_frames_per_batch = j.at("max_frames_per_batch").get<int64_t>();
        if (j.contains("peak_lr")) c.peak_lr = j.at("peak_lr").get<double>();
        if (j.contains("warmup_steps")) c.warmup_steps = j.at("warmup_steps").get<int64_t>();
        if (j.contains("beta1")) c.beta1 = j.at("beta1").get<double>();
        if (j.contains("beta2")) c.beta2 = j.at("beta2").get<double>();
        if (j.contains("eps")) c.eps = j.at("eps").get<double>();
        if (j.contains("clip_norm")) c.clip_norm = j.at("clip_norm").get<double>();
        if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
        if (j.contains("mode")) c.mode = loss_mode_from_name(j.at("mode").get<std::string>());
        if (j.contains("lambda")) {
            const auto& l = j.at("lambda");
            if (l.is_string()) {
                std::string s = l.get<std::string>();
                std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
                if (s != "inf" && s != "infinity") throw ConfigError("lambda must be a number or \"inf\"");
                c.lambda = std::numeric_limits<double>::infinity();
            } else {
                c.lambda = l.get<double>();
            }
        }
        if (j.contains("hard_labels")) c.hard_labels = j.at("hard_labels").get<std::string>();
        if (j.contains("soft_labels")) c.soft_labels = j.at("soft_labels").get<std::string>();
        if (j.contains("teacher_checkpoint")) c.teacher_checkpoint = j.at("teacher_checkpoint").get<std::string>();
        if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("checkpoint_every")) c.checkpoint_every = j.at("checkpoint_every").get<int64_t>();
        if (j.contains("log_every")) c.log_every = j.at("log_every").get<int64_t>();
        if (j.contains("stop_after")) c.stop_after = j.at("stop_after").get<int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad train config: ") + e.what());
    }
    return c;
}

TrainJob train_job_from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open train config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed train config " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw DataError("train config " + path.string() + " must hold a JSON object");

    TrainJob job;
    try {
        if (!j.contains("model")) throw ConfigError("train config needs a \"model\" section");
        job.model = model_config_from_json(j.at("model"));
        if (!j.contains("corpus")) throw ConfigError("train config needs a \"corpus\" manifest path");
        job.corpus_manifest = j.at("corpus").get<std::string>();
        if (j.contains("resume")) job.resume_from = j.at("resume").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad train config: ") + e.what());
    }
    nlohmann::json rest = j;
    rest.erase("model");
    rest.erase("corpus");
    rest.erase("resume");
    job.train = train_config_from_json(rest);
    return job;
}

}  // namespace dicelab
