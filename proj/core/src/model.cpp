#include "dicelab/model.hpp"

namespace dicelab {

void ModelConfig::validate() const {
    if (L < 0) throw ConfigError("negative layer count");
    if (D < 1 || H < 1 || F < 1) throw ConfigError("model dims must be positive");
    if (D % H != 0) throw ConfigError("width " + std::to_string(D) + " not divisible by " + std::to_string(H) + " heads");
    if (K < 2) throw ConfigError("need at least two output classes");
    if (conv_channels.size() != conv_strides().size())
        throw ConfigError("conv stack wants " + std::to_string(conv_strides().size()) + " channel counts");
    for (int c : conv_channels)
        if (c < 1) throw ConfigError("conv channel counts must be positive");
    if (mask_span < 1) throw ConfigError("mask span must be at least one frame");
    if (mask_start_prob < 0.0 || mask_start_prob > 1.0) throw ConfigError("mask start probability outside [0,1]");
}

bool ModelConfig::same_arch(const ModelConfig& o) const {
    return L == o.L && D == o.D && H == o.H && F == o.F && conv_channels == o.conv_channels && K == o.K &&
           mask_span == o.mask_span && mask_start_prob == o.mask_start_prob;
}

ModelConfig ModelConfig::toy_base(int k_clusters) {
    ModelConfig cfg;
    cfg.K = k_clusters;
    cfg.validate();
    return cfg;
}

ModelConfig narrow_variant(const ModelConfig& base, int ratio) {
    if (base.kind != VariantKind::base) throw ConfigError("variants only derive from the base config");
    if (ratio < 2) throw ConfigError("narrow ratio must be at least 2");
    if (base.D % ratio != 0 || base.F % ratio != 0)
        throw ConfigError("narrow ratio " + std::to_string(ratio) + " does not divide D=" + std::to_string(base.D) +
                          ", F=" + std::to_string(base.F));
    ModelConfig cfg = base;
    cfg.D = base.D / ratio;
    cfg.F = base.F / ratio;
    cfg.kind = VariantKind::narrow;
    cfg.validate();  // keeps D % H == 0 honest
    return cfg;
}

ModelConfig shallow_variant(const ModelConfig& base, int layers) {
    if (base.kind != VariantKind::base) throw ConfigError("variants only derive from the base config");
    if (layers < 1 || layers >= base.L)
        throw ConfigError("shallow variant wants 1 <= layers < " + std::to_string(base.L) + ", got " +
                          std::to_string(layers));
    ModelConfig cfg = base;
    cfg.L = layers;
    cfg.kind = VariantKind::shallow;
    cfg.validate();
    return cfg;
}

MaskSpec sample_mask(int T, const ModelConfig& cfg, uint64_t rng_seed) {
    if (T < 1) throw ConfigError("mask sampling needs at least one frame");
    Rng rng(rng_seed);
    MaskSpec spec;
    spec.masked.assign(static_cast<size_t>(T), 0);
    auto add_span = [&](int start) {
        const int len = std::min(cfg.mask_span, T - start);
        spec.spans.emplace_back(start, len);
        for (int t = start; t < start + len; ++t) spec.masked[static_cast<size_t>(t)] = 1;
    };
    for (int t = 0; t < T; ++t)
        if (rng.bernoulli(cfg.mask_start_prob)) add_span(t);
    if (spec.spans.empty()) add_span(static_cast<int>(rng.uniform_index(static_cast<uint64_t>(T))));
    return spec;
}

int conv_frame_count(int64_t num_samples) { return static_cast<int>(num_samples / (kHopSamples)); }

Encoder::Encoder(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    register_params();
}

void Encoder::register_params() {
    const auto& strides = conv_strides();
    int in_width = 1;
    for (size_t i = 0; i < strides.size(); ++i) {
        const int out_ch = cfg_.conv_channels[i];
        params_["conv" + std::to_string(i + 1) + ".w"] = Tensor({in_width * strides[i], out_ch});
        params_["conv" + std::to_string(i + 1) + ".b"] = Tensor({out_ch});
        in_width = out_ch;
    }
    params_["conv_ln.g"] = Tensor({in_width});
    params_["conv_ln.b"] = Tensor({in_width});
    params_["conv_proj.w"] = Tensor({in_width, cfg_.D});
    params_["conv_proj.b"] = Tensor({cfg_.D});
    params_["mask_embed"] = Tensor({cfg_.D});
    for (int l = 0; l < cfg_.L; ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        params_[pre + "ln1.g"] = Tensor({cfg_.D});
        params_[pre + "ln1.b"] = Tensor({cfg_.D});
        for (const char* nm : {"wq", "wk", "wv", "wo"}) params_[pre + "attn." + std::string(nm)] = Tensor({cfg_.D, cfg_.D});
        // no key bias: softmax scores are invariant to a per-query shift, so a
        // key bias would be a zero-gradient direction that only adds noise
        for (const char* nm : {"bq", "bv", "bo"}) params_[pre + "attn." + std::string(nm)] = Tensor({cfg_.D});
        params_[pre + "ln2.g"] = Tensor({cfg_.D});
        params_[pre + "ln2.b"] = Tensor({cfg_.D});
        params_[pre + "ffn.w1"] = Tensor({cfg_.D, cfg_.F});
        params_[pre + "ffn.b1"] = Tensor({cfg_.F});
        params_[pre + "ffn.w2"] = Tensor({cfg_.F, cfg_.D});
        params_[pre + "ffn.b2"] = Tensor({cfg_.D});
    }
    params_["head.w"] = Tensor({cfg_.D, cfg_.K});
    params_["head.b"] = Tensor({cfg_.K});
}

void init_param_tensor(Tensor& t, const std::string& name, uint64_t seed) {
    const bool is_bias = name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0;
    const bool is_gain = name.size() >= 2 && name.compare(name.size() - 2, 2, ".g") == 0;
    if (is_gain) {
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = 1.0f;
    } else if (is_bias) {
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = 0.0f;
    } else {
        // fan-in-scaled init keeps activations and curvature healthy
        // through the conv stack; the mask embedding is a learned token with
        // the customary small-normal init, and the class head starts small so
        // an untrained model predicts near-uniform distributions
        double stddev = 0.02;
        if (t.rank() == 2 && name != "head.w") {
            const bool feeds_gelu = name.rfind("conv", 0) == 0 || name.find("ffn.w1") != std::string::npos;
            stddev = std::sqrt((feeds_gelu ? 2.0 : 1.0) / t.dim(0));
        }
        Rng rng = Rng::from(seed, "init", fnv1a64(name));
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.normal(0.0, stddev));
    }
}

void Encoder::init_params(uint64_t seed) {
    for (auto& [name, t] : params_) init_param_tensor(t, name, seed);
}

Tensor& Encoder::param(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

const Tensor& Encoder::param(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

std::vector<Tensor> Encoder::layer_features(const std::vector<float>& samples, const MaskSpec& mask) const {
    Tape<float> tape;
    auto p = place_params<float>(tape, false);
    auto fwd = forward<float>(tape, p, samples, mask);
    std::vector<Tensor> out;
    out.reserve(fwd.feats.size());
    for (auto v : fwd.feats) out.push_back(tape.value(v));
    return out;
}

Tensor Encoder::logits_eval(const std::vector<float>& samples, const MaskSpec& mask) const {
    Tape<float> tape;
    auto p = place_params<float>(tape, false);
    return tape.value(forward<float>(tape, p, samples, mask).logits);
}

}  // namespace dicelab
