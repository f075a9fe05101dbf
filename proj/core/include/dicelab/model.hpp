#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dicelab/errors.hpp"
#include "dicelab/mfcc.hpp"
#include "dicelab/rng.hpp"
#include "dicelab/tape.hpp"
#include "dicelab/tensor.hpp"

namespace dicelab {

// How a config was derived from the base; variant constructors refuse to
// stack (narrow-of-shallow etc.) so each ablation isolates one factor.
enum class VariantKind : uint8_t { base = 0, narrow = 1, shallow = 2 };

struct ModelConfig {
    int L = 4;       // transformer layers
    int D = 64;      // model width
    int H = 4;       // attention heads
    int F = 256;     // feed-forward width
    std::vector<int> conv_channels = {32, 32, 32, 32, 32};
    int K = 16;      // output classes
    int mask_span = 10;
    double mask_start_prob = 0.08;
    VariantKind kind = VariantKind::base;

    void validate() const;
    bool same_arch(const ModelConfig& other) const;

    static ModelConfig toy_base(int k_clusters);
};

// Fixed frontend geometry: kernel == stride per layer, total stride 320.
inline const std::vector<int>& conv_strides() {
    static const std::vector<int> s = {5, 4, 4, 2, 2};
    return s;
}

ModelConfig narrow_variant(const ModelConfig& base, int ratio);
ModelConfig shallow_variant(const ModelConfig& base, int layers);

struct MaskSpec {
    std::vector<uint8_t> masked;            // per frame
    std::vector<std::pair<int, int>> spans; // (start, length)

    int frames() const { return static_cast<int>(masked.size()); }
    int masked_count() const {
        int n = 0;
        for (uint8_t m : masked) n += m;
        return n;
    }
    static MaskSpec clean(int T) {
        MaskSpec m;
        m.masked.assign(static_cast<size_t>(T), 0);
        return m;
    }
};

// Independent span starts at mask_start_prob per frame, each extending
// mask_span frames (clipped); one forced span if nothing got masked.
MaskSpec sample_mask(int T, const ModelConfig& cfg, uint64_t rng_seed);

// Masked-prediction encoder (strided conv frontend + transformer stack)
// over a parameter registry keyed by stable names.
// The forward pass is templated on the tape scalar so training runs float
// while gradient checking runs the identical graph in double.
class Encoder {
public:
    explicit Encoder(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }

    // deterministic per-name init: adding an unrelated parameter elsewhere
    // does not shift any other parameter's draw
    void init_params(uint64_t seed);

    std::map<std::string, Tensor>& params() { return params_; }
    const std::map<std::string, Tensor>& params() const { return params_; }
    Tensor& param(const std::string& name);
    const Tensor& param(const std::string& name) const;

    template <typename S>
    struct Forward {
        typename Tape<S>::Var logits;
        std::vector<typename Tape<S>::Var> feats;  // L+1: conv+mask embedding, then each block
    };

    template <typename S>
    Forward<S> forward(Tape<S>& tape, const std::map<std::string, typename Tape<S>::Var>& p,
                       const std::vector<float>& samples, const MaskSpec& mask) const;

    // places every parameter on the tape; train=true marks them differentiable
    template <typename S>
    std::map<std::string, typename Tape<S>::Var> place_params(Tape<S>& tape, bool train) const;

    // convenience: non-differentiable forward, returns all layer features
    std::vector<Tensor> layer_features(const std::vector<float>& samples, const MaskSpec& mask) const;
    Tensor logits_eval(const std::vector<float>& samples, const MaskSpec& mask) const;

private:
    ModelConfig cfg_;
    std::map<std::string, Tensor> params_;

    void register_params();
};

int conv_frame_count(int64_t num_samples);

// The shared init law: gains to 1, biases to 0, everything else a per-name
// seeded normal with fan-in scaling for rank-2 weights. Keyed by name so an
// unrelated extra parameter never shifts another parameter's draw.
void init_param_tensor(Tensor& t, const std::string& name, uint64_t seed);

// ---------------- template implementation ----------------

template <typename S>
std::map<std::string, typename Tape<S>::Var> Encoder::place_params(Tape<S>& tape, bool train) const {
    std::map<std::string, typename Tape<S>::Var> out;
    for (const auto& [name, value] : params_)
        out[name] = tape.leaf(value.template cast<S>(), train);
    return out;
}

template <typename S>
Encoder::Forward<S> Encoder::forward(Tape<S>& tape, const std::map<std::string, typename Tape<S>::Var>& p,
                                     const std::vector<float>& samples, const MaskSpec& mask) const {
    using Var = typename Tape<S>::Var;
    const int T = conv_frame_count(static_cast<int64_t>(samples.size()));
    if (T < 1) throw DataError("waveform shorter than one frame: " + std::to_string(samples.size()) + " samples");
    if (mask.frames() != T)
        throw DimensionError("mask length " + std::to_string(mask.frames()) + " does not match frame count " +
                             std::to_string(T));
    auto P = [&](const std::string& name) -> Var {
        auto it = p.find(name);
        if (it == p.end()) throw ConfigError("missing parameter on tape: " + name);
        return it->second;
    };

    // conv frontend: kernel==stride layers become reshape+matmul
    const auto& strides = conv_strides();
    int64_t n = static_cast<int64_t>(T) * kHopSamples;
    TensorT<S> wave({static_cast<int>(n), 1});
    for (int64_t i = 0; i < n; ++i) wave[i] = static_cast<S>(samples[static_cast<size_t>(i)]);
    Var x = tape.constant(std::move(wave));
    int width = 1;
    for (size_t li = 0; li < strides.size(); ++li) {
        const int stride = strides[li];
        const int rows = static_cast<int>(n / stride);
        x = tape.reshape(x, {rows, width * stride});
        x = tape.gelu(tape.add_rowvec(tape.matmul(x, P("conv" + std::to_string(li + 1) + ".w")),
                                      P("conv" + std::to_string(li + 1) + ".b")));
        n = rows;
        width = cfg_.conv_channels[li];
    }
    x = tape.layer_norm(x, P("conv_ln.g"), P("conv_ln.b"));
    x = tape.add_rowvec(tape.matmul(x, P("conv_proj.w")), P("conv_proj.b"));
    x = tape.replace_masked_rows(x, mask.masked, P("mask_embed"));

    Forward<S> out;
    out.feats.push_back(x);

    // sinusoidal positions on the embedding stream
    TensorT<S> pe({T, cfg_.D});
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < cfg_.D; ++j) {
            const double angle = t / std::pow(10000.0, 2.0 * (j / 2) / cfg_.D);
            pe.at(t, j) = static_cast<S>((j % 2 == 0) ? std::sin(angle) : std::cos(angle));
        }
    x = tape.add(x, tape.constant(std::move(pe)));

    const int dh = cfg_.D / cfg_.H;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int l = 0; l < cfg_.L; ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        // attention sublayer
        Var h = tape.layer_norm(x, P(pre + "ln1.g"), P(pre + "ln1.b"));
        Var q = tape.add_rowvec(tape.matmul(h, P(pre + "attn.wq")), P(pre + "attn.bq"));
        Var k = tape.matmul(h, P(pre + "attn.wk"));
        Var v = tape.add_rowvec(tape.matmul(h, P(pre + "attn.wv")), P(pre + "attn.bv"));
        std::vector<Var> heads;
        heads.reserve(static_cast<size_t>(cfg_.H));
        for (int hd = 0; hd < cfg_.H; ++hd) {
            Var qh = tape.slice_cols(q, hd * dh, dh);
            Var kh = tape.slice_cols(k, hd * dh, dh);
            Var vh = tape.slice_cols(v, hd * dh, dh);
            Var scores = tape.scale(tape.matmul_nt(qh, kh), att_scale);
            heads.push_back(tape.matmul(tape.softmax(scores), vh));
        }
        Var att = tape.concat_cols(heads);
        att = tape.add_rowvec(tape.matmul(att, P(pre + "attn.wo")), P(pre + "attn.bo"));
        x = tape.add(x, att);
        // feed-forward sublayer
        Var f = tape.layer_norm(x, P(pre + "ln2.g"), P(pre + "ln2.b"));
        f = tape.gelu(tape.add_rowvec(tape.matmul(f, P(pre + "ffn.w1")), P(pre + "ffn.b1")));
        f = tape.add_rowvec(tape.matmul(f, P(pre + "ffn.w2")), P(pre + "ffn.b2"));
        x = tape.add(x, f);
        out.feats.push_back(x);
    }

    out.logits = tape.add_rowvec(tape.matmul(x, P("head.w")), P("head.b"));
    return out;
}

}  // namespace dicelab
