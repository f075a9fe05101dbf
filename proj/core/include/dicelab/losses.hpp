#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dicelab/errors.hpp"
#include "dicelab/model.hpp"
#include "dicelab/tape.hpp"

namespace dicelab {

// Which student layers are distilled onto which teacher layers, and how each
// term is weighted. Layers are 1-based transformer outputs (0 would be the
// conv embedding).
struct ProjectionSet {
    std::vector<int> student_layers;
    std::vector<int> teacher_layers;
    std::vector<double> alphas;

    void validate() const {
        if (student_layers.size() != teacher_layers.size() || student_layers.size() != alphas.size())
            throw ConfigError("projection set: layer lists and weights must align 1:1");
        if (student_layers.empty()) throw ConfigError("projection set: no layers selected");
        double total = 0.0;
        for (double a : alphas) {
            if (a < 0.0) throw ConfigError("projection set: negative layer weight");
            total += a;
        }
        if (total == 0.0) throw ConfigError("projection set: all layer weights zero");
    }

    // uniform weights over all student transformer layers, each mapped onto
    // teacher layer l * (L_T / L_S) (uniform subsampling for shallow students)
    static ProjectionSet uniform_all_layers(int student_L, int teacher_L) {
        if (student_L < 1 || teacher_L < 1) throw ConfigError("projection set needs at least one layer on each side");
        ProjectionSet ps;
        for (int l = 1; l <= student_L; ++l) {
            ps.student_layers.push_back(l);
            ps.teacher_layers.push_back(l * teacher_L / student_L);
            ps.alphas.push_back(1.0 / student_L);
        }
        return ps;
    }

    std::string proj_param_name(size_t i) const {
        return "feat_proj.l" + std::to_string(student_layers[i]) + ".w";
    }
};

struct LossReport {
    double total = 0.0;
    double ssl = 0.0;
    double feat = 0.0;
    int masked_frames = 0;
};

namespace losses {

// Masked cross-entropy on hard targets, mean over masked frames.
template <typename S>
typename Tape<S>::Var ssl_hard(Tape<S>& tape, typename Tape<S>::Var logits,
                               const std::vector<uint16_t>& labels, const MaskSpec& mask) {
    const auto& L = tape.value(logits);
    if (L.rank() != 2) throw DimensionError("logits must be [T x K]");
    const int T = L.dim(0), K = L.dim(1);
    if (static_cast<int>(labels.size()) != T)
        throw DimensionError("label count " + std::to_string(labels.size()) + " != frames " + std::to_string(T));
    if (mask.frames() != T) throw DimensionError("mask length does not match logits");
    std::vector<int> idx(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= K) throw DataError("target class " + std::to_string(labels[i]) + " out of range");
        idx[i] = labels[i];
    }
    auto lp = tape.log_softmax(logits);
    auto picked = tape.gather_cols(lp, idx);
    return tape.scale(tape.mean_all(tape.select_masked(picked, mask.masked)), -1.0);
}

// Masked KL(teacher || student softmax); the teacher-entropy constant is
// included so a matching student scores exactly zero.
template <typename S>
typename Tape<S>::Var ssl_soft(Tape<S>& tape, typename Tape<S>::Var logits, const Tensor& soft,
                               const MaskSpec& mask) {
    const auto& L = tape.value(logits);
    if (L.rank() != 2) throw DimensionError("logits must be [T x K]");
    const int T = L.dim(0), K = L.dim(1);
    if (soft.rank() != 2 || soft.rows() != T || soft.cols() != K)
        throw DimensionError("soft labels " + soft.shape_str() + " do not match logits " + L.shape_str());
    if (mask.frames() != T) throw DimensionError("mask length does not match logits");
    for (int t = 0; t < T; ++t) {
        double row = 0.0;
        for (int j = 0; j < K; ++j) row += static_cast<double>(soft.at(t, j));
        if (std::fabs(row - 1.0) > 1e-4)
            throw DataError("soft label row " + std::to_string(t) + " sums to " + std::to_string(row));
    }
    // mean teacher entropy over masked frames (constant in the parameters)
    double ent = 0.0;
    int m_count = 0;
    for (int t = 0; t < T; ++t) {
        if (!mask.masked[static_cast<size_t>(t)]) continue;
        ++m_count;
        for (int j = 0; j < K; ++j) {
            const double p = soft.at(t, j);
            if (p > 0.0) ent += p * std::log(p);
        }
    }
    if (m_count == 0) throw ConfigError("soft loss over an empty mask");
    ent /= m_count;

    auto lp = tape.log_softmax(logits);
    auto ce_rows = tape.row_sum(tape.mul(tape.constant(soft.cast<S>()), lp));
    auto ce = tape.scale(tape.mean_all(tape.select_masked(ce_rows, mask.masked)), -1.0);
    return tape.add(ce, tape.constant(TensorT<S>::scalar(static_cast<S>(ent))));
}

// Sum_l alpha_l * MSE(teacher_l, student_l W_l); teacher features enter as
// constants (frozen teacher), W_l as tape leaves so they can train.
template <typename S>
typename Tape<S>::Var feat_distill(Tape<S>& tape, const std::vector<typename Tape<S>::Var>& student_feats,
                                   const std::vector<Tensor>& teacher_feats,
                                   const std::vector<typename Tape<S>::Var>& projections,
                                   const std::vector<double>& alphas) {
    if (student_feats.size() != teacher_feats.size() || student_feats.size() != projections.size() ||
        student_feats.size() != alphas.size())
        throw ConfigError("feature distillation: layer lists, projections and weights must align 1:1");
    if (student_feats.empty()) throw ConfigError("feature distillation: no layers");
    typename Tape<S>::Var total;
    for (size_t l = 0; l < student_feats.size(); ++l) {
        auto projected = tape.matmul(student_feats[l], projections[l]);
        const auto& tf = teacher_feats[l];
        const auto& pv = tape.value(projected);
        if (pv.dim(0) != tf.rows() || pv.dim(1) != tf.cols())
            throw DimensionError("projected student features " + pv.shape_str() + " vs teacher " + tf.shape_str());
        auto diff = tape.sub(projected, tape.constant(tf.cast<S>()));
        auto term = tape.scale(tape.mean_all(tape.mul(diff, diff)), alphas[l]);
        total = total.valid() ? tape.add(total, term) : term;
    }
    return total;
}

// ssl + lambda * feat; an infinite lambda selects the pure feature loss.
template <typename S>
typename Tape<S>::Var mixed(Tape<S>& tape, typename Tape<S>::Var ssl, typename Tape<S>::Var feat, double lambda) {
    if (lambda < 0.0) throw ConfigError("negative loss mixture weight");
    if (std::isinf(lambda)) return feat;
    if (lambda == 0.0) return ssl;
    return tape.add(ssl, tape.scale(feat, lambda));
}

}  // namespace losses
}  // namespace dicelab
