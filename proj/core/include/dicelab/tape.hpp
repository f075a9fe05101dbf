#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "dicelab/errors.hpp"
#include "dicelab/tensor.hpp"

namespace dicelab {

// Reverse-mode tape over a closed set of primitives. One tape records one
// forward pass (or several, when a batch sums per-utterance losses) and is
// consumed by a single backward() call. Tapes are single-owner and never
// shared across threads; the ops themselves are pure.
template <typename S>
class Tape {
public:
    struct Var {
        int id = -1;
        bool valid() const { return id >= 0; }
    };

    Var leaf(TensorT<S> value, bool needs_grad = false) {
        return push(std::move(value), needs_grad, {});
    }

    Var constant(TensorT<S> value) { return leaf(std::move(value), false); }

    const TensorT<S>& value(Var v) const { return nodes_[check(v)].value; }
    const TensorT<S>& grad(Var v) const { return nodes_[check(v)].grad; }
    S scalar_value(Var v) const {
        const auto& t = value(v);
        if (t.numel() != 1) throw DimensionError("expected scalar, got " + t.shape_str());
        return t[0];
    }

    // ---- primitives ----

    Var matmul(Var a, Var b) {
        const auto &A = value(a), &B = value(b);
        require_rank(A, 2, "matmul lhs");
        require_rank(B, 2, "matmul rhs");
        if (A.dim(1) != B.dim(0))
            throw DimensionError("matmul inner dims disagree: " + A.shape_str() + " x " + B.shape_str());
        TensorT<S> out({A.dim(0), B.dim(1)});
        matmul_into(A, B, out);
        return push(std::move(out), needs(a) || needs(b), [this, a, b](const Node& n) {
            if (needs(a)) {
                TensorT<S> da({val(a).dim(0), val(a).dim(1)});
                matmul_nt_into(n.grad, val(b), da);
                accumulate(a, da);
            }
            if (needs(b)) {
                TensorT<S> db({val(b).dim(0), val(b).dim(1)});
                matmul_tn_into(val(a), n.grad, db);
                accumulate(b, db);
            }
        });
    }

    // a[m x k] * transpose(b[n x k]) -> [m x n]
    Var matmul_nt(Var a, Var b) {
        const auto &A = value(a), &B = value(b);
        require_rank(A, 2, "matmul_nt lhs");
        require_rank(B, 2, "matmul_nt rhs");
        if (A.dim(1) != B.dim(1))
            throw DimensionError("matmul_nt inner dims disagree: " + A.shape_str() + " x " + B.shape_str());
        TensorT<S> out({A.dim(0), B.dim(0)});
        matmul_nt_into(A, B, out);
        return push(std::move(out), needs(a) || needs(b), [this, a, b](const Node& n) {
            if (needs(a)) {
                TensorT<S> da({val(a).dim(0), val(a).dim(1)});
                matmul_into(n.grad, val(b), da);
                accumulate(a, da);
            }
            if (needs(b)) {
                TensorT<S> db({val(b).dim(0), val(b).dim(1)});
                matmul_tn_into(n.grad, val(a), db);
                accumulate(b, db);
            }
        });
    }

    Var add(Var a, Var b) {
        const auto &A = value(a), &B = value(b);
        require_same_shape(A, B, "add");
        TensorT<S> out(A.shape());
        for (int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] + B[i];
        return push(std::move(out), needs(a) || needs(b), [this, a, b](const Node& n) {
            if (needs(a)) accumulate(a, n.grad);
            if (needs(b)) accumulate(b, n.grad);
        });
    }

    Var sub(Var a, Var b) {
        const auto &A = value(a), &B = value(b);
        require_same_shape(A, B, "sub");
        TensorT<S> out(A.shape());
        for (int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] - B[i];
        return push(std::move(out), needs(a) || needs(b), [this, a, b](const Node& n) {
            if (needs(a)) accumulate(a, n.grad);
            if (needs(b)) {
                auto& g = grad_ref(b);
                for (int64_t i = 0; i < n.grad.numel(); ++i) g[i] -= n.grad[i];
            }
        });
    }

    Var mul(Var a, Var b) {
        const auto &A = value(a), &B = value(b);
        require_same_shape(A, B, "mul");
        TensorT<S> out(A.shape());
        for (int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] * B[i];
        return push(std::move(out), needs(a) || needs(b), [this, a, b](const Node& n) {
            if (needs(a)) {
                auto& g = grad_ref(a);
                const auto& B2 = val(b);
                for (int64_t i = 0; i < n.grad.numel(); ++i) g[i] += n.grad[i] * B2[i];
            }
            if (needs(b)) {
                auto& g = grad_ref(b);
                const auto& A2 = val(a);
                for (int64_t i = 0; i < n.grad.numel(); ++i) g[i] += n.grad[i] * A2[i];
            }
        });
    }

    // x[T x N] + v[N] broadcast over rows
    Var add_rowvec(Var x, Var v) {
        const auto &X = value(x), &V = value(v);
        require_rank(X, 2, "add_rowvec input");
        if (V.numel() != X.dim(1))
            throw DimensionError("add_rowvec width mismatch: " + X.shape_str() + " + " + V.shape_str());
        TensorT<S> out(X.shape());
        const int T = X.dim(0), N = X.dim(1);
        for (int t = 0; t < T; ++t)
            for (int j = 0; j < N; ++j) out.at(t, j) = X.at(t, j) + V[j];
        return push(std::move(out), needs(x) || needs(v), [this, x, v](const Node& n) {
            const int T = n.grad.dim(0), N = n.grad.dim(1);
            if (needs(x)) accumulate(x, n.grad);
            if (needs(v)) {
                auto& g = grad_ref(v);
                for (int j = 0; j < N; ++j) {
                    double s = 0.0;
                    for (int t = 0; t < T; ++t) s += static_cast<double>(n.grad.at(t, j));
                    g[j] += static_cast<S>(s);
                }
            }
        });
    }

    Var scale(Var x, double c) {
        const auto& X = value(x);
        TensorT<S> out(X.shape());
        for (int64_t i = 0; i < X.numel(); ++i) out[i] = static_cast<S>(c * X[i]);
        return push(std::move(out), needs(x), [this, x, c](const Node& n) {
            auto& g = grad_ref(x);
            for (int64_t i = 0; i < n.grad.numel(); ++i) g[i] += static_cast<S>(c * n.grad[i]);
        });
    }

    Var neg(Var x) { return scale(x, -1.0); }

    // scalar Var times tensor Var
    Var smul(Var s, Var x) {
        if (value(s).numel() != 1) throw DimensionError("smul scalar operand must have one element");
        const auto& X = value(x);
        const S sv = value(s)[0];
        TensorT<S> out(X.shape());
        for (int64_t i = 0; i < X.numel(); ++i) out[i] = sv * X[i];
        return push(std::move(out), needs(s) || needs(x), [this, s, x](const Node& n) {
            if (needs(s)) {
                const auto& X2 = val(x);
                double acc = 0.0;
                for (int64_t i = 0; i < n.grad.numel(); ++i)
                    acc += static_cast<double>(n.grad[i]) * static_cast<double>(X2[i]);
                grad_ref(s)[0] += static_cast<S>(acc);
            }
            if (needs(x)) {
                auto& g = grad_ref(x);
                const S sv2 = val(s)[0];
                for (int64_t i = 0; i < n.grad.numel(); ++i) g[i] += sv2 * n.grad[i];
            }
        });
    }

    // Row-wise normalization with affine output; eps 1e-5, stats in double.
    Var layer_norm(Var x, Var gain, Var bias) {
        const auto &X = value(x), &G = value(gain), &B = value(bias);
        require_rank(X, 2, "layer_norm input");
        const int T = X.dim(0), D = X.dim(1);
        if (G.numel() != D || B.numel() != D)
            throw DimensionError("layer_norm affine params must match width " + std::to_string(D));
        TensorT<S> out({T, D});
        for (int t = 0; t < T; ++t) {
            double mean = 0.0, var = 0.0;
            const S* row = X.data() + static_cast<size_t>(t) * D;
            for (int j = 0; j < D; ++j) mean += static_cast<double>(row[j]);
            mean /= D;
            for (int j = 0; j < D; ++j) {
                double d = static_cast<double>(row[j]) - mean;
                var += d * d;
            }
            var /= D;
            const double inv = 1.0 / std::sqrt(var + kLnEps);
            for (int j = 0; j < D; ++j) {
                double xn = (static_cast<double>(row[j]) - mean) * inv;
                out.at(t, j) = static_cast<S>(xn * static_cast<double>(G[j]) + static_cast<double>(B[j]));
            }
        }
        return push(std::move(out), needs(x) || needs(gain) || needs(bias),
                    [this, x, gain, bias](const Node& n) { layer_norm_backward(n, x, gain, bias); });
    }

    Var softmax(Var x) { return softmax_impl(x, false); }
    Var log_softmax(Var x) { return softmax_impl(x, true); }

    Var gelu(Var x) {
        const auto& X = value(x);
        TensorT<S> out(X.shape());
        for (int64_t i = 0; i < X.numel(); ++i) out[i] = static_cast<S>(gelu_fwd(static_cast<double>(X[i])));
        return push(std::move(out), needs(x), [this, x](const Node& n) {
            auto& g = grad_ref(x);
            const auto& X2 = val(x);
            for (int64_t i = 0; i < n.grad.numel(); ++i)
                g[i] += static_cast<S>(static_cast<double>(n.grad[i]) * gelu_bwd(static_cast<double>(X2[i])));
        });
    }

    Var reshape(Var x, std::vector<int> new_shape) {
        const auto& X = value(x);
        if (TensorT<S>::numel_of(new_shape) != X.numel())
            throw DimensionError("reshape changes element count");
        TensorT<S> out(std::move(new_shape), X.vec());
        return push(std::move(out), needs(x), [this, x](const Node& n) {
            auto& g = grad_ref(x);
            for (int64_t i = 0; i < n.grad.numel(); ++i) g[i] += n.grad[i];
        });
    }

    Var slice_rows(Var x, int start, int len) {
        const auto& X = value(x);
        require_rank(X, 2, "slice_rows input");
        if (start < 0 || len < 0 || start + len > X.dim(0)) throw DimensionError("slice_rows out of range");
        const int N = X.dim(1);
        TensorT<S> out({len, N});
        std::copy(X.data() + static_cast<size_t>(start) * N, X.data() + static_cast<size_t>(start + len) * N,
                  out.data());
        return push(std::move(out), needs(x), [this, x, start](const Node& n) {
            auto& g = grad_ref(x);
            const int N = n.grad.dim(1);
            for (int t = 0; t < n.grad.dim(0); ++t)
                for (int j = 0; j < N; ++j) g[static_cast<int64_t>(start + t) * N + j] += n.grad.at(t, j);
        });
    }

    Var slice_cols(Var x, int start, int len) {
        const auto& X = value(x);
        require_rank(X, 2, "slice_cols input");
        if (start < 0 || len < 0 || start + len > X.dim(1)) throw DimensionError("slice_cols out of range");
        const int T = X.dim(0), N = X.dim(1);
        TensorT<S> out({T, len});
        for (int t = 0; t < T; ++t)
            for (int j = 0; j < len; ++j) out.at(t, j) = X[static_cast<int64_t>(t) * N + start + j];
        return push(std::move(out), needs(x), [this, x, start](const Node& n) {
            auto& g = grad_ref(x);
            const int N = val(x).dim(1);
            for (int t = 0; t < n.grad.dim(0); ++t)
                for (int j = 0; j < n.grad.dim(1); ++j)
                    g[static_cast<int64_t>(t) * N + start + j] += n.grad.at(t, j);
        });
    }

    Var concat_cols(const std::vector<Var>& parts) {
        if (parts.empty()) throw DimensionError("concat_cols of nothing");
        const int T = value(parts[0]).dim(0);
        int total = 0;
        bool ng = false;
        for (Var p : parts) {
            const auto& P = value(p);
            require_rank(P, 2, "concat_cols part");
            if (P.dim(0) != T) throw DimensionError("concat_cols row counts differ");
            total += P.dim(1);
            ng = ng || needs(p);
        }
        TensorT<S> out({T, total});
        int off = 0;
        for (Var p : parts) {
            const auto& P = value(p);
            for (int t = 0; t < T; ++t)
                for (int j = 0; j < P.dim(1); ++j) out.at(t, off + j) = P.at(t, j);
            off += P.dim(1);
        }
        auto parts_copy = parts;
        return push(std::move(out), ng, [this, parts_copy](const Node& n) {
            int off2 = 0;
            for (Var p : parts_copy) {
                const int w = val(p).dim(1);
                if (needs(p)) {
                    auto& g = grad_ref(p);
                    for (int t = 0; t < n.grad.dim(0); ++t)
                        for (int j = 0; j < w; ++j)
                            g[static_cast<int64_t>(t) * w + j] += n.grad.at(t, off2 + j);
                }
                off2 += w;
            }
        });
    }

    // out[t] = x[t, idx[t]]
    Var gather_cols(Var x, const std::vector<int>& idx) {
        const auto& X = value(x);
        require_rank(X, 2, "gather_cols input");
        const int T = X.dim(0), K = X.dim(1);
        if (static_cast<int>(idx.size()) != T) throw DimensionError("gather_cols index length mismatch");
        TensorT<S> out({T});
        for (int t = 0; t < T; ++t) {
            if (idx[static_cast<size_t>(t)] < 0 || idx[static_cast<size_t>(t)] >= K)
                throw DimensionError("gather_cols index out of range");
            out[t] = X.at(t, idx[static_cast<size_t>(t)]);
        }
        return push(std::move(out), needs(x), [this, x, idx](const Node& n) {
            auto& g = grad_ref(x);
            const int K = val(x).dim(1);
            for (int t = 0; t < n.grad.dim(0); ++t)
                g[static_cast<int64_t>(t) * K + idx[static_cast<size_t>(t)]] += n.grad[t];
        });
    }

    // masked-select on a vector: keeps x[t] where mask[t]
    Var select_masked(Var x, const std::vector<uint8_t>& mask) {
        const auto& X = value(x);
        if (X.rank() != 1 || static_cast<int>(mask.size()) != X.dim(0))
            throw DimensionError("select_masked wants a vector and a same-length mask");
        std::vector<int> picked;
        for (int t = 0; t < X.dim(0); ++t)
            if (mask[static_cast<size_t>(t)]) picked.push_back(t);
        if (picked.empty()) throw ConfigError("select_masked: empty mask");
        TensorT<S> out({static_cast<int>(picked.size())});
        for (size_t i = 0; i < picked.size(); ++i) out[static_cast<int64_t>(i)] = X[picked[i]];
        return push(std::move(out), needs(x), [this, x, picked](const Node& n) {
            auto& g = grad_ref(x);
            for (size_t i = 0; i < picked.size(); ++i) g[picked[i]] += n.grad[static_cast<int64_t>(i)];
        });
    }

    // rows of x where mask[t] replaced by the embedding vector e
    Var replace_masked_rows(Var x, const std::vector<uint8_t>& mask, Var e) {
        const auto &X = value(x), &E = value(e);
        require_rank(X, 2, "replace_masked_rows input");
        const int T = X.dim(0), D = X.dim(1);
        if (static_cast<int>(mask.size()) != T) throw DimensionError("mask length != frame count");
        if (E.numel() != D) throw DimensionError("mask embedding width mismatch");
        TensorT<S> out(X.shape());
        for (int t = 0; t < T; ++t) {
            S* orow = out.data() + static_cast<size_t>(t) * D;
            if (mask[static_cast<size_t>(t)]) {
                for (int j = 0; j < D; ++j) orow[j] = E[j];
            } else {
                const S* xrow = X.data() + static_cast<size_t>(t) * D;
                std::copy(xrow, xrow + D, orow);
            }
        }
        return push(std::move(out), needs(x) || needs(e), [this, x, e, mask](const Node& n) {
            const int T = n.grad.dim(0), D = n.grad.dim(1);
            if (needs(x)) {
                auto& g = grad_ref(x);
                for (int t = 0; t < T; ++t)
                    if (!mask[static_cast<size_t>(t)])
                        for (int j = 0; j < D; ++j) g[static_cast<int64_t>(t) * D + j] += n.grad.at(t, j);
            }
            if (needs(e)) {
                auto& g = grad_ref(e);
                for (int j = 0; j < D; ++j) {
                    double s = 0.0;
                    for (int t = 0; t < T; ++t)
                        if (mask[static_cast<size_t>(t)]) s += static_cast<double>(n.grad.at(t, j));
                    g[j] += static_cast<S>(s);
                }
            }
        });
    }

    Var sum_all(Var x) {
        const auto& X = value(x);
        double s = 0.0;
        for (int64_t i = 0; i < X.numel(); ++i) s += static_cast<double>(X[i]);
        return push(TensorT<S>::scalar(static_cast<S>(s)), needs(x), [this, x](const Node& n) {
            auto& g = grad_ref(x);
            const S gv = n.grad[0];
            for (int64_t i = 0; i < val(x).numel(); ++i) g[i] += gv;
        });
    }

    Var mean_all(Var x) {
        const auto& X = value(x);
        if (X.numel() == 0) throw DimensionError("mean of empty tensor");
        double s = 0.0;
        for (int64_t i = 0; i < X.numel(); ++i) s += static_cast<double>(X[i]);
        const double inv = 1.0 / static_cast<double>(X.numel());
        return push(TensorT<S>::scalar(static_cast<S>(s * inv)), needs(x), [this, x, inv](const Node& n) {
            auto& g = grad_ref(x);
            const S gv = static_cast<S>(static_cast<double>(n.grad[0]) * inv);
            for (int64_t i = 0; i < val(x).numel(); ++i) g[i] += gv;
        });
    }

    Var row_sum(Var x) {
        const auto& X = value(x);
        require_rank(X, 2, "row_sum input");
        const int T = X.dim(0), K = X.dim(1);
        TensorT<S> out({T});
        for (int t = 0; t < T; ++t) {
            double s = 0.0;
            const S* row = X.data() + static_cast<size_t>(t) * K;
            for (int j = 0; j < K; ++j) s += static_cast<double>(row[j]);
            out[t] = static_cast<S>(s);
        }
        return push(std::move(out), needs(x), [this, x](const Node& n) {
            auto& g = grad_ref(x);
            const int K = val(x).dim(1);
            for (int t = 0; t < n.grad.dim(0); ++t) {
                const S gv = n.grad[t];
                for (int j = 0; j < K; ++j) g[static_cast<int64_t>(t) * K + j] += gv;
            }
        });
    }

    Var pick(Var x, int64_t flat_index) {
        const auto& X = value(x);
        if (flat_index < 0 || flat_index >= X.numel()) throw DimensionError("pick index out of range");
        return push(TensorT<S>::scalar(X[flat_index]), needs(x), [this, x, flat_index](const Node& n) {
            grad_ref(x)[flat_index] += n.grad[0];
        });
    }

    // ---- backward ----

    void backward(Var loss) {
        if (consumed_) throw ConfigError("tape already consumed by backward");
        consumed_ = true;
        if (value(loss).numel() != 1) throw DimensionError("backward expects a scalar loss");
        for (auto& n : nodes_) {
            if (n.needs_grad) {
                n.grad = TensorT<S>(n.value.shape());
                n.touched = false;
            }
        }
        auto& ln = nodes_[static_cast<size_t>(loss.id)];
        if (!ln.needs_grad) return;  // loss does not depend on any parameter
        ln.grad[0] = S(1);
        ln.touched = true;
        for (int i = loss.id; i >= 0; --i) {
            auto& n = nodes_[static_cast<size_t>(i)];
            if (n.back && n.needs_grad && n.touched) n.back(n);
        }
    }

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        TensorT<S> value;
        TensorT<S> grad;
        bool needs_grad = false;
        bool touched = false;
        std::function<void(const Node&)> back;
    };

    static constexpr double kLnEps = 1e-5;

    std::vector<Node> nodes_;
    bool consumed_ = false;

    int check(Var v) const {
        if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) throw ConfigError("invalid tape var");
        return v.id;
    }

    bool needs(Var v) const { return nodes_[static_cast<size_t>(v.id)].needs_grad; }
    const TensorT<S>& val(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }

    TensorT<S>& grad_ref(Var v) {
        auto& n = nodes_[static_cast<size_t>(v.id)];
        n.touched = true;
        return n.grad;
    }

    void accumulate(Var v, const TensorT<S>& g) {
        auto& dst = grad_ref(v);
        for (int64_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
    }

    Var push(TensorT<S> value, bool needs_grad, std::function<void(const Node&)> back) {
        Node n;
        n.value = std::move(value);
        n.needs_grad = needs_grad;
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    static void require_rank(const TensorT<S>& t, int r, const char* what) {
        if (t.rank() != r)
            throw DimensionError(std::string(what) + " must be rank " + std::to_string(r) + ", got " +
                                 t.shape_str());
    }

    static void require_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* what) {
        if (!a.same_shape(b))
            throw DimensionError(std::string(what) + " shape mismatch: " + a.shape_str() + " vs " +
                                 b.shape_str());
    }

    Var softmax_impl(Var x, bool log_form) {
        const auto& X = value(x);
        if (X.rank() < 1) throw DimensionError("softmax needs at least rank 1");
        const int K = X.dim(X.rank() - 1);
        const int64_t R = X.numel() / K;
        TensorT<S> out(X.shape());
        for (int64_t r = 0; r < R; ++r) {
            const S* row = X.data() + r * K;
            S* orow = out.data() + r * K;
            double mx = -1e300;
            for (int j = 0; j < K; ++j) mx = std::max(mx, static_cast<double>(row[j]));
            double denom = 0.0;
            for (int j = 0; j < K; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
            if (log_form) {
                const double ld = std::log(denom);
                for (int j = 0; j < K; ++j) orow[j] = static_cast<S>(static_cast<double>(row[j]) - mx - ld);
            } else {
                const double inv = 1.0 / denom;
                for (int j = 0; j < K; ++j)
                    orow[j] = static_cast<S>(std::exp(static_cast<double>(row[j]) - mx) * inv);
            }
        }
        return push(std::move(out), needs(x), [this, x, K, log_form](const Node& n) {
            auto& g = grad_ref(x);
            const int64_t R = n.value.numel() / K;
            for (int64_t r = 0; r < R; ++r) {
                const S* y = n.value.data() + r * K;
                const S* go = n.grad.data() + r * K;
                double dot = 0.0;
                if (log_form) {
                    for (int j = 0; j < K; ++j) dot += static_cast<double>(go[j]);
                    for (int j = 0; j < K; ++j)
                        g[r * K + j] += static_cast<S>(static_cast<double>(go[j]) -
                                                       std::exp(static_cast<double>(y[j])) * dot);
                } else {
                    for (int j = 0; j < K; ++j)
                        dot += static_cast<double>(go[j]) * static_cast<double>(y[j]);
                    for (int j = 0; j < K; ++j)
                        g[r * K + j] += static_cast<S>(static_cast<double>(y[j]) *
                                                       (static_cast<double>(go[j]) - dot));
                }
            }
        });
    }

    void layer_norm_backward(const Node& n, Var x, Var gain, Var bias) {
        const auto& X = val(x);
        const auto& G = val(gain);
        const int T = X.dim(0), D = X.dim(1);
        std::vector<double> xn(static_cast<size_t>(D));
        for (int t = 0; t < T; ++t) {
            const S* row = X.data() + static_cast<size_t>(t) * D;
            const S* grow = n.grad.data() + static_cast<size_t>(t) * D;
            double mean = 0.0, var = 0.0;
            for (int j = 0; j < D; ++j) mean += static_cast<double>(row[j]);
            mean /= D;
            for (int j = 0; j < D; ++j) {
                double d = static_cast<double>(row[j]) - mean;
                var += d * d;
            }
            var /= D;
            const double inv = 1.0 / std::sqrt(var + kLnEps);
            for (int j = 0; j < D; ++j) xn[static_cast<size_t>(j)] = (static_cast<double>(row[j]) - mean) * inv;

            if (needs(gain)) {
                auto& gg = grad_ref(gain);
                for (int j = 0; j < D; ++j)
                    gg[j] += static_cast<S>(static_cast<double>(grow[j]) * xn[static_cast<size_t>(j)]);
            }
            if (needs(bias)) {
                auto& gb = grad_ref(bias);
                for (int j = 0; j < D; ++j) gb[j] += grow[j];
            }
            if (needs(x)) {
                double mean_dxn = 0.0, mean_dxn_xn = 0.0;
                for (int j = 0; j < D; ++j) {
                    const double dxn = static_cast<double>(grow[j]) * static_cast<double>(G[j]);
                    mean_dxn += dxn;
                    mean_dxn_xn += dxn * xn[static_cast<size_t>(j)];
                }
                mean_dxn /= D;
                mean_dxn_xn /= D;
                auto& gx = grad_ref(x);
                for (int j = 0; j < D; ++j) {
                    const double dxn = static_cast<double>(grow[j]) * static_cast<double>(G[j]);
                    gx[static_cast<int64_t>(t) * D + j] += static_cast<S>(
                        inv * (dxn - mean_dxn - xn[static_cast<size_t>(j)] * mean_dxn_xn));
                }
            }
        }
    }

    static double gelu_fwd(double v) {
        const double c = 0.7978845608028654;  // sqrt(2/pi)
        const double u = c * (v + 0.044715 * v * v * v);
        return 0.5 * v * (1.0 + std::tanh(u));
    }

    static double gelu_bwd(double v) {
        const double c = 0.7978845608028654;
        const double u = c * (v + 0.044715 * v * v * v);
        const double th = std::tanh(u);
        const double du = c * (1.0 + 3.0 * 0.044715 * v * v);
        return 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du;
    }
};

// a[m x k] * transpose(b[n x k]) -> c[m x n], double accumulation
template <typename S>
void matmul_nt_into(const TensorT<S>& a, const TensorT<S>& b, TensorT<S>& c) {
    const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
    for (int i = 0; i < m; ++i) {
        const S* arow = a.data() + static_cast<size_t>(i) * k;
        S* crow = c.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const S* brow = b.data() + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += static_cast<double>(arow[p]) * static_cast<double>(brow[p]);
            crow[j] = static_cast<S>(acc);
        }
    }
}

// transpose(a[r x c]) * b[r x d] -> out[c x d], double accumulation
template <typename S>
void matmul_tn_into(const TensorT<S>& a, const TensorT<S>& b, TensorT<S>& out) {
    const int r = a.dim(0), c = a.dim(1), d = b.dim(1);
    std::vector<double> acc(static_cast<size_t>(c) * d, 0.0);
    for (int i = 0; i < r; ++i) {
        const S* arow = a.data() + static_cast<size_t>(i) * c;
        const S* brow = b.data() + static_cast<size_t>(i) * d;
        for (int p = 0; p < c; ++p) {
            const double av = static_cast<double>(arow[p]);
            double* orow = acc.data() + static_cast<size_t>(p) * d;
            for (int j = 0; j < d; ++j) orow[j] += av * static_cast<double>(brow[j]);
        }
    }
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = static_cast<S>(acc[static_cast<size_t>(i)]);
}

}  // namespace dicelab
