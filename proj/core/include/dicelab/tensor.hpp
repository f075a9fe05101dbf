#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dicelab/errors.hpp"

namespace dicelab {

// Dense row-major tensor. Rank 0 (empty shape) holds a single scalar.
// Training uses S = float; gradient checking instantiates S = double.
template <typename S>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(numel_of(shape_)), S(0));
    }

    TensorT(std::vector<int> shape, std::vector<S> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<int64_t>(data_.size()) != numel_of(shape_))
            throw DimensionError("tensor data length does not match shape");
    }

    static TensorT zeros(std::vector<int> shape) { return TensorT(std::move(shape)); }

    static TensorT full(std::vector<int> shape, S v) {
        TensorT t(std::move(shape));
        for (auto& x : t.data_) x = v;
        return t;
    }

    static TensorT scalar(S v) { return TensorT({}, {v}); }

    static TensorT identity(int n) {
        TensorT t({n, n});
        for (int i = 0; i < n; ++i) t.at(i, i) = S(1);
        return t;
    }

    // 2-D literal, e.g. Tensor::from_rows({{1,2},{3,4}})
    static TensorT from_rows(std::initializer_list<std::initializer_list<S>> rows) {
        int r = static_cast<int>(rows.size());
        int c = r ? static_cast<int>(rows.begin()->size()) : 0;
        TensorT t({r, c});
        int i = 0;
        for (const auto& row : rows) {
            if (static_cast<int>(row.size()) != c) throw DimensionError("ragged row literal");
            for (S v : row) t.data_[i++] = v;
        }
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }

    int rows() const { return rank() == 2 ? shape_[0] : (rank() == 1 ? shape_[0] : 1); }
    int cols() const { return rank() == 2 ? shape_[1] : 1; }

    S* data() { return data_.data(); }
    const S* data() const { return data_.data(); }
    std::vector<S>& vec() { return data_; }
    const std::vector<S>& vec() const { return data_; }

    S& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    S operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    S& at(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
    S at(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

    bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (S v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename T>
    TensorT<T> cast() const {
        TensorT<T> out(shape_);
        for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<T>(data_[static_cast<size_t>(i)]);
        return out;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << '[';
        for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
        os << ']';
        return os.str();
    }

    static int64_t numel_of(const std::vector<int>& shape) {
        int64_t n = 1;
        for (int d : shape) {
            if (d < 0) throw DimensionError("negative dimension");
            n *= d;
        }
        return n;
    }

private:
    std::vector<int> shape_;
    std::vector<S> data_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

// C = A * B with double accumulation. The inner loops run k-major with a
// per-row accumulator so gcc can vectorize the float->double fma.
template <typename S>
void matmul_into(const TensorT<S>& a, const TensorT<S>& b, TensorT<S>& c) {
    if (a.rank() != 2 || b.rank() != 2 || c.rank() != 2 || a.dim(1) != b.dim(0) || c.dim(0) != a.dim(0) ||
        c.dim(1) != b.dim(1))
        throw DimensionError("matmul shapes disagree: " + a.shape_str() + " x " + b.shape_str() + " -> " +
                             c.shape_str());
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> acc(static_cast<size_t>(n));
    for (int i = 0; i < m; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const S* arow = a.data() + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = static_cast<double>(arow[p]);
            const S* brow = b.data() + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) acc[static_cast<size_t>(j)] += av * static_cast<double>(brow[j]);
        }
        S* crow = c.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) crow[j] = static_cast<S>(acc[static_cast<size_t>(j)]);
    }
}

}  // namespace dicelab
