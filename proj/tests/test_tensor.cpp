#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <dicelab/rng.hpp>
#include <dicelab/tape.hpp>
#include <dicelab/tensor.hpp>

using namespace dicelab;

namespace {

// independent reference: plain triple loop in double
Tensor64 matmul_oracle(const Tensor64& a, const Tensor64& b) {
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor64 c({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a.at(i, p) * b.at(p, j);
            c.at(i, j) = acc;
        }
    return c;
}

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

}  // namespace

TEST_CASE("tensor basics and invariants") {
    Tensor t({2, 3});
    CHECK(t.numel() == 6);
    CHECK(t.rank() == 2);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    for (int64_t i = 0; i < 6; ++i) CHECK(t[i] == 0.0f);

    CHECK_THROWS_AS(Tensor({2, 2}, {1.0f, 2.0f, 3.0f}), DimensionError);

    Tensor id = Tensor::identity(3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(id.at(i, j) == (i == j ? 1.0f : 0.0f));

    Tensor fr = Tensor::from_rows({{1.0f, 2.0f}, {3.0f, 4.0f}});
    CHECK(fr.at(1, 0) == 3.0f);

    Tensor64 d = fr.cast<double>();
    CHECK(d.at(0, 1) == doctest::Approx(2.0));
    CHECK(t.all_finite());
}

TEST_CASE("matmul identity and hand-checked case") {
    Tensor i2 = Tensor::identity(2);
    Tensor out({2, 2});
    matmul_into(i2, i2, out);
    CHECK(out.at(0, 0) == 1.0f);
    CHECK(out.at(0, 1) == 0.0f);
    CHECK(out.at(1, 1) == 1.0f);

    Tensor a = Tensor::from_rows({{1.0f, 2.0f}, {3.0f, 4.0f}});
    Tensor b = Tensor::from_rows({{0.0f}, {1.0f}});
    Tensor c({2, 1});
    matmul_into(a, b, c);
    CHECK(c.at(0, 0) == 2.0f);
    CHECK(c.at(1, 0) == 4.0f);
}

TEST_CASE("matmul matches triple-loop oracle") {
    Rng rng(123);
    for (auto [m, k, n] : {std::tuple{5, 4, 3}, std::tuple{33, 65, 17}, std::tuple{1, 100, 1}}) {
        Tensor a = random_tensor({m, k}, rng, -10.0, 10.0);
        Tensor b = random_tensor({k, n}, rng, -10.0, 10.0);
        Tensor c({m, n});
        matmul_into(a, b, c);
        Tensor64 ref = matmul_oracle(a.cast<double>(), b.cast<double>());
        for (int64_t i = 0; i < c.numel(); ++i) CHECK(std::fabs(c[i] - ref[i]) < 1e-6 * std::max(1.0, std::fabs(ref[i])));
    }
}

TEST_CASE("matmul_nt and matmul_tn match transposed oracles") {
    Rng rng(7);
    Tensor a = random_tensor({6, 5}, rng);
    Tensor b = random_tensor({4, 5}, rng);
    Tensor c({6, 4});
    matmul_nt_into(a, b, c);
    // oracle: c = a * b^T via explicit transpose
    Tensor64 bt({5, 4});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 5; ++j) bt.at(j, i) = b.at(i, j);
    Tensor64 ref = matmul_oracle(a.cast<double>(), bt);
    for (int64_t i = 0; i < c.numel(); ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-6));

    Tensor x = random_tensor({7, 3}, rng);
    Tensor y = random_tensor({7, 2}, rng);
    Tensor z({3, 2});
    matmul_tn_into(x, y, z);
    Tensor64 xt({3, 7});
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 3; ++j) xt.at(j, i) = x.at(i, j);
    Tensor64 ref2 = matmul_oracle(xt, y.cast<double>());
    for (int64_t i = 0; i < z.numel(); ++i) CHECK(z[i] == doctest::Approx(ref2[i]).epsilon(1e-6));
}

TEST_CASE("shape mismatches are rejected") {
    Tensor a({2, 3}), b({2, 3}), c({2, 2});
    CHECK_THROWS_AS(matmul_into(a, b, c), DimensionError);
    Tape<float> tape;
    auto va = tape.leaf(a);
    auto vb = tape.leaf(Tensor({4, 2}));
    CHECK_THROWS_AS(tape.matmul(va, vb), DimensionError);
    CHECK_THROWS_AS(tape.add(va, tape.leaf(Tensor({3, 2}))), DimensionError);
}
