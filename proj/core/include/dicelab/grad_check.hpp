#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "dicelab/errors.hpp"
#include "dicelab/tape.hpp"

namespace dicelab {

// Central-difference verification of the tape's reverse pass, run entirely in
// 64-bit. `build` receives a fresh tape plus one leaf per parameter tensor and
// returns the scalar loss var. Returns the worst
// |analytic - numeric| / max(|analytic|, 1e-8) over every parameter element.
template <typename BuildFn>
double grad_check(BuildFn&& build, const std::vector<Tensor64>& params, double eps) {
    using T = Tape<double>;
    using Var = T::Var;

    auto eval = [&](const std::vector<Tensor64>& ps, bool with_grad) {
        T tape;
        std::vector<Var> leaves;
        leaves.reserve(ps.size());
        for (const auto& p : ps) leaves.push_back(tape.leaf(p, with_grad));
        Var loss = build(tape, leaves);
        const double lv = tape.scalar_value(loss);
        if (!std::isfinite(lv)) throw NumericError("non-finite loss in gradient check");
        std::vector<Tensor64> grads;
        if (with_grad) {
            tape.backward(loss);
            for (Var v : leaves) grads.push_back(tape.grad(v));
        }
        return std::make_pair(lv, std::move(grads));
    };

    const auto analytic = eval(params, true).second;

    std::vector<Tensor64> work = params;
    double worst = 0.0;
    for (size_t i = 0; i < work.size(); ++i) {
        for (int64_t j = 0; j < work[i].numel(); ++j) {
            const double saved = work[i][j];
            work[i][j] = saved + eps;
            const double fp = eval(work, false).first;
            work[i][j] = saved - eps;
            const double fm = eval(work, false).first;
            work[i][j] = saved;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[i][j];
            const double rel = std::fabs(a - numeric) / std::max(std::fabs(a), 1e-8);
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace dicelab
