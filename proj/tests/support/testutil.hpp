#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hsir/autodiff.hpp"
#include "hsir/rng.hpp"
#include "hsir/tensor.hpp"

namespace testutil {

inline hsir::Tensor random_tensor(std::vector<int> dims, uint64_t seed, double lo = -1.0,
                                  double hi = 1.0) {
    hsir::Tensor t(std::move(dims));
    hsir::Rng rng(seed);
    rng.fill_uniform(t, lo, hi);
    return t;
}

inline double max_abs_diff(const hsir::Tensor& a, const hsir::Tensor& b) {
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_rel_diff(const hsir::Tensor& a, const hsir::Tensor& b, double floor = 1e-9) {
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        m = std::max(m, std::abs(a[i] - b[i]) / denom);
    }
    return m;
}

struct GradCheckResult {
    double max_rel = 0.0;
    std::string worst;
    int checked = 0;
};

/// Central-difference check of backpropagated gradients. loss_fn rebuilds
/// the graph from the current parameter values on every call. Relative
/// error uses a 1e-3 magnitude floor so finite-difference noise on
/// near-zero gradients is not amplified.
inline GradCheckResult grad_check(const std::function<hsir::Var()>& loss_fn,
                                  const std::vector<std::pair<std::string, hsir::Var>>& params,
                                  double h = 1e-5, int max_per_tensor = 0, uint64_t seed = 1234) {
    using hsir::Tensor;
    for (auto& p : params) const_cast<hsir::Var&>(p.second).zero_grad();
    hsir::Var loss = loss_fn();
    loss.backward();

    std::vector<Tensor> analytic;
    for (auto& p : params)
        analytic.push_back(p.second.has_grad() ? p.second.grad() : Tensor(p.second.val().dims()));

    GradCheckResult res;
    hsir::Rng rng(seed);
    for (size_t pi = 0; pi < params.size(); ++pi) {
        hsir::Var& v = const_cast<hsir::Var&>(params[pi].second);
        int64_t n = v.val().numel();
        std::vector<int64_t> idx;
        if (max_per_tensor <= 0 || n <= max_per_tensor) {
            for (int64_t i = 0; i < n; ++i) idx.push_back(i);
        } else {
            for (int k = 0; k < max_per_tensor; ++k) idx.push_back(rng.uniform_int(0, n - 1));
        }
        for (int64_t i : idx) {
            double orig = v.val()[i];
            v.mutable_val()[i] = orig + h;
            double lp = loss_fn().val()[0];
            v.mutable_val()[i] = orig - h;
            double lm = loss_fn().val()[0];
            v.mutable_val()[i] = orig;
            double num = (lp - lm) / (2.0 * h);
            double ana = analytic[pi][i];
            double rel = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-3});
            ++res.checked;
            if (rel > res.max_rel) {
                res.max_rel = rel;
                res.worst = params[pi].first + "[" + std::to_string(i) + "] num=" +
                            std::to_string(num) + " ana=" + std::to_string(ana);
            }
        }
    }
    return res;
}

/// Deterministic probe: contract a tensor output to a scalar with fixed
/// pseudo-random weights so every output element influences the loss.
inline hsir::Var probe_loss(const hsir::Var& out, uint64_t seed = 99) {
    return hsir::dot_const(out, random_tensor(out.val().dims(), seed));
}

}  // namespace testutil
