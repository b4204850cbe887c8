#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hsir/autodiff.hpp"
#include "hsir/rng.hpp"

namespace hsir {

/// Ordered store of named learnable tensors. Construction order defines the
/// (stable) key order; the key set depends on the model config only.
struct ParamRegistry {
    std::vector<std::pair<std::string, Var>> items;

    Var add(const std::string& name, Tensor init) {
        Var v(std::move(init), true);
        items.emplace_back(name, v);
        return v;
    }

    Var* find(const std::string& name) {
        for (auto& it : items)
            if (it.first == name) return &it.second;
        return nullptr;
    }

    int64_t total_elements() const {
        int64_t n = 0;
        for (const auto& it : items) n += it.second.val().numel();
        return n;
    }

    void zero_grads() {
        for (auto& it : items) it.second.zero_grad();
    }
};

/// Fan-in-scaled uniform init, bound 1/sqrt(fan_in).
inline Tensor uniform_fan_in(std::vector<int> dims, int fan_in, Rng& rng) {
    Tensor t(std::move(dims));
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    rng.fill_uniform(t, -bound, bound);
    return t;
}

}  // namespace hsir
