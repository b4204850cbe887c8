#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hsir/model.hpp"
#include "hsir/train.hpp"

namespace hsir {

/// Checkpoint container: magic "HSIRCKP1", a u64 header length, a JSON
/// header (format version, model config, seed, step, array directory), then
/// the named arrays as raw little-endian f64 payloads. Round trips are
/// bit-exact.
void save_checkpoint(const std::string& path, const Model& model,
                     const OptimizerState* opt = nullptr);

struct LoadedCheckpoint {
    ModelConfig config;
    uint64_t seed = 0;
    int64_t step = 0;
    std::vector<std::pair<std::string, Tensor>> arrays;

    const Tensor* find(const std::string& name) const {
        for (const auto& a : arrays)
            if (a.first == name) return &a.second;
        return nullptr;
    }
};

LoadedCheckpoint read_checkpoint(const std::string& path);

/// Rebuilds the model from the stored config and overwrites every parameter
/// from the stored arrays. When opt is non-null and the checkpoint carries
/// optimizer arrays, restores them too.
Model load_model(const LoadedCheckpoint& ck, OptimizerState* opt = nullptr);

}  // namespace hsir
