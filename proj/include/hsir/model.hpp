#pragma once

#include "hsir/stage.hpp"

namespace hsir {

enum class Task { Denoise, Inpaint, Superres };

struct ModelConfig {
    int channels = 172;   // input band count C
    int embed_dim = 172;  // E
    int n_stages = 4;     // N_S
    Task task = Task::Denoise;

    // stage structure
    int n_basis = 16;
    std::vector<int> basis_depths{1, 1, 1};
    std::vector<int> abundance_depths{1, 1};
    int bottleneck_depth = 1;
    int window_size = 8;
    SkipMerge skip_merge = SkipMerge::Concat;

    // block knobs
    int subspace_factor = 2;
    int llff_expansion = 2;
    bool llff_pre_norm = true;
    int d_qk = 1;
    int d_v = 0;  // 0 = track the attention core width
    int heads = 1;

    // ablation axes
    bool use_spe = true;
    bool use_spa = true;
    bool use_llff = true;
    Arrangement arrangement = Arrangement::Parallel;

    bool mask_channel = false;  // append an observed-fraction channel
    int sr_scale = 4;           // bicubic pre-upsampling factor for superres

    StageSettings stage_settings() const;
    int operating_size() const { return stage_settings().operating_size(); }
    int input_channels() const { return channels + (mask_channel ? 1 : 0); }
    void validate() const;
};

/// Validates the ablation flags and reports the degenerate all-off case.
/// The returned config is what the model should be built from.
ModelConfig apply_ablation(const ModelConfig& cfg, std::string* warning);

class Model {
public:
    Model(ModelConfig cfg, uint64_t seed);

    ModelConfig cfg;
    uint64_t seed = 0;
    int64_t step = 0;
    ParamRegistry params;

    Conv2d in_conv, out_conv;
    std::vector<StageParams> stages;

    /// Full pipeline: reflect-pad to the operating size, 3x3 in-conv, the
    /// cascaded stages, 3x3 out-conv, crop back.
    Var forward(const Var& x) const;
    Tensor forward(const Tensor& cube, const Tensor* mask = nullptr) const;

    /// Concatenates the observed-fraction channel when configured.
    Tensor assemble_input(const Tensor& cube, const Tensor* mask) const;
};

Model build_model(const ModelConfig& cfg, uint64_t seed);

// Analytic accounting from config alone (MACs evaluated at the operating
// size the forward actually runs at).
int64_t count_parameters(const ModelConfig& cfg);
uint64_t count_macs(const ModelConfig& cfg, int h, int w);
// Hypothetical variant whose U-shaped branch runs at width E instead of N_B.
int64_t count_parameters_dense_reference(const ModelConfig& cfg);
uint64_t count_macs_dense_reference(const ModelConfig& cfg, int h, int w);

}  // namespace hsir
