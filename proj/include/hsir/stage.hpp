#pragma once

#include "hsir/block.hpp"

namespace hsir {

enum class SkipMerge { Concat, Add };

/// Stage-level hyperparameters plus the block knobs inherited from the model.
struct StageSettings {
    int embed_dim = 172;                    // E
    int n_basis = 16;                       // N_B, perfect square
    std::vector<int> basis_depths{1, 1, 1}; // blocks per basis scale
    std::vector<int> abundance_depths{1, 1};
    int bottleneck_depth = 1;
    int window_size = 8;                    // M (clamped per scale)
    int subspace_factor = 2;
    int d_qk = 1;
    int d_v = 0;
    int heads = 1;
    int llff_expansion = 2;
    bool llff_pre_norm = true;
    bool use_spe = true;
    bool use_spa = true;
    bool use_llff = true;
    Arrangement arrangement = Arrangement::Parallel;
    SkipMerge skip_merge = SkipMerge::Concat;

    int sqrt_n_basis() const;
    /// The square spatial size S the stage operates at:
    /// S = sqrt(N_B) * 4^(len(basis_depths)-1).
    int operating_size() const;
    void validate() const;
    BlockSettings block_at(int width, int h, int w) const;
};

// 4x4 depthwise (stride 4) followed by a 1x1 pointwise to the target width.
struct DownsampleParams {
    Conv2d depthwise, pointwise;
};
DownsampleParams make_downsample(ParamRegistry& reg, const std::string& prefix, int cin, int cout,
                                 Rng& rng);
Var downsample(const Var& x, const DownsampleParams& p);
Tensor downsample(const Tensor& x, const DownsampleParams& p);

// 3x3 conv emitting 16*(C/2) channels, pixel-shuffled by 4: spatial x4,
// channels halved.
struct UpsampleParams {
    Conv2d conv;
};
UpsampleParams make_upsample(ParamRegistry& reg, const std::string& prefix, int cin, Rng& rng);
Var upsample(const Var& x, const UpsampleParams& p);
Tensor upsample(const Tensor& x, const UpsampleParams& p);

struct BasisScale {
    std::vector<LssBlockParams> blocks;
    int size = 0;  // spatial side at this scale
};

struct BasisBranchParams {
    Conv2d proj_in;    // 1x1 E->E
    std::vector<BasisScale> scales;
    std::vector<DownsampleParams> downs;  // between consecutive scales
    Conv2d final_conv;  // 1x1 E->E
};

struct AbundanceLevel {
    std::vector<LssBlockParams> enc_blocks;
    DownsampleParams down;
    UpsampleParams up;
    Conv2d merge;  // 1x1 2w->w, concat merges only
    std::vector<LssBlockParams> dec_blocks;
    int width = 0;
    int size = 0;       // spatial side entering this level
    int padded_size = 0;  // after pad-to-multiple-of-4
};

struct AbundanceBranchParams {
    Conv2d proj_in;  // 1x1 E->N_B
    std::vector<AbundanceLevel> levels;
    std::vector<LssBlockParams> bottleneck;
    Conv2d final_conv;  // 3x3 N_B->N_B, reflect
    int bottleneck_size = 0;
};

struct StageParams {
    BasisBranchParams basis;
    AbundanceBranchParams abundance;
    StageSettings cfg;
};

StageParams make_stage(ParamRegistry& reg, const std::string& prefix, const StageSettings& cfg,
                       Rng& rng);

/// Sequential branch: blocks + downsampling until sqrt(N_B) x sqrt(N_B),
/// then a final 1x1 mixing conv. Output (E, sqrt(N_B), sqrt(N_B)).
Var basis_module(const Var& f, const StageParams& p);
Tensor basis_module(const Tensor& f, const StageParams& p);

/// U-shaped branch at abundance width: encoder (blocks, downsample with
/// channel doubling), bottleneck, decoder (upsample with channel halving,
/// skip merge, blocks), final 3x3 conv. Output (N_B, H, W).
Var abundance_module(const Var& f, const StageParams& p);
Tensor abundance_module(const Tensor& f, const StageParams& p);

/// f + reshape(B' A') where B' is (E, N_B) and A' is (N_B, H*W); the update
/// has rank at most N_B.
Var stage_forward(const Var& f, const StageParams& p);
Tensor stage_forward(const Tensor& f, const StageParams& p);

int64_t stage_param_count(const StageSettings& cfg);
uint64_t stage_mac_count(const StageSettings& cfg);
/// Reference variant running the U-shaped branch at width E (no
/// factorization); used only for the complexity comparison.
int64_t stage_param_count_dense(const StageSettings& cfg);
uint64_t stage_mac_count_dense(const StageSettings& cfg);

}  // namespace hsir
