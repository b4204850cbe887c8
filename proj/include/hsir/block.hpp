#pragma once

#include "hsir/attention.hpp"
#include "hsir/nn.hpp"

namespace hsir {

enum class Arrangement { Parallel, SpeThenSpa, SpaThenSpe };

/// Knobs shared by every transformer block instance; width and window size
/// are resolved per scale at construction time.
struct BlockSettings {
    int width = 0;           // operating channel count C
    int window_size = 1;     // effective window (already clamped to the map)
    int subspace_factor = 2; // r: attention cores run at ceil(C/r)
    int d_qk = 1;
    int d_v = 0;             // 0 -> core width
    int heads = 1;
    int llff_expansion = 2;  // g
    bool llff_pre_norm = true;
    bool use_spe = true;
    bool use_spa = true;
    bool use_llff = true;
    Arrangement arrangement = Arrangement::Parallel;

    int core_width() const {
        int c = (width + subspace_factor - 1) / subspace_factor;
        return c < 1 ? 1 : c;
    }
    int resolved_d_v() const { return d_v == 0 ? core_width() : d_v; }
};

/// Residual pre-norm sandwich around the spectral attention core:
/// x + proj_up(S-SA(proj_down(LN(x)))).
struct SpectralAttentionBlockParams {
    LayerNorm pre_norm;
    Conv2d proj_down, proj_up;  // 1x1, C <-> C/r
    SpectralAttentionParams core;
};

/// Same sandwich with the window attention core.
struct SpatialAttentionBlockParams {
    LayerNorm pre_norm;
    Conv2d proj_down, proj_up;
    WindowAttentionParams core;
    int window_size = 1;
};

/// Gated feed-forward: 1x1 expand to g*C, split-and-multiply gate, 3x3
/// depthwise, 1x1 project back, residual. Optional pre-normalization.
struct LlffParams {
    bool pre_norm = true;
    LayerNorm norm;  // present only when pre_norm
    Conv2d expand;   // 1x1 C -> g*C
    Conv2d dwconv;   // 3x3 depthwise over g*C/2
    Conv2d project;  // 1x1 g*C/2 -> C
};

struct LssBlockParams {
    SpectralAttentionBlockParams spe;
    SpatialAttentionBlockParams spa;
    Var alpha, beta;  // learnable branch reweighting scalars
    LlffParams llff;
    BlockSettings cfg;
};

SpectralAttentionBlockParams make_spectral_block(ParamRegistry& reg, const std::string& prefix,
                                                 const BlockSettings& cfg, Rng& rng);
SpatialAttentionBlockParams make_spatial_block(ParamRegistry& reg, const std::string& prefix,
                                               const BlockSettings& cfg, Rng& rng);
LlffParams make_llff(ParamRegistry& reg, const std::string& prefix, const BlockSettings& cfg,
                     Rng& rng);
LssBlockParams make_lss_block(ParamRegistry& reg, const std::string& prefix,
                              const BlockSettings& cfg, Rng& rng);

/// Splits channels in half and multiplies the halves elementwise.
Var simple_gate(const Var& x);
Tensor simple_gate(const Tensor& x);

Var llff_forward(const Var& x, const LlffParams& p);
Tensor llff_forward(const Tensor& x, const LlffParams& p);

Var spectral_attention_block(const Var& x, const SpectralAttentionBlockParams& p);
Tensor spectral_attention_block(const Tensor& x, const SpectralAttentionBlockParams& p);

Var spatial_attention_block(const Var& x, const SpatialAttentionBlockParams& p);
Tensor spatial_attention_block(const Tensor& x, const SpatialAttentionBlockParams& p);

Var lss_block_forward(const Var& x, const LssBlockParams& p);
Tensor lss_block_forward(const Tensor& x, const LssBlockParams& p);

/// Analytic accounting for one block at the given spatial size.
int64_t lss_block_param_count(const BlockSettings& cfg);
uint64_t lss_block_mac_count(const BlockSettings& cfg, int h, int w);

}  // namespace hsir
