#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "hsir/autodiff.hpp"
#include "hsir/params.hpp"
#include "hsir/tensor.hpp"

namespace hsir {

/// Spectral-wise self-attention: tokens are channels, the attention matrix is
/// C x C and column-stochastic, so each output channel is a convex
/// combination of value channels.
struct SpectralAttentionParams {
    Var w_q, w_k, w_v;  // (C, C)
    Var sigma;          // learnable logit re-weighting scalar
    int heads = 1;

    int width() const { return w_q.val().dim(0); }
};

SpectralAttentionParams make_spectral_attention_params(ParamRegistry& reg,
                                                       const std::string& prefix, int c, int heads,
                                                       Rng& rng);

/// Window-based self-attention with a learnable relative position bias.
struct WindowAttentionParams {
    Var w_q, w_k;      // (C, d_qk)
    Var w_v;           // (C, d_v)
    Var bias_table;    // ((2M-1)^2)
    std::shared_ptr<const std::vector<int>> bias_index;  // M^2 x M^2 lookups into the table
    int window_size = 1;
    int heads = 1;

    int in_width() const { return w_q.val().dim(0); }
    int d_qk() const { return w_q.val().dim(1); }
    int d_v() const { return w_v.val().dim(1); }
};

WindowAttentionParams make_window_attention_params(ParamRegistry& reg, const std::string& prefix,
                                                   int c, int d_qk, int d_v, int m, int heads,
                                                   Rng& rng);

/// Bookkeeping needed to invert a window partition exactly.
struct WindowLayout {
    int window_size = 1;
    int pad_h = 0, pad_w = 0;  // reflect padding applied bottom/right
    int n_windows = 1;         // ceil(H/M) * ceil(W/M)
    int orig_h = 0, orig_w = 0;
    int channels = 0;
};

/// Relative offset -> table index map for an M x M window; entries lie in
/// [0, (2M-1)^2 - 1] and mirror-symmetric position pairs map to
/// complementary indices.
std::vector<int> relative_position_bias_index(int m);

/// Expands a (2M-1)^2 table into the dense M^2 x M^2 bias matrix.
Tensor relative_position_bias(const Tensor& table, int m);
Var relative_position_bias(const Var& table, const WindowAttentionParams& p);

/// Splits (C,H,W) into N windows of shape (M^2, C), reflect-padding to the
/// next multiple of M when needed. Raster window order, row-major pixels.
std::pair<Tensor, WindowLayout> window_partition(const Tensor& x, int m);

/// Exact left-inverse of window_partition (merges, then crops the padding).
Tensor window_merge(const Tensor& windows, const WindowLayout& layout);

// Forward surfaces: plain-tensor (inference/tests) and Var (training).
Tensor spectral_self_attention(const Tensor& x, const SpectralAttentionParams& p);
Var spectral_self_attention(const Var& x, const SpectralAttentionParams& p);

Tensor window_self_attention(const Tensor& x, const WindowAttentionParams& p, int m);
Var window_self_attention(const Var& x, const WindowAttentionParams& p);

/// Diagnostics: the realized attention matrices (heads stacked).
Tensor spectral_attention_weights(const Tensor& x, const SpectralAttentionParams& p);
std::vector<Tensor> window_attention_weights(const Tensor& x, const WindowAttentionParams& p,
                                             int m);

enum class AttentionKind { Spectral, Window };

/// Exact multiply-accumulate count of the attention core (logits plus value
/// aggregation, projections excluded). Spectral: 2*H*W*C^2. Window:
/// N*(M^4*d_qk + M^4*d_v) with N = ceil(H/M)*ceil(W/M).
uint64_t attention_mac_count(AttentionKind kind, int c, int h, int w, int m, int d_qk, int d_v);

}  // namespace hsir
