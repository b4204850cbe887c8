#pragma once

#include <cstdint>

#include "hsir/tensor.hpp"

namespace hsir::ops {

// ---------------------------------------------------------------------------
// MAC accounting. When enabled, the convolution / matmul / attention kernels
// tally one count per fused multiply-add they execute. Elementwise products,
// normalizations and softmax transcendentals are not MACs and are not
// counted. Forward kernels only.
// ---------------------------------------------------------------------------
void mac_counter_enable(bool on);
void mac_counter_reset();
uint64_t mac_counter_value();
void mac_add(uint64_t n);

struct MacScope {
    MacScope() {
        mac_counter_reset();
        mac_counter_enable(true);
    }
    ~MacScope() { mac_counter_enable(false); }
};

// ---------------------------------------------------------------------------
// Index helpers
// ---------------------------------------------------------------------------

/// Mirror index into [0, n) without repeating the border sample
/// (…2 1 | 0 1 2 … n-1 | n-2 n-3…). Handles arbitrary out-of-range i.
int reflect_index(int i, int n);

// ---------------------------------------------------------------------------
// Padding / cropping (bottom/right only; top-left origin is preserved)
// ---------------------------------------------------------------------------
Tensor reflect_pad_br(const Tensor& x, int pad_h, int pad_w);
void reflect_pad_br_backward(const Tensor& gout, int orig_h, int orig_w, Tensor& gx);

Tensor crop_tl(const Tensor& x, int out_h, int out_w);
void crop_tl_backward(const Tensor& gout, Tensor& gx);

// ---------------------------------------------------------------------------
// Convolution. x: (Cin,H,W); w: (Cout, Cin/groups, k, k); b: (Cout) or null.
// ---------------------------------------------------------------------------
enum class Pad { Zero, Reflect };

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* b, int stride, int pad, Pad mode,
              int groups);
void conv2d_backward(const Tensor& x, const Tensor& w, int stride, int pad, Pad mode, int groups,
                     const Tensor& gout, Tensor* gx, Tensor* gw, Tensor* gb);

// ---------------------------------------------------------------------------
// Layer normalization over the channel dimension, per pixel.
// gain/bias: (C). Cache holds per-pixel mean and 1/std for the backward pass.
// ---------------------------------------------------------------------------
struct LayerNormCache {
    Tensor mean;     // (H,W)
    Tensor inv_std;  // (H,W)
};
Tensor layer_norm_chan(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps,
                       LayerNormCache* cache);
void layer_norm_chan_backward(const Tensor& x, const Tensor& gain, const LayerNormCache& cache,
                              const Tensor& gout, Tensor* gx, Tensor* ggain, Tensor* gbias);

// ---------------------------------------------------------------------------
// Dense 2-D linear algebra
// ---------------------------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);  // (m,k)x(k,n) -> (m,n)
Tensor transpose2d(const Tensor& a);

Tensor softmax_rows(const Tensor& logits);
Tensor softmax_cols(const Tensor& logits);
// Given the softmax output a and upstream da, return dlogits.
Tensor softmax_rows_backward(const Tensor& a, const Tensor& da);
Tensor softmax_cols_backward(const Tensor& a, const Tensor& da);

// (C,H,W) <-> (H*W, C) pixel-major matrix
Tensor chw_to_pixmat(const Tensor& x);
Tensor pixmat_to_chw(const Tensor& m, int h, int w);

// ---------------------------------------------------------------------------
// Pixel shuffle: (C*r*r, H, W) -> (C, H*r, W*r), channel-major within each
// output group: out[c][y*r+dy][x*r+dx] = in[c*r*r + dy*r + dx][y][x].
// ---------------------------------------------------------------------------
Tensor pixel_shuffle(const Tensor& x, int r);
Tensor pixel_unshuffle(const Tensor& x, int r);

// ---------------------------------------------------------------------------
// Window rearrangement on exact multiples (padding handled by callers).
// x: (C,H,W) with H,W divisible by M -> (N, M*M, C) in raster window order,
// each window flattened row-major.
// ---------------------------------------------------------------------------
Tensor window_split(const Tensor& x, int m);
Tensor window_unsplit(const Tensor& w, int c, int h, int wd, int m);

// ---------------------------------------------------------------------------
// Spectral self-attention core (channel tokens). x: (C,H,W); wq/wk/wv: (C,C);
// sigma scalar. Logits are column-softmaxed so each output channel is a
// convex combination of value channels. heads splits channels into
// contiguous groups after projection.
// ---------------------------------------------------------------------------
struct SsaCache {
    Tensor x_mat;   // (HW,C)
    Tensor q, k, v; // (HW,C)
    Tensor attn;    // (heads, Ch, Ch) stacked column-stochastic blocks
    Tensor kq;      // (heads, Ch, Ch) raw K^T Q per head (pre-sigma)
};
Tensor ssa_forward(const Tensor& x, const Tensor& wq, const Tensor& wk, const Tensor& wv,
                   double sigma, int heads, SsaCache* cache);
void ssa_backward(const SsaCache& cache, const Tensor& wq, const Tensor& wk, const Tensor& wv,
                  double sigma, int heads, const Tensor& gout, Tensor* gx, Tensor* gwq,
                  Tensor* gwk, Tensor* gwv, double* gsigma);

// ---------------------------------------------------------------------------
// Window self-attention core. x: (C,H,W); wq/wk: (C,dqk); wv: (C,dv);
// bias: (M*M, M*M) added to every window's logits; rows are softmaxed.
// Output: (dv, H, W). Reflect-pads internally when H or W is not a multiple
// of M and crops after merging.
// ---------------------------------------------------------------------------
struct WsaCache {
    int ph = 0, pw = 0;      // padded dims
    Tensor windows;          // (N, M2, C)
    Tensor q, k, v;          // (N, M2, d*)
    Tensor attn;             // (N, heads, M2, M2)
};
Tensor wsa_forward(const Tensor& x, const Tensor& wq, const Tensor& wk, const Tensor& wv,
                   const Tensor& bias, int m, int heads, WsaCache* cache);
void wsa_backward(const WsaCache& cache, const Tensor& wq, const Tensor& wk, const Tensor& wv,
                  int m, int heads, int orig_h, int orig_w, const Tensor& gout, Tensor* gx,
                  Tensor* gwq, Tensor* gwk, Tensor* gwv, Tensor* gbias);

}  // namespace hsir::ops
