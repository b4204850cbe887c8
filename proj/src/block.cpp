#include "hsir/block.hpp"

namespace hsir {

SpectralAttentionBlockParams make_spectral_block(ParamRegistry& reg, const std::string& prefix,
                                                 const BlockSettings& cfg, Rng& rng) {
    int c = cfg.width, cc = cfg.core_width();
    SpectralAttentionBlockParams p;
    p.pre_norm = make_layer_norm(reg, prefix + ".norm", c);
    p.proj_down = make_conv(reg, prefix + ".proj_down", c, cc, 1, 1, 0, ops::Pad::Zero, 1, rng);
    p.core = make_spectral_attention_params(reg, prefix + ".core", cc, cfg.heads, rng);
    p.proj_up = make_conv(reg, prefix + ".proj_up", cc, c, 1, 1, 0, ops::Pad::Zero, 1, rng);
    return p;
}

SpatialAttentionBlockParams make_spatial_block(ParamRegistry& reg, const std::string& prefix,
                                               const BlockSettings& cfg, Rng& rng) {
    int c = cfg.width, cc = cfg.core_width();
    SpatialAttentionBlockParams p;
    p.pre_norm = make_layer_norm(reg, prefix + ".norm", c);
    p.proj_down = make_conv(reg, prefix + ".proj_down", c, cc, 1, 1, 0, ops::Pad::Zero, 1, rng);
    p.core = make_window_attention_params(reg, prefix + ".core", cc, cfg.d_qk, cfg.resolved_d_v(),
                                          cfg.window_size, cfg.heads, rng);
    p.proj_up = make_conv(reg, prefix + ".proj_up", cfg.resolved_d_v(), c, 1, 1, 0, ops::Pad::Zero,
                          1, rng);
    p.window_size = cfg.window_size;
    return p;
}

LlffParams make_llff(ParamRegistry& reg, const std::string& prefix, const BlockSettings& cfg,
                     Rng& rng) {
    int c = cfg.width, g = cfg.llff_expansion;
    int wide = g * c;
    if (wide % 2 != 0)
        throw ConfigError("llff: expansion " + std::to_string(g) + " x width " + std::to_string(c) +
                          " must be even for the gate");
    int half = wide / 2;
    LlffParams p;
    p.pre_norm = cfg.llff_pre_norm;
    if (p.pre_norm) p.norm = make_layer_norm(reg, prefix + ".norm", c);
    p.expand = make_conv(reg, prefix + ".expand", c, wide, 1, 1, 0, ops::Pad::Zero, 1, rng);
    p.dwconv = make_conv(reg, prefix + ".dwconv", half, half, 3, 1, 1, ops::Pad::Reflect, half, rng);
    p.project = make_conv(reg, prefix + ".project", half, c, 1, 1, 0, ops::Pad::Zero, 1, rng);
    return p;
}

LssBlockParams make_lss_block(ParamRegistry& reg, const std::string& prefix,
                              const BlockSettings& cfg, Rng& rng) {
    LssBlockParams p;
    p.spe = make_spectral_block(reg, prefix + ".spe", cfg, rng);
    p.spa = make_spatial_block(reg, prefix + ".spa", cfg, rng);
    p.alpha = reg.add(prefix + ".alpha", Tensor::scalar(1.0));
    p.beta = reg.add(prefix + ".beta", Tensor::scalar(1.0));
    p.llff = make_llff(reg, prefix + ".llff", cfg, rng);
    p.cfg = cfg;
    return p;
}

Var simple_gate(const Var& x) {
    int c = x.val().dim(0);
    if (c % 2 != 0)
        throw ConfigError("simple_gate: even channel count required, got " + std::to_string(c));
    return mul(slice_ch(x, 0, c / 2), slice_ch(x, c / 2, c));
}

Tensor simple_gate(const Tensor& x) {
    NoGradGuard ng;
    return simple_gate(Var(x)).val();
}

Var llff_forward(const Var& x, const LlffParams& p) {
    if (x.val().dim(0) != p.expand.in_width())
        throw ConfigError("llff: input width " + std::to_string(x.val().dim(0)) +
                          " does not match parameters (" + std::to_string(p.expand.in_width()) + ")");
    Var z = p.pre_norm ? p.norm(x) : x;
    z = p.expand(z);
    z = simple_gate(z);
    z = p.dwconv(z);
    z = p.project(z);
    return add(x, z);
}

Tensor llff_forward(const Tensor& x, const LlffParams& p) {
    NoGradGuard ng;
    return llff_forward(Var(x), p).val();
}

Var spectral_attention_block(const Var& x, const SpectralAttentionBlockParams& p) {
    Var z = p.pre_norm(x);
    z = p.proj_down(z);
    z = spectral_self_attention(z, p.core);
    z = p.proj_up(z);
    return add(x, z);
}

Tensor spectral_attention_block(const Tensor& x, const SpectralAttentionBlockParams& p) {
    NoGradGuard ng;
    return spectral_attention_block(Var(x), p).val();
}

Var spatial_attention_block(const Var& x, const SpatialAttentionBlockParams& p) {
    Var z = p.pre_norm(x);
    z = p.proj_down(z);
    z = window_self_attention(z, p.core);
    z = p.proj_up(z);
    return add(x, z);
}

Tensor spatial_attention_block(const Tensor& x, const SpatialAttentionBlockParams& p) {
    NoGradGuard ng;
    return spatial_attention_block(Var(x), p).val();
}

Var lss_block_forward(const Var& x, const LssBlockParams& p) {
    const BlockSettings& c = p.cfg;
    Var z;
    if (c.arrangement == Arrangement::Parallel) {
        bool any = false;
        if (c.use_spe) {
            z = scale(spectral_attention_block(x, p.spe), p.alpha);
            any = true;
        }
        if (c.use_spa) {
            Var s = scale(spatial_attention_block(x, p.spa), p.beta);
            z = any ? add(z, s) : s;
            any = true;
        }
        if (!any) z = Var(Tensor(x.val().dims()));  // both branches removed
    } else if (c.arrangement == Arrangement::SpeThenSpa) {
        z = x;
        if (c.use_spe) z = spectral_attention_block(z, p.spe);
        if (c.use_spa) z = spatial_attention_block(z, p.spa);
    } else {
        z = x;
        if (c.use_spa) z = spatial_attention_block(z, p.spa);
        if (c.use_spe) z = spectral_attention_block(z, p.spe);
    }
    return c.use_llff ? llff_forward(z, p.llff) : z;
}

Tensor lss_block_forward(const Tensor& x, const LssBlockParams& p) {
    NoGradGuard ng;
    return lss_block_forward(Var(x), p).val();
}

int64_t lss_block_param_count(const BlockSettings& cfg) {
    int c = cfg.width, cc = cfg.core_width();
    int dqk = cfg.d_qk, dv = cfg.resolved_d_v();
    int m = cfg.window_size, g = cfg.llff_expansion;
    int64_t n = 0;
    // spectral branch
    n += LayerNorm::param_count(c);
    n += Conv2d::param_count(c, cc, 1, 1);
    n += 3ll * cc * cc + 1;  // w_q, w_k, w_v, sigma
    n += Conv2d::param_count(cc, c, 1, 1);
    // spatial branch
    n += LayerNorm::param_count(c);
    n += Conv2d::param_count(c, cc, 1, 1);
    n += static_cast<int64_t>(cc) * dqk * 2 + static_cast<int64_t>(cc) * dv;
    n += static_cast<int64_t>(2 * m - 1) * (2 * m - 1);
    n += Conv2d::param_count(dv, c, 1, 1);
    // reweighting scalars
    n += 2;
    // llff
    if (cfg.llff_pre_norm) n += LayerNorm::param_count(c);
    int wide = g * c, half = wide / 2;
    n += Conv2d::param_count(c, wide, 1, 1);
    n += Conv2d::param_count(half, half, 3, half);
    n += Conv2d::param_count(half, c, 1, 1);
    return n;
}

uint64_t lss_block_mac_count(const BlockSettings& cfg, int h, int w) {
    int c = cfg.width, cc = cfg.core_width();
    int dqk = cfg.d_qk, dv = cfg.resolved_d_v();
    int m = cfg.window_size, g = cfg.llff_expansion;
    uint64_t hw = static_cast<uint64_t>(h) * w;
    uint64_t n = 0;
    int n_branch_runs_spe = cfg.use_spe ? 1 : 0;
    int n_branch_runs_spa = cfg.use_spa ? 1 : 0;
    if (n_branch_runs_spe) {
        n += Conv2d::mac_count(c, cc, 1, 1, h, w);
        n += 3ull * hw * cc * cc;                                   // projections
        n += 2ull * hw * cc * cc / static_cast<uint64_t>(cfg.heads);  // core
        n += Conv2d::mac_count(cc, c, 1, 1, h, w);
    }
    if (n_branch_runs_spa) {
        n += Conv2d::mac_count(c, cc, 1, 1, h, w);
        uint64_t nh = static_cast<uint64_t>((h + m - 1) / m), nw = static_cast<uint64_t>((w + m - 1) / m);
        uint64_t nwin = nh * nw;
        uint64_t m2 = static_cast<uint64_t>(m) * m;
        n += nwin * m2 * cc * (2ull * dqk + dv);        // window projections
        n += nwin * (m2 * m2 * dqk + m2 * m2 * dv);     // core
        n += Conv2d::mac_count(dv, c, 1, 1, h, w);
    }
    if (cfg.use_llff) {
        int wide = g * c, half = wide / 2;
        n += Conv2d::mac_count(c, wide, 1, 1, h, w);
        n += Conv2d::mac_count(half, half, 3, half, h, w);
        n += Conv2d::mac_count(half, c, 1, 1, h, w);
    }
    return n;
}

}  // namespace hsir
