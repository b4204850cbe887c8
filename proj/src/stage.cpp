#include "hsir/stage.hpp"

#include <cmath>

namespace hsir {

namespace {
int pad4(int s) { return (s % 4 == 0) ? s : (s / 4 + 1) * 4; }
}  // namespace

int StageSettings::sqrt_n_basis() const {
    int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_basis))));
    if (r * r != n_basis)
        throw ConfigError("n_basis=" + std::to_string(n_basis) + " must be a perfect square");
    return r;
}

int StageSettings::operating_size() const {
    int s = sqrt_n_basis();
    for (size_t i = 1; i < basis_depths.size(); ++i) s *= 4;
    return s;
}

void StageSettings::validate() const {
    if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
    if (n_basis < 1) throw ConfigError("n_basis must be >= 1");
    sqrt_n_basis();
    if (basis_depths.empty()) throw ConfigError("basis_depths must not be empty");
    for (int d : basis_depths)
        if (d < 0) throw ConfigError("basis depths must be >= 0");
    for (int d : abundance_depths)
        if (d < 0) throw ConfigError("abundance depths must be >= 0");
    if (bottleneck_depth < 0) throw ConfigError("bottleneck_depth must be >= 0");
    if (window_size < 1) throw ConfigError("window_size must be >= 1");
    if (subspace_factor < 1) throw ConfigError("subspace_factor must be >= 1");
    if (llff_expansion < 1) throw ConfigError("llff_expansion must be >= 1");
    int s = operating_size();
    for (size_t i = 0; i < abundance_depths.size(); ++i) {
        if (s < 1)
            throw ConfigError("abundance level " + std::to_string(i) +
                              " would act on an empty map; operating size " +
                              std::to_string(operating_size()) + " is too small");
        s = pad4(s) / 4;
    }
}

BlockSettings StageSettings::block_at(int width, int h, int w) const {
    BlockSettings b;
    b.width = width;
    int short_side = std::min(h, w);
    b.window_size = std::min(window_size, short_side);  // full-map window on small scales
    b.subspace_factor = subspace_factor;
    b.d_qk = d_qk;
    b.d_v = d_v;
    b.heads = heads;
    b.llff_expansion = llff_expansion;
    b.llff_pre_norm = llff_pre_norm;
    b.use_spe = use_spe;
    b.use_spa = use_spa;
    b.use_llff = use_llff;
    b.arrangement = arrangement;
    return b;
}

DownsampleParams make_downsample(ParamRegistry& reg, const std::string& prefix, int cin, int cout,
                                 Rng& rng) {
    DownsampleParams p;
    p.depthwise = make_conv(reg, prefix + ".dw", cin, cin, 4, 4, 0, ops::Pad::Zero, cin, rng);
    p.pointwise = make_conv(reg, prefix + ".pw", cin, cout, 1, 1, 0, ops::Pad::Zero, 1, rng);
    return p;
}

Var downsample(const Var& x, const DownsampleParams& p) {
    int h = x.val().dim(1), w = x.val().dim(2);
    Var z = x;
    if (h % 4 != 0 || w % 4 != 0) z = reflect_pad_br(z, pad4(h) - h, pad4(w) - w);
    z = p.depthwise(z);
    return p.pointwise(z);
}

Tensor downsample(const Tensor& x, const DownsampleParams& p) {
    NoGradGuard ng;
    return downsample(Var(x), p).val();
}

UpsampleParams make_upsample(ParamRegistry& reg, const std::string& prefix, int cin, Rng& rng) {
    if (cin % 2 != 0)
        throw ConfigError("upsample: channel count " + std::to_string(cin) + " must be even");
    UpsampleParams p;
    p.conv = make_conv(reg, prefix + ".conv", cin, 16 * (cin / 2), 3, 1, 1, ops::Pad::Reflect, 1,
                       rng);
    return p;
}

Var upsample(const Var& x, const UpsampleParams& p) {
    return pixel_shuffle(p.conv(x), 4);
}

Tensor upsample(const Tensor& x, const UpsampleParams& p) {
    NoGradGuard ng;
    return upsample(Var(x), p).val();
}

StageParams make_stage(ParamRegistry& reg, const std::string& prefix, const StageSettings& cfg,
                       Rng& rng) {
    cfg.validate();
    StageParams p;
    p.cfg = cfg;
    int e = cfg.embed_dim, nb = cfg.n_basis;
    int s0 = cfg.operating_size();

    // Basis branch: alternating blocks and /4 downsampling until sqrt(N_B).
    p.basis.proj_in = make_conv(reg, prefix + ".basis.proj_in", e, e, 1, 1, 0, ops::Pad::Zero, 1, rng);
    int s = s0;
    int n_scales = static_cast<int>(cfg.basis_depths.size());
    for (int i = 0; i < n_scales; ++i) {
        BasisScale sc;
        sc.size = s;
        for (int d = 0; d < cfg.basis_depths[static_cast<size_t>(i)]; ++d)
            sc.blocks.push_back(make_lss_block(
                reg, prefix + ".basis.s" + std::to_string(i) + ".b" + std::to_string(d),
                cfg.block_at(e, s, s), rng));
        p.basis.scales.push_back(std::move(sc));
        if (i + 1 < n_scales) {
            p.basis.downs.push_back(
                make_downsample(reg, prefix + ".basis.down" + std::to_string(i), e, e, rng));
            s /= 4;
        }
    }
    p.basis.final_conv = make_conv(reg, prefix + ".basis.final", e, e, 1, 1, 0, ops::Pad::Zero, 1, rng);

    // Abundance branch: U at widths N_B * 2^level.
    p.abundance.proj_in =
        make_conv(reg, prefix + ".abun.proj_in", e, nb, 1, 1, 0, ops::Pad::Zero, 1, rng);
    s = s0;
    int n_levels = static_cast<int>(cfg.abundance_depths.size());
    for (int lv = 0; lv < n_levels; ++lv) {
        AbundanceLevel level;
        level.width = nb << lv;
        level.size = s;
        level.padded_size = pad4(s);
        std::string lp = prefix + ".abun.l" + std::to_string(lv);
        for (int d = 0; d < cfg.abundance_depths[static_cast<size_t>(lv)]; ++d)
            level.enc_blocks.push_back(
                make_lss_block(reg, lp + ".enc" + std::to_string(d), cfg.block_at(level.width, s, s), rng));
        level.down = make_downsample(reg, lp + ".down", level.width, level.width * 2, rng);
        level.up = make_upsample(reg, lp + ".up", level.width * 2, rng);
        if (cfg.skip_merge == SkipMerge::Concat)
            level.merge = make_conv(reg, lp + ".merge", level.width * 2, level.width, 1, 1, 0,
                                    ops::Pad::Zero, 1, rng);
        for (int d = 0; d < cfg.abundance_depths[static_cast<size_t>(lv)]; ++d)
            level.dec_blocks.push_back(
                make_lss_block(reg, lp + ".dec" + std::to_string(d), cfg.block_at(level.width, s, s), rng));
        p.abundance.levels.push_back(std::move(level));
        s = pad4(s) / 4;
    }
    p.abundance.bottleneck_size = s;
    int bw = nb << n_levels;
    for (int d = 0; d < cfg.bottleneck_depth; ++d)
        p.abundance.bottleneck.push_back(make_lss_block(
            reg, prefix + ".abun.bott" + std::to_string(d), cfg.block_at(bw, s, s), rng));
    p.abundance.final_conv =
        make_conv(reg, prefix + ".abun.final", nb, nb, 3, 1, 1, ops::Pad::Reflect, 1, rng);
    return p;
}

Var basis_module(const Var& f, const StageParams& p) {
    Var z = p.basis.proj_in(f);
    for (size_t i = 0; i < p.basis.scales.size(); ++i) {
        for (const auto& blk : p.basis.scales[i].blocks) z = lss_block_forward(z, blk);
        if (i < p.basis.downs.size()) z = downsample(z, p.basis.downs[i]);
    }
    return p.basis.final_conv(z);
}

Tensor basis_module(const Tensor& f, const StageParams& p) {
    NoGradGuard ng;
    return basis_module(Var(f), p).val();
}

Var abundance_module(const Var& f, const StageParams& p) {
    Var z = p.abundance.proj_in(f);
    std::vector<Var> skips;
    for (const auto& level : p.abundance.levels) {
        for (const auto& blk : level.enc_blocks) z = lss_block_forward(z, blk);
        skips.push_back(z);
        z = downsample(z, level.down);
    }
    for (const auto& blk : p.abundance.bottleneck) z = lss_block_forward(z, blk);
    for (int lv = static_cast<int>(p.abundance.levels.size()) - 1; lv >= 0; --lv) {
        const auto& level = p.abundance.levels[static_cast<size_t>(lv)];
        z = upsample(z, level.up);
        if (z.val().dim(1) != level.size || z.val().dim(2) != level.size)
            z = crop_tl(z, level.size, level.size);
        const Var& skip = skips[static_cast<size_t>(lv)];
        if (p.cfg.skip_merge == SkipMerge::Concat)
            z = level.merge(concat_ch(z, skip));
        else
            z = add(z, skip);
        for (const auto& blk : level.dec_blocks) z = lss_block_forward(z, blk);
    }
    return p.abundance.final_conv(z);
}

Tensor abundance_module(const Tensor& f, const StageParams& p) {
    NoGradGuard ng;
    return abundance_module(Var(f), p).val();
}

Var stage_forward(const Var& f, const StageParams& p) {
    int e = p.cfg.embed_dim, s = p.cfg.operating_size();
    require_shape(f.val(), {e, s, s}, "stage input");
    Var b = basis_module(f, p);                         // (E, sqrt, sqrt)
    Var a = abundance_module(f, p);                     // (N_B, S, S)
    Var bm = reshape(b, {e, p.cfg.n_basis});
    Var am = reshape(a, {p.cfg.n_basis, s * s});
    Var update = matmul(bm, am);                        // (E, S*S), rank <= N_B
    return add(f, reshape(update, {e, s, s}));
}

Tensor stage_forward(const Tensor& f, const StageParams& p) {
    NoGradGuard ng;
    return stage_forward(Var(f), p).val();
}

// ---------------------------------------------------------------------------
// Analytic accounting (mirrors the construction arithmetic above exactly).
// ---------------------------------------------------------------------------

namespace {

int64_t downsample_params(int cin, int cout) {
    return Conv2d::param_count(cin, cin, 4, cin) + Conv2d::param_count(cin, cout, 1, 1);
}
uint64_t downsample_macs(int cin, int cout, int s) {
    int sp = pad4(s), so = sp / 4;
    return Conv2d::mac_count(cin, cin, 4, cin, so, so) + Conv2d::mac_count(cin, cout, 1, 1, so, so);
}
int64_t upsample_params(int cin) { return Conv2d::param_count(cin, 16 * (cin / 2), 3, 1); }
uint64_t upsample_macs(int cin, int s) { return Conv2d::mac_count(cin, 16 * (cin / 2), 3, 1, s, s); }

struct UWalk {
    int64_t params = 0;
    uint64_t macs = 0;
};

// Shared walk for the real abundance branch (base = N_B) and the dense
// reference (base = E).
UWalk u_branch_account(const StageSettings& cfg, int base_width) {
    UWalk r;
    int e = cfg.embed_dim;
    r.params += Conv2d::param_count(e, base_width, 1, 1);
    int s = cfg.operating_size();
    r.macs += Conv2d::mac_count(e, base_width, 1, 1, s, s);
    int n_levels = static_cast<int>(cfg.abundance_depths.size());
    std::vector<int> sizes;
    for (int lv = 0; lv < n_levels; ++lv) {
        int w = base_width << lv;
        BlockSettings bs = cfg.block_at(w, s, s);
        int depth = cfg.abundance_depths[static_cast<size_t>(lv)];
        r.params += 2ll * depth * lss_block_param_count(bs);  // encoder + decoder blocks
        r.macs += 2ull * static_cast<uint64_t>(depth) * lss_block_mac_count(bs, s, s);
        r.params += downsample_params(w, 2 * w);
        r.macs += downsample_macs(w, 2 * w, s);
        r.params += upsample_params(2 * w);
        if (cfg.skip_merge == SkipMerge::Concat) {
            r.params += Conv2d::param_count(2 * w, w, 1, 1);
            r.macs += Conv2d::mac_count(2 * w, w, 1, 1, s, s);
        }
        sizes.push_back(s);
        s = pad4(s) / 4;
    }
    int bw = base_width << n_levels;
    BlockSettings bb = cfg.block_at(bw, s, s);
    r.params += static_cast<int64_t>(cfg.bottleneck_depth) * lss_block_param_count(bb);
    r.macs += static_cast<uint64_t>(cfg.bottleneck_depth) * lss_block_mac_count(bb, s, s);
    // Upsample convs run at the level *below* each decoder target.
    int sb = s;
    for (int lv = n_levels - 1; lv >= 0; --lv) {
        int w = base_width << lv;
        r.macs += upsample_macs(2 * w, sb);
        sb = sizes[static_cast<size_t>(lv)];
    }
    r.params += Conv2d::param_count(base_width, base_width, 3, 1);
    r.macs += Conv2d::mac_count(base_width, base_width, 3, 1, cfg.operating_size(), cfg.operating_size());
    return r;
}

UWalk basis_account(const StageSettings& cfg) {
    UWalk r;
    int e = cfg.embed_dim;
    int s = cfg.operating_size();
    r.params += Conv2d::param_count(e, e, 1, 1);
    r.macs += Conv2d::mac_count(e, e, 1, 1, s, s);
    int n_scales = static_cast<int>(cfg.basis_depths.size());
    for (int i = 0; i < n_scales; ++i) {
        BlockSettings bs = cfg.block_at(e, s, s);
        int depth = cfg.basis_depths[static_cast<size_t>(i)];
        r.params += static_cast<int64_t>(depth) * lss_block_param_count(bs);
        r.macs += static_cast<uint64_t>(depth) * lss_block_mac_count(bs, s, s);
        if (i + 1 < n_scales) {
            r.params += downsample_params(e, e);
            r.macs += downsample_macs(e, e, s);
            s /= 4;
        }
    }
    r.params += Conv2d::param_count(e, e, 1, 1);
    r.macs += Conv2d::mac_count(e, e, 1, 1, s, s);
    return r;
}

}  // namespace

int64_t stage_param_count(const StageSettings& cfg) {
    return basis_account(cfg).params + u_branch_account(cfg, cfg.n_basis).params;
}

uint64_t stage_mac_count(const StageSettings& cfg) {
    int s = cfg.operating_size();
    uint64_t product = static_cast<uint64_t>(cfg.embed_dim) * cfg.n_basis * s * s;
    return basis_account(cfg).macs + u_branch_account(cfg, cfg.n_basis).macs + product;
}

int64_t stage_param_count_dense(const StageSettings& cfg) {
    return u_branch_account(cfg, cfg.embed_dim).params;
}

uint64_t stage_mac_count_dense(const StageSettings& cfg) {
    return u_branch_account(cfg, cfg.embed_dim).macs;
}

}  // namespace hsir
