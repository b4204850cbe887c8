#include "hsir/model.hpp"

namespace hsir {

StageSettings ModelConfig::stage_settings() const {
    StageSettings s;
    s.embed_dim = embed_dim;
    s.n_basis = n_basis;
    s.basis_depths = basis_depths;
    s.abundance_depths = abundance_depths;
    s.bottleneck_depth = bottleneck_depth;
    s.window_size = window_size;
    s.subspace_factor = subspace_factor;
    s.d_qk = d_qk;
    s.d_v = d_v;
    s.heads = heads;
    s.llff_expansion = llff_expansion;
    s.llff_pre_norm = llff_pre_norm;
    s.use_spe = use_spe;
    s.use_spa = use_spa;
    s.use_llff = use_llff;
    s.arrangement = arrangement;
    s.skip_merge = skip_merge;
    return s;
}

void ModelConfig::validate() const {
    if (channels < 1) throw ConfigError("channels must be >= 1");
    if (n_stages < 1) throw ConfigError("n_stages must be >= 1");
    if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
    if (sr_scale != 4 && sr_scale != 8) throw ConfigError("sr_scale must be 4 or 8");
    stage_settings().validate();
}

ModelConfig apply_ablation(const ModelConfig& cfg, std::string* warning) {
    if (warning) warning->clear();
    if (!cfg.use_spe && !cfg.use_spa && !cfg.use_llff && warning)
        *warning = "both attention branches and the feed-forward are disabled; "
                   "the model reduces to convolutions only";
    return cfg;
}

Model::Model(ModelConfig c, uint64_t sd) : cfg(std::move(c)), seed(sd) {
    cfg.validate();
    Rng rng(derive_seed(seed, 0));
    in_conv = make_conv(params, "in_conv", cfg.input_channels(), cfg.embed_dim, 3, 1, 1,
                        ops::Pad::Reflect, 1, rng);
    StageSettings ss = cfg.stage_settings();
    for (int i = 0; i < cfg.n_stages; ++i)
        stages.push_back(make_stage(params, "stage" + std::to_string(i), ss, rng));
    out_conv = make_conv(params, "out_conv", cfg.embed_dim, cfg.channels, 3, 1, 1,
                         ops::Pad::Reflect, 1, rng);
}

Var Model::forward(const Var& x) const {
    int s = cfg.operating_size();
    int h = x.val().dim(1), w = x.val().dim(2);
    if (x.val().dim(0) != cfg.input_channels())
        throw ConfigError("forward: expected " + std::to_string(cfg.input_channels()) +
                          " input channels, got " + std::to_string(x.val().dim(0)));
    if (h > s)
        throw ConfigError("forward: height " + std::to_string(h) + " exceeds the operating size " +
                          std::to_string(s) + " fixed by basis_depths/n_basis");
    if (w > s)
        throw ConfigError("forward: width " + std::to_string(w) + " exceeds the operating size " +
                          std::to_string(s) + " fixed by basis_depths/n_basis");
    bool padded = (h < s || w < s);
    Var z = padded ? reflect_pad_br(x, s - h, s - w) : x;
    z = in_conv(z);
    for (const auto& st : stages) z = stage_forward(z, st);
    z = out_conv(z);
    return padded ? crop_tl(z, h, w) : z;
}

Tensor Model::assemble_input(const Tensor& cube, const Tensor* mask) const {
    if (!cfg.mask_channel) return cube;
    int c = cube.dim(0), h = cube.dim(1), w = cube.dim(2);
    Tensor out({c + 1, h, w});
    std::copy(cube.data(), cube.data() + cube.numel(), out.data());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double frac = 1.0;
            if (mask) {
                double s = 0.0;
                for (int ch = 0; ch < c; ++ch) s += mask->at(ch, y, x);
                frac = s / c;
            }
            out.at(c, y, x) = frac;
        }
    return out;
}

Tensor Model::forward(const Tensor& cube, const Tensor* mask) const {
    NoGradGuard ng;
    return forward(Var(assemble_input(cube, mask))).val();
}

Model build_model(const ModelConfig& cfg, uint64_t seed) { return Model(cfg, seed); }

int64_t count_parameters(const ModelConfig& cfg) {
    cfg.validate();
    int64_t n = Conv2d::param_count(cfg.input_channels(), cfg.embed_dim, 3, 1);
    n += static_cast<int64_t>(cfg.n_stages) * stage_param_count(cfg.stage_settings());
    n += Conv2d::param_count(cfg.embed_dim, cfg.channels, 3, 1);
    return n;
}

uint64_t count_macs(const ModelConfig& cfg, int h, int w) {
    cfg.validate();
    int s = cfg.operating_size();
    if (h > s || w > s)
        throw ConfigError("count_macs: input exceeds operating size " + std::to_string(s));
    uint64_t n = Conv2d::mac_count(cfg.input_channels(), cfg.embed_dim, 3, 1, s, s);
    n += static_cast<uint64_t>(cfg.n_stages) * stage_mac_count(cfg.stage_settings());
    n += Conv2d::mac_count(cfg.embed_dim, cfg.channels, 3, 1, s, s);
    return n;
}

int64_t count_parameters_dense_reference(const ModelConfig& cfg) {
    int64_t n = Conv2d::param_count(cfg.input_channels(), cfg.embed_dim, 3, 1);
    n += static_cast<int64_t>(cfg.n_stages) * stage_param_count_dense(cfg.stage_settings());
    n += Conv2d::param_count(cfg.embed_dim, cfg.channels, 3, 1);
    return n;
}

uint64_t count_macs_dense_reference(const ModelConfig& cfg, int h, int w) {
    int s = cfg.operating_size();
    if (h > s || w > s)
        throw ConfigError("count_macs: input exceeds operating size " + std::to_string(s));
    uint64_t n = Conv2d::mac_count(cfg.input_channels(), cfg.embed_dim, 3, 1, s, s);
    n += static_cast<uint64_t>(cfg.n_stages) * stage_mac_count_dense(cfg.stage_settings());
    n += Conv2d::mac_count(cfg.embed_dim, cfg.channels, 3, 1, s, s);
    return n;
}

}  // namespace hsir
