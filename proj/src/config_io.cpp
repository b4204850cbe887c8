#include "hsir/config_io.hpp"

#include <fstream>

#include "json.hpp"

namespace hsir {

using nlohmann::json;

namespace {

std::string task_name(Task t) {
    switch (t) {
        case Task::Denoise: return "denoise";
        case Task::Inpaint: return "inpaint";
        case Task::Superres: return "superres";
    }
    return "denoise";
}
Task task_from(const std::string& s) {
    if (s == "denoise") return Task::Denoise;
    if (s == "inpaint") return Task::Inpaint;
    if (s == "superres" || s == "sr") return Task::Superres;
    throw DataError("unknown task '" + s + "'");
}

std::string arrangement_name(Arrangement a) {
    switch (a) {
        case Arrangement::Parallel: return "parallel";
        case Arrangement::SpeThenSpa: return "spe_then_spa";
        case Arrangement::SpaThenSpe: return "spa_then_spe";
    }
    return "parallel";
}
Arrangement arrangement_from(const std::string& s) {
    if (s == "parallel") return Arrangement::Parallel;
    if (s == "spe_then_spa") return Arrangement::SpeThenSpa;
    if (s == "spa_then_spe") return Arrangement::SpaThenSpe;
    throw DataError("unknown arrangement '" + s + "'");
}

std::string kind_name(DegradationKind k) {
    switch (k) {
        case DegradationKind::Noise: return "noise";
        case DegradationKind::Stripes: return "stripes";
        case DegradationKind::Downsample: return "downsample";
    }
    return "noise";
}
DegradationKind kind_from(const std::string& s) {
    if (s == "noise") return DegradationKind::Noise;
    if (s == "stripes") return DegradationKind::Stripes;
    if (s == "downsample" || s == "sr") return DegradationKind::Downsample;
    throw DataError("unknown degradation kind '" + s + "'");
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json model_to_j(const ModelConfig& c) {
    json j;
    j["channels"] = c.channels;
    j["embed_dim"] = c.embed_dim;
    j["n_stages"] = c.n_stages;
    j["task"] = task_name(c.task);
    j["n_basis"] = c.n_basis;
    j["basis_depths"] = c.basis_depths;
    j["abundance_depths"] = c.abundance_depths;
    j["bottleneck_depth"] = c.bottleneck_depth;
    j["window_size"] = c.window_size;
    j["skip_merge"] = (c.skip_merge == SkipMerge::Concat) ? "concat" : "add";
    j["subspace_factor"] = c.subspace_factor;
    j["llff_expansion"] = c.llff_expansion;
    j["llff_pre_norm"] = c.llff_pre_norm;
    j["d_qk"] = c.d_qk;
    j["d_v"] = c.d_v;
    j["heads"] = c.heads;
    j["use_spe"] = c.use_spe;
    j["use_spa"] = c.use_spa;
    j["use_llff"] = c.use_llff;
    j["arrangement"] = arrangement_name(c.arrangement);
    j["mask_channel"] = c.mask_channel;
    j["sr_scale"] = c.sr_scale;
    return j;
}

ModelConfig model_from_j(const json& j) {
    ModelConfig c;
    get_if(j, "channels", c.channels);
    get_if(j, "embed_dim", c.embed_dim);
    get_if(j, "n_stages", c.n_stages);
    if (j.contains("task")) c.task = task_from(j.at("task").get<std::string>());
    get_if(j, "n_basis", c.n_basis);
    get_if(j, "basis_depths", c.basis_depths);
    get_if(j, "abundance_depths", c.abundance_depths);
    get_if(j, "bottleneck_depth", c.bottleneck_depth);
    get_if(j, "window_size", c.window_size);
    if (j.contains("skip_merge"))
        c.skip_merge = (j.at("skip_merge").get<std::string>() == "add") ? SkipMerge::Add
                                                                        : SkipMerge::Concat;
    get_if(j, "subspace_factor", c.subspace_factor);
    get_if(j, "llff_expansion", c.llff_expansion);
    get_if(j, "llff_pre_norm", c.llff_pre_norm);
    get_if(j, "d_qk", c.d_qk);
    get_if(j, "d_v", c.d_v);
    get_if(j, "heads", c.heads);
    get_if(j, "use_spe", c.use_spe);
    get_if(j, "use_spa", c.use_spa);
    get_if(j, "use_llff", c.use_llff);
    if (j.contains("arrangement"))
        c.arrangement = arrangement_from(j.at("arrangement").get<std::string>());
    get_if(j, "mask_channel", c.mask_channel);
    get_if(j, "sr_scale", c.sr_scale);
    return c;
}

json degradation_to_j(const DegradationSpec& s) {
    json j;
    j["kind"] = kind_name(s.kind);
    j["sigma"] = s.sigma_8bit;
    j["blind"] = s.blind;
    j["blind_min"] = s.blind_min;
    j["blind_max"] = s.blind_max;
    j["clip"] = s.clip;
    j["scale"] = s.scale;
    j["seed"] = s.seed;
    json st;
    st["n_groups"] = {s.stripes.n_groups_min, s.stripes.n_groups_max};
    st["width"] = {s.stripes.width_min, s.stripes.width_max};
    st["band_span"] = {s.stripes.band_span_min, s.stripes.band_span_max};
    st["n_missing"] = {s.stripes.n_missing_min, s.stripes.n_missing_max};
    st["missing_len"] = {s.stripes.missing_len_min, s.stripes.missing_len_max};
    st["orientation"] =
        (s.stripes.orientation == StripeOrientation::Vertical) ? "vertical" : "horizontal";
    j["stripes"] = st;
    return j;
}

void range_from(const json& j, const char* key, int& lo, int& hi, bool allow_auto_max = false) {
    if (!j.contains(key)) return;
    auto a = j.at(key);
    if (!a.is_array() || a.size() != 2) throw DataError(std::string("range '") + key + "' must be [min,max]");
    lo = a[0].get<int>();
    hi = a[1].get<int>();
    if (allow_auto_max && hi == 0) return;  // 0 = derived from the cube at apply time
    if (hi < lo) throw DataError(std::string("range '") + key + "' is empty");
}

DegradationSpec degradation_from_j(const json& j) {
    DegradationSpec s;
    if (j.contains("kind")) s.kind = kind_from(j.at("kind").get<std::string>());
    get_if(j, "sigma", s.sigma_8bit);
    get_if(j, "blind", s.blind);
    get_if(j, "blind_min", s.blind_min);
    get_if(j, "blind_max", s.blind_max);
    get_if(j, "clip", s.clip);
    get_if(j, "scale", s.scale);
    get_if(j, "seed", s.seed);
    if (j.contains("stripes")) {
        const json& st = j.at("stripes");
        range_from(st, "n_groups", s.stripes.n_groups_min, s.stripes.n_groups_max);
        range_from(st, "width", s.stripes.width_min, s.stripes.width_max);
        range_from(st, "band_span", s.stripes.band_span_min, s.stripes.band_span_max, true);
        range_from(st, "n_missing", s.stripes.n_missing_min, s.stripes.n_missing_max);
        range_from(st, "missing_len", s.stripes.missing_len_min, s.stripes.missing_len_max);
        if (st.contains("orientation"))
            s.stripes.orientation = (st.at("orientation").get<std::string>() == "horizontal")
                                        ? StripeOrientation::Horizontal
                                        : StripeOrientation::Vertical;
    }
    return s;
}

json train_to_j(const TrainConfig& c) {
    json j;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["lr_max"] = c.lr_max;
    j["lr_min"] = c.lr_min;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["weight_decay"] = c.weight_decay;
    j["eps"] = c.eps;
    j["grad_clip"] = c.grad_clip;
    j["seed"] = c.seed;
    j["val_fraction"] = c.val_fraction;
    j["checkpoint_every"] = c.checkpoint_every;
    return j;
}

TrainConfig train_from_j(const json& j) {
    TrainConfig c;
    get_if(j, "epochs", c.epochs);
    get_if(j, "batch_size", c.batch_size);
    get_if(j, "lr_max", c.lr_max);
    get_if(j, "lr_min", c.lr_min);
    get_if(j, "beta1", c.beta1);
    get_if(j, "beta2", c.beta2);
    get_if(j, "weight_decay", c.weight_decay);
    get_if(j, "eps", c.eps);
    get_if(j, "grad_clip", c.grad_clip);
    get_if(j, "seed", c.seed);
    get_if(j, "val_fraction", c.val_fraction);
    get_if(j, "checkpoint_every", c.checkpoint_every);
    return c;
}

json scene_to_j(const SyntheticSceneSpec& s) {
    json j;
    j["seed"] = s.seed;
    j["size"] = s.size;
    j["bands"] = s.bands;
    j["mixture_order"] = s.mixture_order;
    j["spatial_smoothness"] = s.spatial_smoothness;
    j["spectral_smoothness"] = s.spectral_smoothness;
    return j;
}

SyntheticSceneSpec scene_from_j(const json& j) {
    SyntheticSceneSpec s;
    get_if(j, "seed", s.seed);
    get_if(j, "size", s.size);
    get_if(j, "bands", s.bands);
    get_if(j, "mixture_order", s.mixture_order);
    get_if(j, "spatial_smoothness", s.spatial_smoothness);
    get_if(j, "spectral_smoothness", s.spectral_smoothness);
    return s;
}

json parse(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid JSON: ") + e.what());
    }
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) { return model_to_j(cfg).dump(2); }

ModelConfig model_config_from_json(const std::string& text) {
    try {
        return model_from_j(parse(text));
    } catch (const json::exception& e) {
        throw DataError(std::string("bad model config: ") + e.what());
    }
}

std::string degradation_spec_to_json(const DegradationSpec& spec) {
    return degradation_to_j(spec).dump(2);
}

DegradationSpec degradation_spec_from_json(const std::string& text) {
    try {
        return degradation_from_j(parse(text));
    } catch (const json::exception& e) {
        throw DataError(std::string("bad degradation spec: ") + e.what());
    }
}

RunConfig run_config_from_json(const std::string& text) {
    json j = parse(text);
    if (j.contains("format_version") && j.at("format_version").get<int>() != 1)
        throw DataError("unsupported config format_version");
    RunConfig rc;
    try {
        if (j.contains("model")) rc.model = model_from_j(j.at("model"));
        if (j.contains("train")) rc.train = train_from_j(j.at("train"));
        if (j.contains("degradation")) rc.degradation = degradation_from_j(j.at("degradation"));
        if (j.contains("scene")) rc.scene = scene_from_j(j.at("scene"));
    } catch (const json::exception& e) {
        throw DataError(std::string("bad run config: ") + e.what());
    }
    rc.train.task = rc.degradation;
    return rc;
}

std::string run_config_to_json(const RunConfig& rc) {
    json j;
    j["format_version"] = 1;
    j["model"] = model_to_j(rc.model);
    j["train"] = train_to_j(rc.train);
    j["degradation"] = degradation_to_j(rc.degradation);
    j["scene"] = scene_to_j(rc.scene);
    return j.dump(2);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open config file '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return run_config_from_json(text);
}

}  // namespace hsir
