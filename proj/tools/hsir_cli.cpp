#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "hsir/checkpoint.hpp"
#include "hsir/config_io.hpp"
#include "hsir/cube_io.hpp"
#include "hsir/degrade.hpp"
#include "hsir/metrics.hpp"
#include "hsir/train.hpp"

namespace fs = std::filesystem;
using namespace hsir;

namespace {

struct DegradeArgs {
    std::string task, in, out, spec_path, mask_out;
    double sigma = -1.0;
    bool blind = false, clip = false;
    int scale = 0;
    uint64_t seed = 0;
    bool seed_set = false;
};

void degrade_one(const DegradationSpec& spec, const std::string& in, const std::string& out,
                 const std::string& mask_out) {
    Tensor x = read_cube(in);
    switch (spec.kind) {
        case DegradationKind::Noise: {
            double sigma = spec.blind ? draw_blind_sigma(spec.blind_min, spec.blind_max, spec.seed)
                                      : spec.sigma_8bit;
            write_cube(out, add_gaussian_noise(x, sigma, spec.seed, spec.clip));
            std::printf("sigma=%.6f\n", sigma);
            break;
        }
        case DegradationKind::Stripes: {
            auto [corrupted, mask] = apply_stripes(x, spec.stripes, spec.seed);
            write_cube(out, corrupted);
            if (!mask_out.empty()) write_cube(mask_out, mask.mask);
            break;
        }
        case DegradationKind::Downsample: {
            write_cube(out, downsample_cube(x, spec.scale));
            break;
        }
    }
    std::printf("wrote %s\n", out.c_str());
}

int cmd_degrade(const DegradeArgs& a) {
    DegradationSpec spec;
    if (!a.spec_path.empty()) {
        std::ifstream f(a.spec_path);
        if (!f) throw DataError("cannot open spec '" + a.spec_path + "'");
        std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        spec = degradation_spec_from_json(text);
    }
    if (a.task == "noise") spec.kind = DegradationKind::Noise;
    else if (a.task == "stripes") spec.kind = DegradationKind::Stripes;
    else if (a.task == "sr") spec.kind = DegradationKind::Downsample;
    else throw ConfigError("unknown task '" + a.task + "' (noise|stripes|sr)");
    if (a.sigma >= 0) spec.sigma_8bit = a.sigma;
    if (a.blind) spec.blind = true;
    if (a.clip) spec.clip = true;
    if (a.scale) spec.scale = a.scale;
    if (a.seed_set) spec.seed = a.seed;

    if (fs::is_directory(a.in)) {
        // directory mode: per-file streams derived from (seed, index)
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(a.in)) {
            std::string p = e.path().filename().string();
            if (p.size() > 5 && p.substr(p.size() - 5) == ".cube") names.push_back(p);
        }
        std::sort(names.begin(), names.end());
        if (names.empty()) throw DataError("no *.cube files in '" + a.in + "'");
        fs::create_directories(a.out);
        if (!a.mask_out.empty()) fs::create_directories(a.mask_out);
        for (size_t i = 0; i < names.size(); ++i) {
            DegradationSpec per = spec;
            per.seed = derive_seed(spec.seed, i);
            degrade_one(per, a.in + "/" + names[i], a.out + "/" + names[i],
                        a.mask_out.empty() ? "" : a.mask_out + "/" + names[i]);
        }
        return 0;
    }
    degrade_one(spec, a.in, a.out, a.mask_out);
    return 0;
}

std::vector<Tensor> load_cube_dir(const std::string& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string p = e.path().string();
        if (p.size() > 5 && p.substr(p.size() - 5) == ".cube") names.push_back(p);
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw DataError("no *.cube files in '" + dir + "'");
    std::vector<Tensor> cubes;
    for (const auto& n : names) cubes.push_back(read_cube(n));
    return cubes;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& run_dir, const std::string& resume) {
    RunConfig rc = load_run_config(config_path);
    std::vector<Tensor> clean = load_cube_dir(data_dir);
    if (rc.model.channels != clean[0].dim(0)) {
        std::fprintf(stderr, "note: adopting the data band count %d (config said %d)\n",
                     clean[0].dim(0), rc.model.channels);
        rc.model.channels = clean[0].dim(0);
    }
    std::vector<TrainSample> data = build_dataset(clean, rc.train.task);

    std::string warning;
    ModelConfig mc = apply_ablation(rc.model, &warning);
    if (!warning.empty()) std::fprintf(stderr, "warning: %s\n", warning.c_str());

    OptimizerState opt;
    Model model = resume.empty() ? build_model(mc, rc.train.seed)
                                 : load_model(read_checkpoint(resume), &opt);

    fs::create_directories(run_dir);
    std::ofstream snap(run_dir + "/config.json");
    snap << run_config_to_json(rc) << "\n";
    snap.close();

    TrainHistory hist = train(model, data, rc.train, run_dir, &opt);
    if (hist.halted) {
        std::fprintf(stderr, "training halted: %s\n", hist.halt_reason.c_str());
        return 3;
    }
    save_checkpoint(run_dir + "/ckpt_latest.bin", model, &opt);
    if (!hist.epochs.empty()) {
        const EpochRow& last = hist.epochs.back();
        std::printf("epochs=%zu final_l1=%.6g val_mpsnr=%.4f\n", hist.epochs.size(), last.train_l1,
                    last.val_mpsnr);
    }
    std::printf("run dir: %s\n", run_dir.c_str());
    return 0;
}

int cmd_restore(const std::string& ckpt, const std::string& in, const std::string& out,
                const std::string& mask_path) {
    Model model = load_model(read_checkpoint(ckpt));
    Tensor x = read_cube(in);
    if (x.dim(0) != model.cfg.channels)
        throw ConfigError("input has " + std::to_string(x.dim(0)) + " bands, checkpoint expects " +
                          std::to_string(model.cfg.channels));
    if (model.cfg.task == Task::Superres) x = bicubic_upsample(x, model.cfg.sr_scale);
    Tensor mask;
    const Tensor* mask_ptr = nullptr;
    if (!mask_path.empty()) {
        mask = read_cube(mask_path);
        mask_ptr = &mask;
    }
    Tensor y = model.forward(x, mask_ptr);
    write_cube(out, y);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_evaluate(const std::string& ref_path, const std::string& test_path,
                 const std::string& out) {
    Tensor ref = read_cube(ref_path);
    Tensor test = read_cube(test_path);
    MetricsReport r = evaluate_metrics(ref, test);
    std::printf("mpsnr=%.6f\nmssim=%.6f\nsam=%.6f\n", r.mpsnr, r.mssim, r.sam);
    if (!out.empty()) {
        std::ofstream f(out);
        if (!f) throw DataError("cannot write report '" + out + "'");
        f << report_text(r);
        f << "row\t" << report_row(r) << "\n";
    }
    return 0;
}

int cmd_benchmark(const std::string& ckpt, const std::string& in, int repeat) {
    Model model = load_model(read_checkpoint(ckpt));
    Tensor x = read_cube(in);
    if (model.cfg.task == Task::Superres) x = bicubic_upsample(x, model.cfg.sr_scale);
    model.forward(x);  // warm-up
    std::vector<double> ms;
    for (int i = 0; i < repeat; ++i) {
        auto t0 = std::chrono::steady_clock::now();
        Tensor y = model.forward(x);
        auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        (void)y;
    }
    double mean = 0, mn = ms[0], mx = ms[0];
    for (double v : ms) {
        mean += v;
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    mean /= static_cast<double>(ms.size());
    double var = 0;
    for (double v : ms) var += (v - mean) * (v - mean);
    var /= static_cast<double>(ms.size());
    std::printf("repeat=%d mean_ms=%.3f min_ms=%.3f max_ms=%.3f std_ms=%.3f\n", repeat, mean, mn,
                mx, std::sqrt(var));
    return 0;
}

int cmd_preview(const std::string& in, const std::string& bands, const std::string& out) {
    Tensor x = read_cube(in);
    int b[3] = {0, 0, 0};
    if (std::sscanf(bands.c_str(), "%d,%d,%d", &b[0], &b[1], &b[2]) != 3)
        throw ConfigError("--bands must be r,g,b indices");
    write_preview_ppm(out, x, b[0], b[1], b[2]);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_count(const std::string& config_path, const std::string& hw) {
    RunConfig rc = load_run_config(config_path);
    const ModelConfig& mc = rc.model;
    int s = mc.operating_size();
    int h = s, w = s;
    if (!hw.empty() && std::sscanf(hw.c_str(), "%dx%d", &h, &w) != 2)
        throw ConfigError("--hw must look like 64x64");
    int64_t p = count_parameters(mc);
    int64_t pd = count_parameters_dense_reference(mc);
    uint64_t m = count_macs(mc, h, w);
    uint64_t md = count_macs_dense_reference(mc, h, w);
    std::printf("operating_size=%d\n", s);
    std::printf("parameters=%lld\n", static_cast<long long>(p));
    std::printf("parameters_dense_reference=%lld\n", static_cast<long long>(pd));
    std::printf("parameter_ratio=%.6f\n", static_cast<double>(p) / static_cast<double>(pd));
    std::printf("macs=%llu\n", static_cast<unsigned long long>(m));
    std::printf("macs_dense_reference=%llu\n", static_cast<unsigned long long>(md));
    std::printf("mac_ratio=%.6f\n", static_cast<double>(m) / static_cast<double>(md));
    std::printf("# MACs cover convolutions, attention projections and attention cores at the\n");
    std::printf("# padded operating size; spectral cores count 2*H*W*C^2 (logits + mixing),\n");
    std::printf("# window cores count N*M^4*(d_qk + d_v).\n");
    return 0;
}

int cmd_synth(const std::string& out, const std::string& spec_path, uint64_t seed, int size,
              int bands_n, int order, int count) {
    SyntheticSceneSpec spec;
    if (!spec_path.empty()) {
        RunConfig rc = load_run_config(spec_path);
        spec = rc.scene;
    }
    if (seed) spec.seed = seed;
    if (size) spec.size = size;
    if (bands_n) spec.bands = bands_n;
    if (order) spec.mixture_order = order;
    if (count <= 1) {
        write_cube(out, synth_scene(spec));
        std::printf("wrote %s\n", out.c_str());
    } else {
        fs::create_directories(out);
        for (int i = 0; i < count; ++i) {
            SyntheticSceneSpec s = spec;
            s.seed = derive_seed(spec.seed, static_cast<uint64_t>(i));
            char name[64];
            std::snprintf(name, sizeof name, "/scene_%04d.cube", i);
            write_cube(out + name, synth_scene(s));
        }
        std::printf("wrote %d scenes under %s\n", count, out.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyperspectral image restoration toolkit"};
    app.require_subcommand(1);

    DegradeArgs da;
    auto* degrade = app.add_subcommand("degrade", "corrupt a cube (noise, stripes, or downsample)");
    degrade->add_option("--task", da.task, "noise|stripes|sr")->required();
    degrade->add_option("--in", da.in, "input cube")->required();
    degrade->add_option("--out", da.out, "output cube")->required();
    degrade->add_option("--spec", da.spec_path, "degradation spec JSON");
    degrade->add_option("--sigma", da.sigma, "noise sigma (8-bit units)");
    degrade->add_flag("--blind", da.blind, "draw sigma uniformly from [30,70]");
    degrade->add_flag("--clip", da.clip, "clamp noisy output to [0,1]");
    degrade->add_option("--scale", da.scale, "downsampling factor (4 or 8)");
    auto* seed_opt = degrade->add_option("--seed", da.seed, "RNG seed");
    degrade->add_option("--mask", da.mask_out, "write the corruption mask here");

    std::string tr_config, tr_data, tr_out, tr_resume;
    auto* train_cmd = app.add_subcommand("train", "train on a directory of clean cubes");
    train_cmd->add_option("--config", tr_config, "run config JSON")->required();
    train_cmd->add_option("--data", tr_data, "directory of *.cube files")->required();
    train_cmd->add_option("--out", tr_out, "run directory")->required();
    train_cmd->add_option("--resume", tr_resume, "checkpoint to resume from");

    std::string rs_ckpt, rs_in, rs_out, rs_mask;
    auto* restore = app.add_subcommand("restore", "run a trained model on a cube");
    restore->add_option("--checkpoint", rs_ckpt)->required();
    restore->add_option("--in", rs_in)->required();
    restore->add_option("--out", rs_out)->required();
    restore->add_option("--mask", rs_mask, "corruption mask (mask-channel models)");

    std::string ev_ref, ev_test, ev_out;
    auto* evaluate = app.add_subcommand("evaluate", "MPSNR / MSSIM / SAM between two cubes");
    evaluate->add_option("--ref", ev_ref)->required();
    evaluate->add_option("--test", ev_test)->required();
    evaluate->add_option("--out", ev_out, "report file");

    std::string bm_ckpt, bm_in;
    int bm_repeat = 5;
    auto* benchmark = app.add_subcommand("benchmark", "forward-pass wall-clock statistics");
    benchmark->add_option("--checkpoint", bm_ckpt)->required();
    benchmark->add_option("--in", bm_in)->required();
    benchmark->add_option("--repeat", bm_repeat, "number of timed runs");

    std::string pv_in, pv_bands = "0,0,0", pv_out;
    auto* preview = app.add_subcommand("preview", "8-bit RGB preview (PPM) from three bands");
    preview->add_option("--in", pv_in)->required();
    preview->add_option("--bands", pv_bands, "r,g,b band indices");
    preview->add_option("--out", pv_out)->required();

    std::string ct_config, ct_hw;
    auto* count = app.add_subcommand("count", "parameter and MAC report");
    count->add_option("--config", ct_config)->required();
    count->add_option("--hw", ct_hw, "input size HxW (default: operating size)");

    std::string sy_out, sy_spec;
    uint64_t sy_seed = 0;
    int sy_size = 0, sy_bands = 0, sy_order = 0, sy_count = 1;
    auto* synth = app.add_subcommand("synth", "generate smooth low-rank synthetic scenes");
    synth->add_option("--out", sy_out, "output cube (or directory with --count)")->required();
    synth->add_option("--spec", sy_spec, "run config JSON with a scene section");
    synth->add_option("--seed", sy_seed);
    synth->add_option("--size", sy_size);
    synth->add_option("--bands", sy_bands);
    synth->add_option("--order", sy_order, "mixture order");
    synth->add_option("--count", sy_count, "number of scenes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*degrade) {
            da.seed_set = seed_opt->count() > 0;
            return cmd_degrade(da);
        }
        if (*train_cmd) return cmd_train(tr_config, tr_data, tr_out, tr_resume);
        if (*restore) return cmd_restore(rs_ckpt, rs_in, rs_out, rs_mask);
        if (*evaluate) return cmd_evaluate(ev_ref, ev_test, ev_out);
        if (*benchmark) return cmd_benchmark(bm_ckpt, bm_in, bm_repeat);
        if (*preview) return cmd_preview(pv_in, pv_bands, pv_out);
        if (*count) return cmd_count(ct_config, ct_hw);
        if (*synth) return cmd_synth(sy_out, sy_spec, sy_seed, sy_size, sy_bands, sy_order, sy_count);
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
