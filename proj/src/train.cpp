#include "hsir/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hsir/checkpoint.hpp"

namespace hsir {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (lr_min < 0.0 || lr_min > lr_max) throw ConfigError("train: need 0 <= lr_min <= lr_max");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
        throw ConfigError("train: betas must lie in [0,1)");
    if (weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
    if (val_fraction < 0 || val_fraction >= 1) throw ConfigError("train: val_fraction in [0,1)");
}

double l1_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "l1_loss");
    double acc = 0.0;
    for (int64_t i = 0; i < pred.numel(); ++i) acc += std::abs(pred[i] - target[i]);
    return acc / static_cast<double>(pred.numel());
}

double cosine_lr(int64_t t, int64_t total, double lr_max, double lr_min) {
    if (t < 0) throw ConfigError("cosine_lr: negative step");
    if (total < 1 || t >= total) return lr_min;
    double phase = 3.14159265358979323846 * static_cast<double>(t) / static_cast<double>(total);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

OptimizerState OptimizerState::init(const ParamRegistry& params) {
    OptimizerState s;
    for (const auto& it : params.items) {
        s.m.emplace_back(it.second.val().dims());
        s.v.emplace_back(it.second.val().dims());
    }
    return s;
}

void optimizer_step(ParamRegistry& params, OptimizerState& opt, double lr,
                    const TrainConfig& cfg) {
    if (opt.m.size() != params.items.size())
        throw ConfigError("optimizer state does not match parameter registry");

    // Validate gradients first so a bad step leaves parameters untouched.
    for (auto& [name, p] : params.items) {
        if (!p.has_grad()) continue;
        if (!p.grad().all_finite())
            throw NumericError("non-finite gradient in parameter '" + name + "'");
    }

    double clip_scale = 1.0;
    if (cfg.grad_clip > 0) {
        double sq = 0.0;
        for (auto& [name, p] : params.items) {
            if (!p.has_grad()) continue;
            const Tensor& g = p.grad();
            for (int64_t i = 0; i < g.numel(); ++i) sq += g[i] * g[i];
        }
        double norm = std::sqrt(sq);
        if (norm > cfg.grad_clip) clip_scale = cfg.grad_clip / norm;
    }

    opt.t += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.t));
    for (size_t i = 0; i < params.items.size(); ++i) {
        Var& p = params.items[i].second;
        Tensor& val = p.mutable_val();
        Tensor& m = opt.m[i];
        Tensor& v = opt.v[i];
        bool has_g = p.has_grad();
        for (int64_t k = 0; k < val.numel(); ++k) {
            double g = has_g ? p.grad()[k] * clip_scale : 0.0;
            val[k] *= 1.0 - lr * cfg.weight_decay;  // decoupled shrinkage
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
            double mh = m[k] / bc1;
            double vh = v[k] / bc2;
            val[k] -= lr * mh / (std::sqrt(vh) + cfg.eps);
        }
    }
}

std::vector<TrainSample> build_dataset(const std::vector<Tensor>& clean,
                                       const DegradationSpec& task) {
    std::vector<TrainSample> out;
    out.reserve(clean.size());
    for (size_t i = 0; i < clean.size(); ++i) {
        DegradationSpec per = task;
        per.seed = derive_seed(task.seed, i);
        DegradedSample d = apply_degradation(clean[i], per);
        TrainSample s;
        s.degraded = std::move(d.degraded);
        s.clean = clean[i];
        s.mask = std::move(d.mask);
        s.has_mask = d.has_mask;
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

MetricsReport validation_report(const Model& model, const std::vector<TrainSample>& data,
                                const std::vector<size_t>& idx) {
    MetricsReport acc;
    if (idx.empty()) return acc;
    for (size_t i : idx) {
        const TrainSample& s = data[i];
        Tensor pred = model.forward(s.degraded, s.has_mask ? &s.mask : nullptr);
        MetricsReport r;
        r.mpsnr = mpsnr(s.clean, pred);
        r.sam = sam_degrees(s.clean, pred);
        // SSIM needs at least the 11x11 window; skip on smaller crops.
        if (s.clean.dim(1) >= 11 && s.clean.dim(2) >= 11) r.mssim = mssim(s.clean, pred);
        acc.mpsnr += r.mpsnr;
        acc.mssim += r.mssim;
        acc.sam += r.sam;
    }
    acc.mpsnr /= static_cast<double>(idx.size());
    acc.mssim /= static_cast<double>(idx.size());
    acc.sam /= static_cast<double>(idx.size());
    return acc;
}

}  // namespace

TrainHistory train(Model& model, const std::vector<TrainSample>& data, const TrainConfig& cfg,
                   const std::string& run_dir, OptimizerState* opt_state) {
    cfg.validate();
    if (data.empty()) throw ConfigError("train: empty dataset");
    for (const auto& s : data)
        if (s.clean.dim(0) != model.cfg.channels)
            throw ConfigError("train: sample has " + std::to_string(s.clean.dim(0)) +
                              " bands, model expects " + std::to_string(model.cfg.channels));

    size_t n_val = static_cast<size_t>(cfg.val_fraction * static_cast<double>(data.size()));
    if (n_val + 1 > data.size()) n_val = data.size() - 1;
    std::vector<size_t> train_idx, val_idx;
    for (size_t i = 0; i < data.size() - n_val; ++i) train_idx.push_back(i);
    for (size_t i = data.size() - n_val; i < data.size(); ++i) val_idx.push_back(i);
    if (val_idx.empty()) val_idx.push_back(0);  // desk scale: validate on the training cube

    OptimizerState local_opt;
    OptimizerState& opt = opt_state ? *opt_state : local_opt;
    if (opt.m.empty()) opt = OptimizerState::init(model.params);

    int64_t steps_per_epoch =
        static_cast<int64_t>((train_idx.size() + cfg.batch_size - 1) / cfg.batch_size);
    int64_t total_steps = steps_per_epoch * cfg.epochs;
    int start_epoch = static_cast<int>(model.step / steps_per_epoch);

    TrainHistory hist;
    std::ofstream table;
    if (!run_dir.empty()) {
        std::filesystem::create_directories(run_dir);
        bool fresh = (start_epoch == 0);
        table.open(run_dir + "/metrics.txt", fresh ? std::ios::trunc : std::ios::app);
        if (fresh) table << "epoch\tlr\ttrain_l1\tval_mpsnr\tval_mssim\tval_sam\n";
    }

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        // Deterministic, seed-derived order; independent of prior epochs.
        std::vector<size_t> order = train_idx;
        std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, 0xE0000 + static_cast<uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        int64_t epoch_batches = 0;
        double lr = cfg.lr_max;
        for (size_t b0 = 0; b0 < order.size(); b0 += static_cast<size_t>(cfg.batch_size)) {
            size_t b1 = std::min(order.size(), b0 + static_cast<size_t>(cfg.batch_size));
            int nb = static_cast<int>(b1 - b0);
            model.params.zero_grads();
            double batch_loss = 0.0;
            for (size_t k = b0; k < b1; ++k) {
                const TrainSample& s = data[order[k]];
                Var x(model.assemble_input(s.degraded, s.has_mask ? &s.mask : nullptr));
                Var pred = model.forward(x);
                Var loss = mean_abs_diff(pred, s.clean);
                batch_loss += loss.val()[0];
                scale_const(loss, 1.0 / nb).backward();
            }
            batch_loss /= nb;
            if (!std::isfinite(batch_loss)) {
                hist.halted = true;
                hist.halt_reason = "non-finite loss at step " + std::to_string(model.step);
                if (table) table.flush();
                return hist;  // last good checkpoint (if any) stays on disk
            }
            lr = cosine_lr(model.step, total_steps, cfg.lr_max, cfg.lr_min);
            optimizer_step(model.params, opt, lr, cfg);
            model.step += 1;
            hist.step_losses.push_back(batch_loss);
            epoch_loss += batch_loss;
            ++epoch_batches;
        }

        EpochRow row;
        row.epoch = epoch;
        row.lr = lr;
        row.train_l1 = epoch_loss / static_cast<double>(std::max<int64_t>(1, epoch_batches));
        MetricsReport vr = validation_report(model, data, val_idx);
        row.val_mpsnr = vr.mpsnr;
        row.val_mssim = vr.mssim;
        row.val_sam = vr.sam;
        hist.epochs.push_back(row);
        if (table) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%d\t%.8g\t%.8g\t%.4f\t%.4f\t%.4f\n", row.epoch, row.lr,
                          row.train_l1, row.val_mpsnr, row.val_mssim, row.val_sam);
            table << buf;
            table.flush();
        }
        if (!run_dir.empty() && cfg.checkpoint_every > 0 &&
            ((epoch + 1) % cfg.checkpoint_every == 0 || epoch + 1 == cfg.epochs)) {
            char name[64];
            std::snprintf(name, sizeof name, "/ckpt_epoch%06d.bin", epoch + 1);
            save_checkpoint(run_dir + name, model, &opt);
            save_checkpoint(run_dir + "/ckpt_latest.bin", model, &opt);
        }
    }
    return hist;
}

}  // namespace hsir
