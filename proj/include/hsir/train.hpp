#pragma once

#include <string>
#include <vector>

#include "hsir/degrade.hpp"
#include "hsir/metrics.hpp"
#include "hsir/model.hpp"

namespace hsir {

struct TrainConfig {
    int epochs = 300;
    int batch_size = 8;
    double lr_max = 3e-4;
    double lr_min = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.01;
    double eps = 1e-8;
    double grad_clip = 0.0;  // global-norm clip; 0 disables
    uint64_t seed = 0;
    DegradationSpec task;
    double val_fraction = 0.05;
    int checkpoint_every = 1;  // epochs; 0 disables periodic checkpoints

    void validate() const;
};

/// Mean absolute difference over all voxels.
double l1_loss(const Tensor& pred, const Tensor& target);

/// lr_min + 0.5*(lr_max-lr_min)*(1+cos(pi*t/T)); t past T clamps to lr_min.
double cosine_lr(int64_t t, int64_t total, double lr_max, double lr_min);

/// Decoupled-weight-decay adaptive moments, one accumulator pair per
/// parameter tensor, in registry order.
struct OptimizerState {
    std::vector<Tensor> m, v;
    int64_t t = 0;
    static OptimizerState init(const ParamRegistry& params);
};

/// One update: shrink by lr*weight_decay, then the bias-corrected adaptive
/// step using each parameter's accumulated gradient (absent gradient = 0).
/// Throws NumericError naming the parameter on a non-finite gradient.
void optimizer_step(ParamRegistry& params, OptimizerState& opt, double lr,
                    const TrainConfig& cfg);

struct TrainSample {
    Tensor degraded;
    Tensor clean;
    Tensor mask;
    bool has_mask = false;
};

/// Degrades each clean cube with a per-sample stream derived from
/// (task.seed, index).
std::vector<TrainSample> build_dataset(const std::vector<Tensor>& clean,
                                       const DegradationSpec& task);

struct EpochRow {
    int epoch = 0;
    double lr = 0.0;
    double train_l1 = 0.0;
    double val_mpsnr = 0.0, val_mssim = 0.0, val_sam = 0.0;
};

struct TrainHistory {
    std::vector<double> step_losses;
    std::vector<EpochRow> epochs;
    bool halted = false;
    std::string halt_reason;
};

/// Runs epochs x batches steps of L1 training with cosine annealing over the
/// whole horizon. When run_dir is non-empty, writes metrics.txt (one row per
/// epoch) and periodic checkpoints there. Resuming: a model whose step
/// counter sits at an epoch boundary continues from that epoch and
/// reproduces the uninterrupted run.
TrainHistory train(Model& model, const std::vector<TrainSample>& data, const TrainConfig& cfg,
                   const std::string& run_dir, OptimizerState* opt_state);

}  // namespace hsir
