#pragma once

#include "meshae/geometry.hpp"

namespace meshae {

/// Batch normalization state. gamma/beta are learnable; running stats are
/// tracked with an exponential moving average and used in eval mode.
struct BatchNormState {
    VecX gamma, beta;
    VecX running_mean, running_var;
    double epsilon = 1e-5;
    double momentum = 0.1; // running = (1-momentum)*running + momentum*batch

    static BatchNormState init(Eigen::Index channels, double epsilon = 1e-5,
                               double momentum = 0.1);
};

struct BatchNormCache {
    MatX xhat;
    VecX inv_std;
    VecX gamma;
    bool train = true;
};

/// Observed batch statistics, reported so the caller can fold them into the
/// running stats in a deterministic order (see update_running_stats).
struct BatchNormObs {
    VecX mean, var; // var is the unbiased estimate used for the running update
};

/// Train mode normalizes per channel over all rows of the batch; eval mode
/// uses the running statistics. Train mode requires >= 2 rows. The state is
/// not mutated here; pass obs to update_running_stats afterwards.
MatX batch_norm_forward(const MatX& features, const BatchNormState& state, bool train,
                        BatchNormCache* cache = nullptr, BatchNormObs* obs = nullptr);

void batch_norm_backward(const BatchNormCache& cache, const MatX& upstream, MatX* grad_features,
                         VecX* grad_gamma, VecX* grad_beta);

/// EMA update of the running statistics; results are rounded to the f32 grid
/// (running stats live in the checkpoint's f32 payload).
void update_running_stats(BatchNormState& state, const BatchNormObs& obs);

MatX relu_forward(const MatX& features);
MatX relu_backward(const MatX& forward_input, const MatX& upstream);

/// Mean over all entries of the squared difference; gradient w.r.t. predicted
/// is 2(p - t)/N with N the total entry count.
double mse_loss(const MatX& predicted, const MatX& target, MatX* grad_predicted = nullptr);

/// Adam hyperparameters; the spec's source leaves them unstated, these are the
/// conventional defaults.
struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    MatX m, v; // first/second moment accumulators, zero-initialized

    static AdamState like(const MatX& param);
};

/// One Adam update with bias correction; `step` is the 1-based step count
/// after this update.
void adam_step(MatX& param, const MatX& grad, AdamState& state, const AdamConfig& cfg,
               int64_t step);

} // namespace meshae
