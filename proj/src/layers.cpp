#include "meshae/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace meshae {

BatchNormState BatchNormState::init(Eigen::Index channels, double epsilon, double momentum) {
    BatchNormState s;
    s.gamma = VecX::Ones(channels);
    s.beta = VecX::Zero(channels);
    s.running_mean = VecX::Zero(channels);
    s.running_var = VecX::Ones(channels);
    s.epsilon = epsilon;
    s.momentum = momentum;
    return s;
}

MatX batch_norm_forward(const MatX& features, const BatchNormState& state, bool train,
                        BatchNormCache* cache, BatchNormObs* obs) {
    const Eigen::Index n = features.rows();
    const Eigen::Index c = features.cols();
    if (state.gamma.size() != c) throw std::runtime_error("batch_norm: channel mismatch");

    VecX mean(c), var(c), inv_std(c);
    if (train) {
        if (n < 2) throw std::runtime_error("batch_norm: train mode needs at least 2 rows");
        mean = features.colwise().mean().transpose();
        for (Eigen::Index j = 0; j < c; ++j)
            var(j) = (features.col(j).array() - mean(j)).square().sum() / static_cast<double>(n);
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }
    for (Eigen::Index j = 0; j < c; ++j) inv_std(j) = 1.0 / std::sqrt(var(j) + state.epsilon);

    MatX xhat = features;
    for (Eigen::Index j = 0; j < c; ++j)
        xhat.col(j) = (xhat.col(j).array() - mean(j)) * inv_std(j);

    MatX out = xhat;
    for (Eigen::Index j = 0; j < c; ++j)
        out.col(j) = out.col(j).array() * state.gamma(j) + state.beta(j);

    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = inv_std;
        cache->gamma = state.gamma;
        cache->train = train;
    }
    if (obs && train) {
        obs->mean = mean;
        // unbiased variance for the running estimate
        obs->var = var * (static_cast<double>(n) / static_cast<double>(n - 1));
    }
    return out;
}

void batch_norm_backward(const BatchNormCache& cache, const MatX& upstream, MatX* grad_features,
                         VecX* grad_gamma, VecX* grad_beta) {
    const MatX& xhat = cache.xhat;
    const Eigen::Index n = xhat.rows();
    const Eigen::Index c = xhat.cols();
    if (upstream.rows() != n || upstream.cols() != c)
        throw std::runtime_error("batch_norm_backward: shape mismatch");

    if (grad_gamma) *grad_gamma = (upstream.array() * xhat.array()).colwise().sum().transpose();
    if (grad_beta) *grad_beta = upstream.colwise().sum().transpose();
    if (!grad_features) return;

    if (!cache.train) {
        // eval mode: y = gamma * (x - mu_run) * inv_std_run + beta
        MatX gx = upstream;
        for (Eigen::Index j = 0; j < c; ++j)
            gx.col(j) = gx.col(j).array() * (cache.gamma(j) * cache.inv_std(j));
        *grad_features = std::move(gx);
        return;
    }

    // dx = inv_std/N * (N*dxh - sum(dxh) - xhat * sum(dxh .* xhat))
    MatX dxh = upstream;
    for (Eigen::Index j = 0; j < c; ++j) dxh.col(j) = dxh.col(j).array() * cache.gamma(j);
    VecX sum_dxh = dxh.colwise().sum().transpose();
    VecX sum_dxh_xhat = (dxh.array() * xhat.array()).colwise().sum().transpose();

    MatX gx(n, c);
    const double dn = static_cast<double>(n);
    for (Eigen::Index j = 0; j < c; ++j) {
        gx.col(j) = (cache.inv_std(j) / dn) *
                    (dn * dxh.col(j).array() - sum_dxh(j) - xhat.col(j).array() * sum_dxh_xhat(j));
    }
    *grad_features = std::move(gx);
}

void update_running_stats(BatchNormState& state, const BatchNormObs& obs) {
    if (obs.mean.size() == 0) return;
    state.running_mean = (1.0 - state.momentum) * state.running_mean + state.momentum * obs.mean;
    state.running_var = (1.0 - state.momentum) * state.running_var + state.momentum * obs.var;
    for (Eigen::Index j = 0; j < state.running_mean.size(); ++j) {
        state.running_mean(j) = to_f32(state.running_mean(j));
        state.running_var(j) = to_f32(state.running_var(j));
    }
}

MatX relu_forward(const MatX& features) { return features.cwiseMax(0.0); }

MatX relu_backward(const MatX& forward_input, const MatX& upstream) {
    return (forward_input.array() > 0.0).cast<double>() * upstream.array();
}

double mse_loss(const MatX& predicted, const MatX& target, MatX* grad_predicted) {
    if (predicted.rows() != target.rows() || predicted.cols() != target.cols())
        throw std::runtime_error("mse_loss: shape mismatch");
    const double n = static_cast<double>(predicted.size());
    MatX diff = predicted - target;
    double loss = diff.array().square().sum() / n;
    if (grad_predicted) *grad_predicted = diff * (2.0 / n);
    return loss;
}

AdamState AdamState::like(const MatX& param) {
    AdamState s;
    s.m = MatX::Zero(param.rows(), param.cols());
    s.v = MatX::Zero(param.rows(), param.cols());
    return s;
}

void adam_step(MatX& param, const MatX& grad, AdamState& state, const AdamConfig& cfg,
               int64_t step) {
    if (param.rows() != grad.rows() || param.cols() != grad.cols())
        throw std::runtime_error("adam_step: shape mismatch");
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    state.m = b1 * state.m + (1.0 - b1) * grad;
    state.v = b2 * state.v.array() + (1.0 - b2) * grad.array().square();
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (Eigen::Index i = 0; i < param.size(); ++i) {
        double mhat = state.m.data()[i] / corr1;
        double vhat = state.v.data()[i] / corr2;
        param.data()[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

} // namespace meshae
