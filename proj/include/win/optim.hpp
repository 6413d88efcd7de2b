#pragma once

// SGD with momentum, weight decay, global gradient-norm clipping and a step
// learning-rate schedule.
//
// Update rule per parameter p with gradient g and velocity v:
//   v <- momentum*v + (g + weight_decay*p)
//   p <- p - lr*v
// Weight decay applies to conv weights and to gamma/beta, never to biases.
// BN running statistics are buffers and are never touched here.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "win/model.hpp"

namespace win {

struct OptimConfig {
    double base_lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double clip = 0.1;           // global L2-norm threshold
    std::int64_t step_size = 30; // epochs between LR drops
    double gamma = 0.1;          // LR multiplier per drop
    std::int64_t batch_size = 64;

    void validate() const {
        if (base_lr <= 0.0) throw std::invalid_argument("OptimConfig: base_lr must be > 0");
        if (momentum < 0.0 || momentum >= 1.0) {
            throw std::invalid_argument("OptimConfig: momentum must be in [0,1)");
        }
        if (weight_decay < 0.0) throw std::invalid_argument("OptimConfig: weight_decay must be >= 0");
        if (clip <= 0.0) throw std::invalid_argument("OptimConfig: clip must be > 0");
        if (gamma <= 0.0 || gamma > 1.0) throw std::invalid_argument("OptimConfig: gamma must be in (0,1]");
        if (step_size < 1) throw std::invalid_argument("OptimConfig: step_size must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("OptimConfig: batch_size must be >= 1");
    }
};

struct LayerVelocity {
    Tensor4 weights;
    std::vector<double> bias;
    std::vector<double> gamma;
    std::vector<double> beta;
};

struct OptimState {
    std::vector<LayerVelocity> velocity;
    std::int64_t epoch = 0;
    double lr = 0.0;

    static OptimState make(const Model& model, const OptimConfig& cfg) {
        OptimState st;
        st.lr = cfg.base_lr;
        for (std::size_t i = 0; i < model.layers().size(); ++i) {
            const LayerParams& p = model.layers()[i];
            LayerVelocity v;
            v.weights = Tensor4(p.conv.weights.shape());
            v.bias.assign(p.conv.bias.size(), 0.0);
            if (model.spec().layers[i].bn) {
                v.gamma.assign(p.bn.gamma.size(), 0.0);
                v.beta.assign(p.bn.beta.size(), 0.0);
            }
            st.velocity.push_back(std::move(v));
        }
        return st;
    }
};

// Step schedule: base_lr * gamma^floor(epoch / step_size).
inline double lr_at(std::int64_t epoch, const OptimConfig& cfg) {
    if (epoch < 0) throw std::invalid_argument("lr_at: epoch must be >= 0");
    return cfg.base_lr * std::pow(cfg.gamma, static_cast<double>(epoch / cfg.step_size));
}

inline double global_grad_norm(const Grads& grads) {
    double sq = 0.0;
    for (const LayerGrads& lg : grads.layers) {
        for (std::size_t i = 0; i < lg.dweights.size(); ++i) sq += lg.dweights[i] * lg.dweights[i];
        for (double g : lg.dbias) sq += g * g;
        for (double g : lg.dgamma) sq += g * g;
        for (double g : lg.dbeta) sq += g * g;
    }
    return std::sqrt(sq);
}

// If the global L2 norm exceeds the threshold, scale every gradient by
// clip/norm; otherwise leave them untouched.
inline void clip_gradients(Grads& grads, double clip) {
    if (clip <= 0.0) throw std::invalid_argument("clip_gradients: clip must be > 0");
    const double norm = global_grad_norm(grads);
    if (norm <= clip) return;
    const double s = clip / norm;
    for (LayerGrads& lg : grads.layers) {
        for (std::size_t i = 0; i < lg.dweights.size(); ++i) lg.dweights[i] *= s;
        for (double& g : lg.dbias) g *= s;
        for (double& g : lg.dgamma) g *= s;
        for (double& g : lg.dbeta) g *= s;
    }
}

namespace detail {
inline void sgd_update(double& param, double grad, double& vel, double lr, double momentum,
                       double decay) {
    vel = momentum * vel + (grad + decay * param);
    param -= lr * vel;
}
}  // namespace detail

inline void sgd_step(Model& model, const Grads& grads, OptimState& state,
                     const OptimConfig& cfg) {
    if (grads.layers.size() != model.layers().size()) {
        throw std::invalid_argument("sgd_step: gradient/layer count mismatch");
    }
    const double lr = state.lr, mom = cfg.momentum, wd = cfg.weight_decay;
    for (std::size_t i = 0; i < model.layers().size(); ++i) {
        LayerParams& p = model.layers()[i];
        const LayerGrads& lg = grads.layers[i];
        LayerVelocity& v = state.velocity[i];

        check_same_shape(p.conv.weights, lg.dweights, "sgd_step");
        for (std::size_t j = 0; j < p.conv.weights.size(); ++j) {
            detail::sgd_update(p.conv.weights[j], lg.dweights[j], v.weights[j], lr, mom, wd);
        }
        if (lg.dbias.size() != p.conv.bias.size()) {
            throw std::invalid_argument("sgd_step: bias gradient size mismatch");
        }
        for (std::size_t j = 0; j < p.conv.bias.size(); ++j) {
            detail::sgd_update(p.conv.bias[j], lg.dbias[j], v.bias[j], lr, mom, 0.0);
        }
        if (!lg.dgamma.empty()) {
            for (std::size_t j = 0; j < p.bn.gamma.size(); ++j) {
                detail::sgd_update(p.bn.gamma[j], lg.dgamma[j], v.gamma[j], lr, mom, wd);
                detail::sgd_update(p.bn.beta[j], lg.dbeta[j], v.beta[j], lr, mom, wd);
            }
        }
    }
}

}  // namespace win
