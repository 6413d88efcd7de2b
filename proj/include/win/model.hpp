#pragma once

// Assembles WIN variants from layer specs, runs the full forward/backward
// pass and evaluates the training loss.
//
// Three target modes:
//   direct          - the network output is the clean-image estimate
//   residual_skip   - the network output R(y) is added to the input by a skip
//                     connection; y + R(y) is the clean-image estimate
//   residual_target - the network output T(y) estimates the noise itself and
//                     is trained against the precomputed residual y - x;
//                     the clean-image estimate is y - T(y)

#include <cstdint>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "win/nn.hpp"
#include "win/rng.hpp"
#include "win/tensor.hpp"

namespace win {

enum class TargetMode { direct, residual_skip, residual_target };

inline const char* to_string(TargetMode m) {
    switch (m) {
        case TargetMode::direct: return "direct";
        case TargetMode::residual_skip: return "residual_skip";
        case TargetMode::residual_target: return "residual_target";
    }
    return "?";
}

inline TargetMode target_mode_from_string(const std::string& s) {
    if (s == "direct") return TargetMode::direct;
    if (s == "residual_skip") return TargetMode::residual_skip;
    if (s == "residual_target") return TargetMode::residual_target;
    throw std::invalid_argument("unknown target mode: " + s);
}

struct LayerSpec {
    std::int64_t filters = 1;
    std::int64_t kernel = 3;
    bool bn = false;
    bool relu = true;
};

struct ModelSpec {
    std::vector<LayerSpec> layers;
    bool skip = false;
    TargetMode target = TargetMode::direct;
    std::int64_t image_channels = 1;

    void validate() const {
        if (layers.size() < 2) throw std::invalid_argument("ModelSpec: at least 2 layers required");
        for (const LayerSpec& l : layers) {
            if (l.filters < 1) throw std::invalid_argument("ModelSpec: filter count must be >= 1");
            if (l.kernel < 1 || l.kernel % 2 == 0) {
                throw std::invalid_argument("ModelSpec: kernel size must be odd, got " +
                                            std::to_string(l.kernel));
            }
        }
        if (layers.back().filters != image_channels) {
            throw std::invalid_argument("ModelSpec: last layer must have " +
                                        std::to_string(image_channels) + " filter(s)");
        }
        if (layers.back().relu) {
            throw std::invalid_argument("ModelSpec: last layer must not have ReLU");
        }
        if (target == TargetMode::residual_skip && !skip) {
            throw std::invalid_argument("ModelSpec: residual_skip target requires skip=true");
        }
    }

    bool any_bn() const {
        for (const LayerSpec& l : layers)
            if (l.bn) return true;
        return false;
    }
};

// Parametric WIN: L-1 layers of KxF (ReLU), one final layer of image_channels
// x F without ReLU. BN on every layer when requested.
inline ModelSpec win_spec(std::int64_t depth, std::int64_t filters, std::int64_t kernel,
                          bool bn, bool skip, TargetMode target) {
    if (depth < 2) throw std::invalid_argument("win_spec: depth must be >= 2");
    ModelSpec spec;
    spec.skip = skip;
    spec.target = target;
    for (std::int64_t i = 0; i + 1 < depth; ++i) {
        spec.layers.push_back(LayerSpec{filters, kernel, bn, true});
    }
    spec.layers.push_back(LayerSpec{spec.image_channels, kernel, bn, false});
    return spec;
}

// Named presets for the published architectures (at full width) plus the
// tapering-width variant with 128-filter first layers and 64-filter middle.
inline ModelSpec model_preset(const std::string& name) {
    if (name == "win5") return win_spec(5, 128, 7, false, false, TargetMode::direct);
    if (name == "win5_r") return win_spec(5, 128, 7, false, true, TargetMode::residual_skip);
    if (name == "win5_rb") return win_spec(5, 128, 7, true, true, TargetMode::residual_skip);
    if (name == "win5_taper") {
        ModelSpec spec;
        spec.layers = {LayerSpec{128, 7, false, true}, LayerSpec{128, 7, false, true},
                       LayerSpec{64, 7, false, true}, LayerSpec{64, 7, false, true},
                       LayerSpec{1, 7, false, false}};
        return spec;
    }
    throw std::invalid_argument("unknown model preset: " + name);
}

// Layer list codec shared by config files and checkpoint headers:
// comma-separated "KxF" entries, with a trailing 'b' for batch-normalized
// layers, e.g. "128x7b,128x7b,1x7b". ReLU placement is structural (all
// layers except the last).
inline std::string format_layer_specs(const std::vector<LayerSpec>& layers) {
    std::string out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(layers[i].filters) + "x" + std::to_string(layers[i].kernel);
        if (layers[i].bn) out += 'b';
    }
    return out;
}

inline std::vector<LayerSpec> parse_layer_specs(const std::string& text) {
    std::vector<LayerSpec> layers;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find(',', pos);
        if (end == std::string::npos) end = text.size();
        std::string entry = text.substr(pos, end - pos);
        pos = end + 1;
        if (entry.empty()) throw std::invalid_argument("layer list: empty entry");
        bool bn = false;
        if (entry.back() == 'b') {
            bn = true;
            entry.pop_back();
        }
        const std::size_t x = entry.find('x');
        if (x == std::string::npos) {
            throw std::invalid_argument("layer list: expected KxF, got '" + entry + "'");
        }
        LayerSpec l;
        try {
            l.filters = std::stoll(entry.substr(0, x));
            l.kernel = std::stoll(entry.substr(x + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("layer list: bad entry '" + entry + "'");
        }
        l.bn = bn;
        layers.push_back(l);
    }
    if (layers.empty()) throw std::invalid_argument("layer list: no layers");
    for (LayerSpec& l : layers) l.relu = true;
    layers.back().relu = false;
    return layers;
}

struct LayerParams {
    ConvParams conv;
    BnParams bn;  // meaningful only when spec layer has bn
};

struct LayerGrads {
    Tensor4 dweights;
    std::vector<double> dbias;
    std::vector<double> dgamma;  // empty when the layer has no BN
    std::vector<double> dbeta;
};

struct Grads {
    std::vector<LayerGrads> layers;
};

struct LayerFwdCache {
    Tensor4 conv_in;
    BnCache bn;
    Tensor4 relu_in;
};

struct ForwardCache {
    std::vector<LayerFwdCache> layers;
};

class Model {
public:
    Model() = default;

    // Parameters are initialized deterministically from the seed: weights from
    // a zero-mean Gaussian with std sqrt(2/(C_in*F*F)), biases 0, gamma 1,
    // beta 0.
    Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
        spec_.validate();
        if (spec_.any_bn() && !spec_.skip) {
            std::cerr << "warning: BN without an input-to-output skip connection is prone to "
                         "severe overfitting; configuration kept for diagnostics\n";
        }
        Rng rng(seed, streams::init);
        std::int64_t c_in = spec_.image_channels;
        for (const LayerSpec& l : spec_.layers) {
            LayerParams p;
            p.conv.weights = Tensor4(Shape{l.filters, c_in, l.kernel, l.kernel});
            const double stddev =
                std::sqrt(2.0 / static_cast<double>(c_in * l.kernel * l.kernel));
            for (std::size_t i = 0; i < p.conv.weights.size(); ++i) {
                p.conv.weights[i] = stddev * rng.gaussian();
            }
            p.conv.bias.assign(static_cast<std::size_t>(l.filters), 0.0);
            if (l.bn) p.bn = BnParams::make(l.filters);
            layers_.push_back(std::move(p));
            c_in = l.filters;
        }
    }

    const ModelSpec& spec() const { return spec_; }
    std::vector<LayerParams>& layers() { return layers_; }
    const std::vector<LayerParams>& layers() const { return layers_; }

    // Learnable parameter count: conv weights and biases plus gamma/beta for
    // BN layers. Running statistics are buffers, not parameters.
    std::int64_t param_count() const {
        std::int64_t total = 0;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const LayerParams& p = layers_[i];
            total += p.conv.weights.shape().count() +
                     static_cast<std::int64_t>(p.conv.bias.size());
            if (spec_.layers[i].bn) total += 2 * spec_.layers[i].filters;
        }
        return total;
    }

    // Train-mode forward: batch statistics for BN (running stats updated),
    // every intermediate needed by backward captured in `cache`.
    Tensor4 forward_train(const Tensor4& y, ForwardCache& cache) {
        cache.layers.assign(layers_.size(), LayerFwdCache{});
        Tensor4 cur = y;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const LayerSpec& l = spec_.layers[i];
            LayerFwdCache& lc = cache.layers[i];
            lc.conv_in = cur;
            cur = conv2d_forward(cur, layers_[i].conv, (l.kernel - 1) / 2);
            if (l.bn) cur = bn_forward_train(cur, layers_[i].bn, lc.bn);
            if (l.relu) {
                lc.relu_in = cur;
                cur = relu_forward(cur);
            }
        }
        return apply_target_mode(y, std::move(cur));
    }

    // Inference-mode forward: BN uses running statistics; deterministic and
    // independent of batch composition.
    Tensor4 forward_infer(const Tensor4& y) const {
        return apply_target_mode(y, network_output_infer(y));
    }

    // Raw network output (R(y) or T(y) or the direct estimate), before any
    // skip/target handling.
    Tensor4 network_output_infer(const Tensor4& y) const {
        Tensor4 cur = y;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const LayerSpec& l = spec_.layers[i];
            cur = conv2d_forward(cur, layers_[i].conv, (l.kernel - 1) / 2);
            if (l.bn) cur = bn_forward_infer(cur, layers_[i].bn);
            if (l.relu) cur = relu_forward(cur);
        }
        return cur;
    }

    // Clean-image estimate before clamping.
    Tensor4 denoise_raw(const Tensor4& y) const {
        Tensor4 pred = forward_infer(y);
        if (spec_.target == TargetMode::residual_target) return sub(y, pred);
        return pred;
    }

    // Clean-image estimate clamped to [0,1]; what metrics are computed on.
    Tensor4 denoise(const Tensor4& y) const { return clamp01(denoise_raw(y)); }

    // Loss: squared Frobenius norm per image, summed over the batch, with the
    // 1/(2N) factor:
    //   loss = 1/(2N) * sum_i ||pred_i - target_i||^2
    // The norm sums over pixels. Gradients therefore scale with patch area,
    // which is exactly the regime the 0.1 gradient clip is sized for.
    double loss_and_grad(const Tensor4& y_batch, const Tensor4& x_batch, Grads& grads) {
        check_same_shape(y_batch, x_batch, "loss_and_grad");
        ForwardCache cache;
        Tensor4 pred = forward_train(y_batch, cache);

        const Shape s = y_batch.shape();
        const double n_images = static_cast<double>(s.n);

        Tensor4 target = spec_.target == TargetMode::residual_target ? sub(y_batch, x_batch)
                                                                     : x_batch;
        double loss = 0.0;
        Tensor4 dpred(s);
        const double inv = 1.0 / n_images;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = pred[i] - target[i];
            loss += d * d;
            dpred[i] = d * inv;
        }
        loss *= 0.5 * inv;

        backward(cache, dpred, grads);
        return loss;
    }

private:
    Tensor4 apply_target_mode(const Tensor4& y, Tensor4 net_out) const {
        if (spec_.skip) return skip_add(y, net_out);
        return net_out;
    }

    // The skip connection passes the prediction gradient to the network branch
    // unchanged, so backprop starts from dpred in every target mode.
    void backward(const ForwardCache& cache, const Tensor4& dpred, Grads& grads) {
        grads.layers.assign(layers_.size(), LayerGrads{});
        Tensor4 g = dpred;
        for (std::size_t idx = layers_.size(); idx-- > 0;) {
            const LayerSpec& l = spec_.layers[idx];
            const LayerFwdCache& lc = cache.layers[idx];
            LayerGrads& lg = grads.layers[idx];
            if (l.relu) g = relu_backward(lc.relu_in, g);
            if (l.bn) {
                BnGrads bg = bn_backward(lc.bn, layers_[idx].bn, g);
                lg.dgamma = std::move(bg.dgamma);
                lg.dbeta = std::move(bg.dbeta);
                g = std::move(bg.dinput);
            }
            ConvGrads cg = conv2d_backward(lc.conv_in, layers_[idx].conv, (l.kernel - 1) / 2, g);
            lg.dweights = std::move(cg.dweights);
            lg.dbias = std::move(cg.dbias);
            g = std::move(cg.dinput);
        }
    }

    ModelSpec spec_;
    std::vector<LayerParams> layers_;
};

}  // namespace win
