#pragma once

// Forward and backward passes for the three layer kinds used by the WIN
// architectures: convolution, ReLU and batch normalization, plus the
// input-to-output skip connection. Backward passes are hand-written; there is
// no autodiff graph.
//
// Convolution is cross-correlation (no kernel flip) with zero padding.
// Two forward execution paths exist behind one entry point: a naive
// quadruple-loop and an im2col+matmul path. The naive path is the permanent
// in-tree oracle the optimized path is tested against.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "win/tensor.hpp"

namespace win {

struct ConvParams {
    Tensor4 weights;           // (K, C_in, F, F), F odd
    std::vector<double> bias;  // K

    std::int64_t filters() const { return weights.shape().n; }
    std::int64_t in_channels() const { return weights.shape().c; }
    std::int64_t kernel() const { return weights.shape().h; }

    void validate() const {
        const Shape& s = weights.shape();
        if (s.h != s.w) throw std::invalid_argument("ConvParams: kernel must be square");
        if (s.h % 2 == 0) throw std::invalid_argument("ConvParams: kernel size must be odd");
        if (static_cast<std::int64_t>(bias.size()) != s.n) {
            throw std::invalid_argument("ConvParams: bias length must equal filter count");
        }
    }
};

struct BnParams {
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double epsilon = 1e-5;
    double momentum = 0.1;     // running = (1-momentum)*running + momentum*batch
    bool stats_ready = false;  // set by the first train-mode pass or checkpoint load

    static BnParams make(std::int64_t channels) {
        BnParams p;
        p.gamma.assign(channels, 1.0);
        p.beta.assign(channels, 0.0);
        p.running_mean.assign(channels, 0.0);
        p.running_var.assign(channels, 1.0);
        return p;
    }

    std::int64_t channels() const { return static_cast<std::int64_t>(gamma.size()); }
};

struct ConvGrads {
    Tensor4 dweights;
    std::vector<double> dbias;
    Tensor4 dinput;
};

struct BnGrads {
    std::vector<double> dgamma;
    std::vector<double> dbeta;
    Tensor4 dinput;
};

// Cache from a train-mode BN forward, consumed by bn_backward.
struct BnCache {
    Tensor4 x_hat;
    std::vector<double> batch_mean;
    std::vector<double> batch_var;  // biased (population) estimator
    std::vector<double> invstd;
};

enum class ConvPath { naive, im2col };

namespace detail {

inline void check_conv_args(const Tensor4& x, const ConvParams& p, std::int64_t pad) {
    p.validate();
    if (x.shape().c != p.in_channels()) {
        throw std::invalid_argument("conv2d: input has " + std::to_string(x.shape().c) +
                                    " channels, kernel expects " +
                                    std::to_string(p.in_channels()));
    }
    if (pad < 0) throw std::invalid_argument("conv2d: negative padding");
    const std::int64_t f = p.kernel();
    if (x.shape().h + 2 * pad < f || x.shape().w + 2 * pad < f) {
        throw std::invalid_argument("conv2d: kernel larger than padded input");
    }
}

inline Shape conv_out_shape(const Tensor4& x, const ConvParams& p, std::int64_t pad) {
    const std::int64_t f = p.kernel();
    return Shape{x.shape().n, p.filters(), x.shape().h + 2 * pad - f + 1,
                 x.shape().w + 2 * pad - f + 1};
}

inline Tensor4 conv2d_naive(const Tensor4& x, const ConvParams& p, std::int64_t pad) {
    const Shape in = x.shape();
    const Shape out_shape = conv_out_shape(x, p, pad);
    const std::int64_t k_count = p.filters(), c_in = in.c, f = p.kernel();
    Tensor4 out(out_shape);
    for (std::int64_t n = 0; n < in.n; ++n) {
        for (std::int64_t k = 0; k < k_count; ++k) {
            for (std::int64_t oy = 0; oy < out_shape.h; ++oy) {
                for (std::int64_t ox = 0; ox < out_shape.w; ++ox) {
                    double acc = p.bias[static_cast<std::size_t>(k)];
                    for (std::int64_t c = 0; c < c_in; ++c) {
                        for (std::int64_t fy = 0; fy < f; ++fy) {
                            const std::int64_t iy = oy + fy - pad;
                            if (iy < 0 || iy >= in.h) continue;
                            for (std::int64_t fx = 0; fx < f; ++fx) {
                                const std::int64_t ix = ox + fx - pad;
                                if (ix < 0 || ix >= in.w) continue;
                                acc += x.at(n, c, iy, ix) * p.weights.at(k, c, fy, fx);
                            }
                        }
                    }
                    out.at(n, k, oy, ox) = acc;
                }
            }
        }
    }
    return out;
}

// im2col: unfold one batch item into a (C_in*F*F) x (out_h*out_w) matrix, then
// multiply by the (K) x (C_in*F*F) weight matrix.
inline Tensor4 conv2d_im2col(const Tensor4& x, const ConvParams& p, std::int64_t pad) {
    const Shape in = x.shape();
    const Shape out_shape = conv_out_shape(x, p, pad);
    const std::int64_t k_count = p.filters(), c_in = in.c, f = p.kernel();
    const std::int64_t rows = c_in * f * f;
    const std::int64_t cols = out_shape.h * out_shape.w;

    Tensor4 out(out_shape);
    std::vector<double> col(static_cast<std::size_t>(rows * cols));
    for (std::int64_t n = 0; n < in.n; ++n) {
        double* colp = col.data();
        for (std::int64_t c = 0; c < c_in; ++c) {
            for (std::int64_t fy = 0; fy < f; ++fy) {
                for (std::int64_t fx = 0; fx < f; ++fx) {
                    for (std::int64_t oy = 0; oy < out_shape.h; ++oy) {
                        const std::int64_t iy = oy + fy - pad;
                        for (std::int64_t ox = 0; ox < out_shape.w; ++ox) {
                            const std::int64_t ix = ox + fx - pad;
                            const bool inside = iy >= 0 && iy < in.h && ix >= 0 && ix < in.w;
                            *colp++ = inside ? x.at(n, c, iy, ix) : 0.0;
                        }
                    }
                }
            }
        }
        const double* wmat = p.weights.data();  // (K, rows) contiguous
        for (std::int64_t k = 0; k < k_count; ++k) {
            double* outp = out.data() + out.index(n, k, 0, 0);
            const double bias = p.bias[static_cast<std::size_t>(k)];
            for (std::int64_t j = 0; j < cols; ++j) outp[j] = bias;
            for (std::int64_t r = 0; r < rows; ++r) {
                const double wkr = wmat[k * rows + r];
                if (wkr == 0.0) continue;
                const double* colrow = col.data() + r * cols;
                for (std::int64_t j = 0; j < cols; ++j) outp[j] += wkr * colrow[j];
            }
        }
    }
    return out;
}

}  // namespace detail

inline Tensor4 conv2d_forward(const Tensor4& x, const ConvParams& p, std::int64_t pad,
                              ConvPath path = ConvPath::im2col) {
    detail::check_conv_args(x, p, pad);
    return path == ConvPath::naive ? detail::conv2d_naive(x, p, pad)
                                   : detail::conv2d_im2col(x, p, pad);
}

inline ConvGrads conv2d_backward(const Tensor4& x, const ConvParams& p, std::int64_t pad,
                                 const Tensor4& grad_out) {
    detail::check_conv_args(x, p, pad);
    const Shape out_shape = detail::conv_out_shape(x, p, pad);
    if (!(grad_out.shape() == out_shape)) {
        throw std::invalid_argument("conv2d_backward: grad_out shape " +
                                    grad_out.shape().to_string() + ", expected " +
                                    out_shape.to_string());
    }
    const Shape in = x.shape();
    const std::int64_t k_count = p.filters(), c_in = in.c, f = p.kernel();

    ConvGrads g;
    g.dweights = Tensor4(p.weights.shape());
    g.dbias.assign(static_cast<std::size_t>(k_count), 0.0);
    g.dinput = Tensor4(in);

    for (std::int64_t n = 0; n < in.n; ++n) {
        for (std::int64_t k = 0; k < k_count; ++k) {
            double bias_acc = 0.0;
            for (std::int64_t oy = 0; oy < out_shape.h; ++oy) {
                for (std::int64_t ox = 0; ox < out_shape.w; ++ox) {
                    const double go = grad_out.at(n, k, oy, ox);
                    bias_acc += go;
                    if (go == 0.0) continue;
                    for (std::int64_t c = 0; c < c_in; ++c) {
                        for (std::int64_t fy = 0; fy < f; ++fy) {
                            const std::int64_t iy = oy + fy - pad;
                            if (iy < 0 || iy >= in.h) continue;
                            for (std::int64_t fx = 0; fx < f; ++fx) {
                                const std::int64_t ix = ox + fx - pad;
                                if (ix < 0 || ix >= in.w) continue;
                                g.dweights.at(k, c, fy, fx) += go * x.at(n, c, iy, ix);
                                g.dinput.at(n, c, iy, ix) += go * p.weights.at(k, c, fy, fx);
                            }
                        }
                    }
                }
            }
            g.dbias[static_cast<std::size_t>(k)] += bias_acc;
        }
    }
    return g;
}

inline Tensor4 relu_forward(const Tensor4& x) {
    Tensor4 out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return out;
}

// Derivative at exactly 0 is defined as 0.
inline Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad_out) {
    check_same_shape(x, grad_out, "relu_backward");
    Tensor4 out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? grad_out[i] : 0.0;
    return out;
}

namespace detail {
inline void check_bn_args(const Tensor4& x, const BnParams& p) {
    if (x.shape().c != p.channels()) {
        throw std::invalid_argument("batchnorm: input has " + std::to_string(x.shape().c) +
                                    " channels, params have " + std::to_string(p.channels()));
    }
}
}  // namespace detail

// Train-mode BN: per-channel standardization over (n,h,w) with the biased
// variance estimator, then the learned affine map. Updates running statistics
// as an exponential moving average.
inline Tensor4 bn_forward_train(const Tensor4& x, BnParams& p, BnCache& cache) {
    detail::check_bn_args(x, p);
    const Shape s = x.shape();
    const std::int64_t m = s.n * s.h * s.w;
    if (m < 2) throw std::invalid_argument("bn_forward_train: batch has fewer than 2 values per channel");

    cache.x_hat = Tensor4(s);
    cache.batch_mean.assign(static_cast<std::size_t>(s.c), 0.0);
    cache.batch_var.assign(static_cast<std::size_t>(s.c), 0.0);
    cache.invstd.assign(static_cast<std::size_t>(s.c), 0.0);

    Tensor4 out(s);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::int64_t c = 0; c < s.c; ++c) {
        double acc = 0.0;
        for (std::int64_t n = 0; n < s.n; ++n)
            for (std::int64_t y = 0; y < s.h; ++y)
                for (std::int64_t xw = 0; xw < s.w; ++xw) acc += x.at(n, c, y, xw);
        const double mean = acc * inv_m;

        double var_acc = 0.0;
        for (std::int64_t n = 0; n < s.n; ++n)
            for (std::int64_t y = 0; y < s.h; ++y)
                for (std::int64_t xw = 0; xw < s.w; ++xw) {
                    const double d = x.at(n, c, y, xw) - mean;
                    var_acc += d * d;
                }
        const double var = var_acc * inv_m;
        const double invstd = 1.0 / std::sqrt(var + p.epsilon);

        const std::size_t ci = static_cast<std::size_t>(c);
        cache.batch_mean[ci] = mean;
        cache.batch_var[ci] = var;
        cache.invstd[ci] = invstd;

        const double gamma = p.gamma[ci], beta = p.beta[ci];
        for (std::int64_t n = 0; n < s.n; ++n)
            for (std::int64_t y = 0; y < s.h; ++y)
                for (std::int64_t xw = 0; xw < s.w; ++xw) {
                    const double xh = (x.at(n, c, y, xw) - mean) * invstd;
                    cache.x_hat.at(n, c, y, xw) = xh;
                    out.at(n, c, y, xw) = gamma * xh + beta;
                }

        p.running_mean[ci] = (1.0 - p.momentum) * p.running_mean[ci] + p.momentum * mean;
        p.running_var[ci] = (1.0 - p.momentum) * p.running_var[ci] + p.momentum * var;
    }
    p.stats_ready = true;
    return out;
}

// Inference-mode BN: a fixed per-channel affine map from the running
// statistics. Each element depends only on itself, so output is independent
// of batch composition, bit for bit.
inline Tensor4 bn_forward_infer(const Tensor4& x, const BnParams& p) {
    detail::check_bn_args(x, p);
    if (!p.stats_ready) {
        throw std::invalid_argument("bn_forward_infer: running statistics not initialized");
    }
    const Shape s = x.shape();
    Tensor4 out(s);
    for (std::int64_t c = 0; c < s.c; ++c) {
        const std::size_t ci = static_cast<std::size_t>(c);
        const double sc = p.gamma[ci] / std::sqrt(p.running_var[ci] + p.epsilon);
        const double sh = p.beta[ci] - sc * p.running_mean[ci];
        for (std::int64_t n = 0; n < s.n; ++n)
            for (std::int64_t y = 0; y < s.h; ++y)
                for (std::int64_t xw = 0; xw < s.w; ++xw)
                    out.at(n, c, y, xw) = sc * x.at(n, c, y, xw) + sh;
    }
    return out;
}

// Full BN backward including the dependence of the batch mean/variance on the
// input:  dx = gamma*invstd/m * (m*g - sum(g) - x_hat*sum(g*x_hat))
inline BnGrads bn_backward(const BnCache& cache, const BnParams& p, const Tensor4& grad_out) {
    detail::check_bn_args(grad_out, p);
    check_same_shape(cache.x_hat, grad_out, "bn_backward");
    const Shape s = grad_out.shape();
    const double m = static_cast<double>(s.n * s.h * s.w);

    BnGrads g;
    g.dgamma.assign(static_cast<std::size_t>(s.c), 0.0);
    g.dbeta.assign(static_cast<std::size_t>(s.c), 0.0);
    g.dinput = Tensor4(s);

    for (std::int64_t c = 0; c < s.c; ++c) {
        const std::size_t ci = static_cast<std::size_t>(c);
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::int64_t n = 0; n < s.n; ++n)
            for (std::int64_t y = 0; y < s.h; ++y)
                for (std::int64_t xw = 0; xw < s.w; ++xw) {
                    const double go = grad_out.at(n, c, y, xw);
                    sum_g += go;
                    sum_gx += go * cache.x_hat.at(n, c, y, xw);
                }
        g.dbeta[ci] = sum_g;
        g.dgamma[ci] = sum_gx;

        const double k = p.gamma[ci] * cache.invstd[ci] / m;
        for (std::int64_t n = 0; n < s.n; ++n)
            for (std::int64_t y = 0; y < s.h; ++y)
                for (std::int64_t xw = 0; xw < s.w; ++xw) {
                    const double go = grad_out.at(n, c, y, xw);
                    const double xh = cache.x_hat.at(n, c, y, xw);
                    g.dinput.at(n, c, y, xw) = k * (m * go - sum_g - xh * sum_gx);
                }
    }
    return g;
}

// Input-to-output skip connection. Backward passes grad_out unchanged to both
// branches, which the model backward exploits directly.
inline Tensor4 skip_add(const Tensor4& input_image, const Tensor4& network_output) {
    check_same_shape(input_image, network_output, "skip_add");
    return add(input_image, network_output);
}

}  // namespace win
