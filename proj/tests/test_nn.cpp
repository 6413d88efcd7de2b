#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "win/nn.hpp"

using win::BnCache;
using win::BnParams;
using win::ConvParams;
using win::ConvPath;
using win::Rng;
using win::Shape;
using win::Tensor4;

namespace {

ConvParams random_conv(Rng& rng, std::int64_t filters, std::int64_t channels,
                       std::int64_t kernel) {
    ConvParams p;
    p.weights = testutil::rand_tensor(rng, Shape{filters, channels, kernel, kernel});
    p.bias.resize(static_cast<std::size_t>(filters));
    for (double& b : p.bias) b = rng.uniform(-0.5, 0.5);
    return p;
}

// Scalar loss sum(r * out) so every output element contributes to the
// gradient with a distinct weight.
double projected(const Tensor4& out, const Tensor4& r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += out[i] * r[i];
    return acc;
}

}  // namespace

TEST_CASE("conv forward: all-ones 3x3 kernel with same padding") {
    Tensor4 x(Shape{1, 1, 3, 3}, std::vector<double>(9, 1.0));
    ConvParams p;
    p.weights = Tensor4(Shape{1, 1, 3, 3}, std::vector<double>(9, 1.0));
    p.bias = {0.0};
    for (ConvPath path : {ConvPath::naive, ConvPath::im2col}) {
        Tensor4 out = win::conv2d_forward(x, p, 1, path);
        REQUIRE(out.shape() == x.shape());
        REQUIRE(out.at(0, 0, 1, 1) == 9.0);  // full window
        REQUIRE(out.at(0, 0, 0, 0) == 4.0);  // corner: only 2x2 inside
        REQUIRE(out.at(0, 0, 2, 2) == 4.0);
        REQUIRE(out.at(0, 0, 0, 1) == 6.0);  // edge: 2x3 inside
    }
}

TEST_CASE("conv forward: delta kernel is the identity") {
    Rng rng(3);
    Tensor4 x = testutil::rand_tensor(rng, Shape{2, 1, 5, 4});
    ConvParams p;
    p.weights = win::zeros(Shape{1, 1, 3, 3});
    p.weights.at(0, 0, 1, 1) = 1.0;
    p.bias = {0.0};
    for (ConvPath path : {ConvPath::naive, ConvPath::im2col}) {
        REQUIRE(win::max_abs_diff(win::conv2d_forward(x, p, 1, path), x) == 0.0);
    }
}

TEST_CASE("conv forward matches the brute-force oracle") {
    Rng rng(11);
    Tensor4 x = testutil::rand_tensor(rng, Shape{1, 2, 5, 5});
    ConvParams p = random_conv(rng, 3, 2, 3);
    Tensor4 expected = testutil::conv_oracle(x, p.weights, p.bias, 1);
    REQUIRE(win::max_abs_diff(win::conv2d_forward(x, p, 1, ConvPath::naive), expected) < 1e-12);
    REQUIRE(win::max_abs_diff(win::conv2d_forward(x, p, 1, ConvPath::im2col), expected) < 1e-12);
}

TEST_CASE("conv paths agree on random shapes and kernels") {
    Rng rng(13);
    for (int rep = 0; rep < 25; ++rep) {
        const std::int64_t f = 3 + 2 * static_cast<std::int64_t>(rng.below(3));  // 3,5,7
        const Shape shape{1 + static_cast<std::int64_t>(rng.below(2)),
                          1 + static_cast<std::int64_t>(rng.below(4)),
                          1 + static_cast<std::int64_t>(rng.below(9)),
                          1 + static_cast<std::int64_t>(rng.below(9))};
        Tensor4 x = testutil::rand_tensor(rng, shape);
        ConvParams p = random_conv(rng, 1 + static_cast<std::int64_t>(rng.below(4)), shape.c, f);
        const std::int64_t pad = (f - 1) / 2;
        Tensor4 a = win::conv2d_forward(x, p, pad, ConvPath::naive);
        Tensor4 b = win::conv2d_forward(x, p, pad, ConvPath::im2col);
        REQUIRE(win::max_abs_diff(a, b) < 1e-10);
    }
}

TEST_CASE("conv rejects bad arguments") {
    Rng rng(5);
    Tensor4 x = testutil::rand_tensor(rng, Shape{1, 2, 4, 4});
    ConvParams p = random_conv(rng, 2, 3, 3);  // channel mismatch
    REQUIRE_THROWS_AS(win::conv2d_forward(x, p, 1), std::invalid_argument);

    ConvParams big = random_conv(rng, 1, 2, 7);  // 7x7 kernel on a 4x4 input, pad 1
    REQUIRE_THROWS_AS(win::conv2d_forward(x, big, 1), std::invalid_argument);

    ConvParams even;
    even.weights = win::zeros(Shape{1, 2, 4, 4});
    even.bias = {0.0};
    REQUIRE_THROWS_AS(win::conv2d_forward(x, even, 1), std::invalid_argument);
}

TEST_CASE("conv backward: zero grad_out gives zero grads") {
    Rng rng(17);
    Tensor4 x = testutil::rand_tensor(rng, Shape{1, 2, 4, 4});
    ConvParams p = random_conv(rng, 2, 2, 3);
    win::ConvGrads g = win::conv2d_backward(x, p, 1, win::zeros(Shape{1, 2, 4, 4}));
    REQUIRE(win::max_abs(g.dweights) == 0.0);
    REQUIRE(win::max_abs(g.dinput) == 0.0);
    for (double b : g.dbias) REQUIRE(b == 0.0);
}

TEST_CASE("conv backward: adjoint of the delta kernel routes the pixel back") {
    ConvParams p;
    p.weights = win::zeros(Shape{1, 1, 3, 3});
    p.weights.at(0, 0, 1, 1) = 1.0;
    p.bias = {0.0};
    Tensor4 x = win::zeros(Shape{1, 1, 4, 4});
    Tensor4 grad_out = win::zeros(Shape{1, 1, 4, 4});
    grad_out.at(0, 0, 2, 1) = 1.0;
    win::ConvGrads g = win::conv2d_backward(x, p, 1, grad_out);
    REQUIRE(g.dinput.at(0, 0, 2, 1) == 1.0);
    REQUIRE(win::sum(g.dinput) == 1.0);
    REQUIRE(g.dbias[0] == 1.0);
}

TEST_CASE("conv backward matches finite differences") {
    Rng rng(19);
    Tensor4 x = testutil::rand_tensor(rng, Shape{2, 2, 5, 5});
    ConvParams p = random_conv(rng, 3, 2, 3);
    Tensor4 r = testutil::rand_tensor(rng, Shape{2, 3, 5, 5});

    auto loss = [&] { return projected(win::conv2d_forward(x, p, 1, ConvPath::naive), r); };
    win::ConvGrads analytic = win::conv2d_backward(x, p, 1, r);

    testutil::GradCheck check;
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
        check.accumulate(analytic.dweights[i], testutil::central_diff(loss, p.weights[i]));
    }
    for (std::size_t i = 0; i < p.bias.size(); ++i) {
        check.accumulate(analytic.dbias[i], testutil::central_diff(loss, p.bias[i]));
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        check.accumulate(analytic.dinput[i], testutil::central_diff(loss, x[i]));
    }
    REQUIRE(check.relative() < 1e-6);
}

TEST_CASE("relu forward and backward") {
    Tensor4 x(Shape{1, 1, 1, 3}, {-1.0, 0.0, 2.0});
    Tensor4 y = win::relu_forward(x);
    REQUIRE(y[0] == 0.0);
    REQUIRE(y[1] == 0.0);
    REQUIRE(y[2] == 2.0);

    Tensor4 g(Shape{1, 1, 1, 3}, {5.0, 5.0, 5.0});
    Tensor4 gx = win::relu_backward(x, g);
    REQUIRE(gx[0] == 0.0);
    REQUIRE(gx[1] == 0.0);  // derivative at exactly 0 is 0
    REQUIRE(gx[2] == 5.0);

    Rng rng(23);
    Tensor4 pos = testutil::rand_tensor(rng, Shape{1, 2, 3, 3}, 0.1, 1.0);
    REQUIRE(win::max_abs_diff(win::relu_forward(pos), pos) == 0.0);
    Tensor4 gr = testutil::rand_tensor(rng, pos.shape());
    REQUIRE(win::max_abs_diff(win::relu_backward(pos, gr), gr) == 0.0);
}

TEST_CASE("relu is idempotent") {
    Rng rng(29);
    Tensor4 x = testutil::rand_tensor(rng, Shape{2, 3, 5, 5});
    Tensor4 once = win::relu_forward(x);
    REQUIRE(win::max_abs_diff(win::relu_forward(once), once) == 0.0);
}

TEST_CASE("relu gradient matches finite differences away from 0") {
    Rng rng(31);
    Tensor4 x = testutil::rand_tensor(rng, Shape{1, 2, 4, 4});
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::abs(x[i]) < 1e-3) x[i] = 0.1;  // keep clear of the kink
    }
    Tensor4 r = testutil::rand_tensor(rng, x.shape());
    auto loss = [&] { return projected(win::relu_forward(x), r); };
    Tensor4 analytic = win::relu_backward(x, r);
    testutil::GradCheck check;
    for (std::size_t i = 0; i < x.size(); ++i) {
        check.accumulate(analytic[i], testutil::central_diff(loss, x[i]));
    }
    REQUIRE(check.relative() < 1e-6);
}

TEST_CASE("bn train: hand-evaluated 3-value channel") {
    Tensor4 x(Shape{1, 1, 1, 3}, {1.0, 2.0, 3.0});
    BnParams p = BnParams::make(1);
    BnCache cache;
    Tensor4 y = win::bn_forward_train(x, p, cache);
    REQUIRE(cache.batch_mean[0] == Catch::Approx(2.0).margin(1e-12));
    REQUIRE(cache.batch_var[0] == Catch::Approx(2.0 / 3.0).margin(1e-12));
    REQUIRE(y[0] == Catch::Approx(-1.2247).margin(1e-3));
    REQUIRE(y[1] == Catch::Approx(0.0).margin(1e-3));
    REQUIRE(y[2] == Catch::Approx(1.2247).margin(1e-3));
}

TEST_CASE("bn train: constant channel collapses to beta") {
    Tensor4 x(Shape{1, 1, 2, 2}, std::vector<double>(4, 0.7));
    BnParams p = BnParams::make(1);
    p.beta[0] = 0.25;
    BnCache cache;
    Tensor4 y = win::bn_forward_train(x, p, cache);
    for (std::size_t i = 0; i < y.size(); ++i) REQUIRE(y[i] == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("bn train: standardized input passes through within epsilon error") {
    // values with exact mean 0 and population variance 1
    Tensor4 x(Shape{1, 1, 2, 2}, {-1.0, 1.0, -1.0, 1.0});
    BnParams p = BnParams::make(1);
    BnCache cache;
    Tensor4 y = win::bn_forward_train(x, p, cache);
    REQUIRE(win::max_abs_diff(y, x) < 1e-4);
}

TEST_CASE("bn train: pre-affine output is standardized per channel") {
    Rng rng(37);
    Tensor4 x = testutil::rand_tensor(rng, Shape{2, 3, 4, 4}, -2.0, 3.0);
    BnParams p = BnParams::make(3);
    BnCache cache;
    win::bn_forward_train(x, p, cache);
    const Shape s = x.shape();
    const double m = static_cast<double>(s.n * s.h * s.w);
    for (std::int64_t c = 0; c < s.c; ++c) {
        double sum = 0.0, sumsq = 0.0;
        for (std::int64_t n = 0; n < s.n; ++n)
            for (std::int64_t y = 0; y < s.h; ++y)
                for (std::int64_t xw = 0; xw < s.w; ++xw) {
                    const double v = cache.x_hat.at(n, c, y, xw);
                    sum += v;
                    sumsq += v * v;
                }
        REQUIRE(std::abs(sum / m) < 1e-9);
        REQUIRE(std::abs(sumsq / m - 1.0) < 1e-3);
    }
}

TEST_CASE("bn train updates running stats with momentum 0.1") {
    Tensor4 x(Shape{1, 1, 1, 3}, {1.0, 2.0, 3.0});
    BnParams p = BnParams::make(1);
    p.running_mean[0] = 10.0;
    p.running_var[0] = 4.0;
    BnCache cache;
    win::bn_forward_train(x, p, cache);
    REQUIRE(p.running_mean[0] == Catch::Approx(0.9 * 10.0 + 0.1 * 2.0).margin(1e-12));
    REQUIRE(p.running_var[0] == Catch::Approx(0.9 * 4.0 + 0.1 * (2.0 / 3.0)).margin(1e-12));
    REQUIRE(p.stats_ready);
}

TEST_CASE("bn train rejects degenerate batches") {
    Tensor4 x(Shape{1, 1, 1, 1}, {1.0});
    BnParams p = BnParams::make(1);
    BnCache cache;
    REQUIRE_THROWS_AS(win::bn_forward_train(x, p, cache), std::invalid_argument);
}

TEST_CASE("bn infer matches train when running stats equal batch stats") {
    Rng rng(41);
    Tensor4 x = testutil::rand_tensor(rng, Shape{2, 2, 3, 3});
    BnParams p = BnParams::make(2);
    p.gamma = {1.5, 0.5};
    p.beta = {0.1, -0.2};
    BnParams train_params = p;
    BnCache cache;
    Tensor4 train_out = win::bn_forward_train(x, train_params, cache);

    p.running_mean = cache.batch_mean;
    p.running_var = cache.batch_var;
    p.stats_ready = true;
    Tensor4 infer_out = win::bn_forward_infer(x, p);
    REQUIRE(win::max_abs_diff(train_out, infer_out) < 1e-10);
}

TEST_CASE("bn infer is a fixed affine map, bitwise independent of batch composition") {
    Rng rng(43);
    BnParams p = BnParams::make(2);
    p.gamma = {2.0, 0.7};
    p.beta = {1.0, -0.3};
    p.running_mean = {0.2, -0.1};
    p.running_var = {1.3, 0.8};
    p.stats_ready = true;

    Tensor4 b1 = testutil::rand_tensor(rng, Shape{2, 2, 3, 3});
    Tensor4 b2 = testutil::rand_tensor(rng, Shape{3, 2, 3, 3});
    Tensor4 concat(Shape{5, 2, 3, 3});
    std::copy_n(b1.data(), b1.size(), concat.data());
    std::copy_n(b2.data(), b2.size(), concat.data() + b1.size());

    Tensor4 out_concat = win::bn_forward_infer(concat, p);
    Tensor4 out1 = win::bn_forward_infer(b1, p);
    Tensor4 out2 = win::bn_forward_infer(b2, p);
    for (std::size_t i = 0; i < out1.size(); ++i) REQUIRE(out_concat[i] == out1[i]);
    for (std::size_t i = 0; i < out2.size(); ++i) REQUIRE(out_concat[out1.size() + i] == out2[i]);
}

TEST_CASE("bn infer: gamma 2 beta 1 maps x_hat to 2*x_hat + 1") {
    BnParams p = BnParams::make(1);
    p.gamma = {2.0};
    p.beta = {1.0};
    p.running_mean = {0.0};
    p.running_var = {1.0};
    p.epsilon = 0.0;  // exact affine for this check
    p.stats_ready = true;
    Tensor4 x(Shape{1, 1, 1, 3}, {-1.0, 0.0, 1.0});
    Tensor4 y = win::bn_forward_infer(x, p);
    REQUIRE(y[0] == -1.0);
    REQUIRE(y[1] == 1.0);
    REQUIRE(y[2] == 3.0);
}

TEST_CASE("bn infer requires initialized running stats") {
    BnParams p = BnParams::make(1);
    Tensor4 x(Shape{1, 1, 1, 2}, {0.0, 1.0});
    REQUIRE_THROWS_AS(win::bn_forward_infer(x, p), std::invalid_argument);
}

TEST_CASE("bn backward: zero grads and the beta identity") {
    Rng rng(47);
    Tensor4 x = testutil::rand_tensor(rng, Shape{2, 2, 3, 3});
    BnParams p = BnParams::make(2);
    BnCache cache;
    win::bn_forward_train(x, p, cache);

    win::BnGrads zero = win::bn_backward(cache, p, win::zeros(x.shape()));
    REQUIRE(win::max_abs(zero.dinput) == 0.0);
    for (double v : zero.dgamma) REQUIRE(v == 0.0);
    for (double v : zero.dbeta) REQUIRE(v == 0.0);

    Tensor4 g = testutil::rand_tensor(rng, x.shape());
    win::BnGrads grads = win::bn_backward(cache, p, g);
    for (std::int64_t c = 0; c < 2; ++c) {
        double expect = 0.0;
        for (std::int64_t n = 0; n < 2; ++n)
            for (std::int64_t y = 0; y < 3; ++y)
                for (std::int64_t xw = 0; xw < 3; ++xw) expect += g.at(n, c, y, xw);
        REQUIRE(grads.dbeta[static_cast<std::size_t>(c)] ==
                Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("bn backward matches finite differences") {
    Rng rng(53);
    Tensor4 x = testutil::rand_tensor(rng, Shape{2, 2, 3, 3});
    BnParams p = BnParams::make(2);
    p.gamma = {1.2, 0.8};
    p.beta = {0.3, -0.1};
    Tensor4 r = testutil::rand_tensor(rng, x.shape());

    auto loss = [&] {
        BnParams fresh = p;  // keep running-stat updates out of the picture
        BnCache cache;
        return projected(win::bn_forward_train(x, fresh, cache), r);
    };
    BnParams work = p;
    BnCache cache;
    win::bn_forward_train(x, work, cache);
    win::BnGrads analytic = win::bn_backward(cache, p, r);

    testutil::GradCheck check;
    for (std::size_t i = 0; i < x.size(); ++i) {
        check.accumulate(analytic.dinput[i], testutil::central_diff(loss, x[i]));
    }
    for (std::size_t i = 0; i < p.gamma.size(); ++i) {
        check.accumulate(analytic.dgamma[i], testutil::central_diff(loss, p.gamma[i]));
        check.accumulate(analytic.dbeta[i], testutil::central_diff(loss, p.beta[i]));
    }
    REQUIRE(check.relative() < 1e-5);
}

TEST_CASE("skip_add sums and preserves exact residuals") {
    Rng rng(59);
    Tensor4 y = testutil::rand_tensor(rng, Shape{1, 1, 4, 4});
    REQUIRE(win::max_abs_diff(win::skip_add(y, win::zeros(y.shape())), y) == 0.0);

    // dyadic values keep x - y and y + (x - y) exact in floating point
    Tensor4 xd(Shape{1, 1, 2, 2}, {3.0 / 256, 100.0 / 256, 255.0 / 256, 0.0});
    Tensor4 yd(Shape{1, 1, 2, 2}, {7.0 / 256, 90.0 / 256, 1.0 / 256, 0.5});
    Tensor4 restored = win::skip_add(yd, win::sub(xd, yd));
    for (std::size_t i = 0; i < xd.size(); ++i) REQUIRE(restored[i] == xd[i]);

    Tensor4 wrong(Shape{1, 1, 2, 3}, std::vector<double>(6, 0.0));
    REQUIRE_THROWS_AS(win::skip_add(yd, wrong), std::invalid_argument);
}
