#pragma once

// Shared test utilities. The oracles here (direct convolution, per-window
// SSIM, central finite differences) are deliberately written independently of
// the library code paths they check.

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "win/nn.hpp"
#include "win/rng.hpp"
#include "win/tensor.hpp"

namespace testutil {

inline win::Tensor4 rand_tensor(win::Rng& rng, win::Shape shape, double lo = -1.0,
                                double hi = 1.0) {
    win::Tensor4 t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Brute-force direct convolution (cross-correlation, zero padding), written
// as plainly as possible; the reference for both library conv paths.
inline win::Tensor4 conv_oracle(const win::Tensor4& x, const win::Tensor4& weights,
                                const std::vector<double>& bias, std::int64_t pad) {
    const win::Shape in = x.shape();
    const std::int64_t k_count = weights.shape().n;
    const std::int64_t f = weights.shape().h;
    const std::int64_t out_h = in.h + 2 * pad - f + 1;
    const std::int64_t out_w = in.w + 2 * pad - f + 1;
    win::Tensor4 out(win::Shape{in.n, k_count, out_h, out_w});
    for (std::int64_t n = 0; n < in.n; ++n)
        for (std::int64_t k = 0; k < k_count; ++k)
            for (std::int64_t oy = 0; oy < out_h; ++oy)
                for (std::int64_t ox = 0; ox < out_w; ++ox) {
                    double acc = bias[static_cast<std::size_t>(k)];
                    for (std::int64_t c = 0; c < in.c; ++c)
                        for (std::int64_t fy = 0; fy < f; ++fy)
                            for (std::int64_t fx = 0; fx < f; ++fx) {
                                const std::int64_t iy = oy - pad + fy;
                                const std::int64_t ix = ox - pad + fx;
                                if (iy < 0 || iy >= in.h || ix < 0 || ix >= in.w) continue;
                                acc += x.at(n, c, iy, ix) * weights.at(k, c, fy, fx);
                            }
                    out.at(n, k, oy, ox) = acc;
                }
    return out;
}

// Central finite difference of a scalar function with respect to one value.
inline double central_diff(const std::function<double()>& f, double& value,
                           double step = 1e-5) {
    const double saved = value;
    value = saved + step;
    const double hi = f();
    value = saved - step;
    const double lo = f();
    value = saved;
    return (hi - lo) / (2.0 * step);
}

// Gradient-check metric: largest absolute deviation normalized by the largest
// finite-difference magnitude.
struct GradCheck {
    double max_abs_err = 0.0;
    double max_fd = 0.0;
    double relative() const { return max_abs_err / (max_fd + 1e-12); }

    void accumulate(double analytic, double fd) {
        max_abs_err = std::max(max_abs_err, std::abs(analytic - fd));
        max_fd = std::max(max_fd, std::abs(fd));
    }
};

// Per-window SSIM oracle: direct 11x11 Gaussian-weighted moments at every
// valid center, no separable filtering.
inline double ssim_oracle(const win::Tensor4& a, const win::Tensor4& b) {
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    double weights[kWin][kWin];
    double wsum = 0.0;
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
            const double dy = i - kWin / 2, dx = j - kWin / 2;
            weights[i][j] = std::exp(-(dy * dy + dx * dx) / (2.0 * kSigma * kSigma));
            wsum += weights[i][j];
        }
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) weights[i][j] /= wsum;

    const std::int64_t h = a.shape().h, w = a.shape().w;
    double acc = 0.0;
    std::int64_t count = 0;
    for (std::int64_t y = 0; y + kWin <= h; ++y)
        for (std::int64_t x = 0; x + kWin <= w; ++x) {
            double ma = 0, mb = 0, eaa = 0, ebb = 0, eab = 0;
            for (int i = 0; i < kWin; ++i)
                for (int j = 0; j < kWin; ++j) {
                    const double va = a.at(0, 0, y + i, x + j);
                    const double vb = b.at(0, 0, y + i, x + j);
                    ma += weights[i][j] * va;
                    mb += weights[i][j] * vb;
                    eaa += weights[i][j] * va * va;
                    ebb += weights[i][j] * vb * vb;
                    eab += weights[i][j] * va * vb;
                }
            const double var_a = eaa - ma * ma;
            const double var_b = ebb - mb * mb;
            const double cov = eab - ma * mb;
            acc += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                   ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
            ++count;
        }
    return acc / static_cast<double>(count);
}

// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("win_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Log text without the leading "# run <timestamp>" header line.
inline std::string strip_timestamp_header(const std::string& text) {
    if (text.rfind("# run ", 0) == 0) {
        const std::size_t nl = text.find('\n');
        return nl == std::string::npos ? "" : text.substr(nl + 1);
    }
    return text;
}

}  // namespace testutil
