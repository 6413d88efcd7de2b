#pragma once

// Image quality metrics on the internal [0,1] intensity scale (MAX = 1.0,
// equivalent to 255 on the byte scale).
//
// SSIM uses the reference configuration: 11x11 Gaussian window with sigma 1.5,
// K1 = 0.01, K2 = 0.03, no downsampling, averaged over valid window positions.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "win/tensor.hpp"

namespace win {

// 10*log10(MAX^2/MSE); +infinity when the images are identical.
inline double psnr(const Tensor4& a, const Tensor4& b) {
    check_same_shape(a, b, "psnr");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace detail {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;  // (K1*MAX)^2
inline constexpr double kSsimC2 = 0.03 * 0.03;  // (K2*MAX)^2

inline std::array<double, kSsimWindow> ssim_window_1d() {
    std::array<double, kSsimWindow> w{};
    const int half = kSsimWindow / 2;
    double total = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - half;
        w[i] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
        total += w[i];
    }
    for (double& v : w) v /= total;
    return w;
}

// Separable Gaussian filter, valid positions only: (h,w) -> (h-10, w-10).
inline std::vector<double> gauss_valid(const std::vector<double>& img, std::int64_t h,
                                       std::int64_t w) {
    static const std::array<double, kSsimWindow> win1d = ssim_window_1d();
    const std::int64_t ow = w - kSsimWindow + 1;
    const std::int64_t oh = h - kSsimWindow + 1;
    std::vector<double> horiz(static_cast<std::size_t>(h * ow));
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) acc += win1d[k] * img[y * w + x + k];
            horiz[y * ow + x] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(oh * ow));
    for (std::int64_t y = 0; y < oh; ++y) {
        for (std::int64_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) acc += win1d[k] * horiz[(y + k) * ow + x];
            out[y * ow + x] = acc;
        }
    }
    return out;
}

}  // namespace detail

// Mean local SSIM over all valid window positions of two single-channel
// images given as (1,1,h,w) tensors.
inline double ssim(const Tensor4& a, const Tensor4& b) {
    check_same_shape(a, b, "ssim");
    const Shape s = a.shape();
    if (s.n != 1 || s.c != 1) throw std::invalid_argument("ssim: expected a (1,1,h,w) tensor");
    if (s.h < detail::kSsimWindow || s.w < detail::kSsimWindow) {
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    }
    const std::int64_t h = s.h, w = s.w;
    const std::size_t total = static_cast<std::size_t>(h * w);
    std::vector<double> av(a.data(), a.data() + total), bv(b.data(), b.data() + total);
    std::vector<double> aa(total), bb(total), ab(total);
    for (std::size_t i = 0; i < total; ++i) {
        aa[i] = av[i] * av[i];
        bb[i] = bv[i] * bv[i];
        ab[i] = av[i] * bv[i];
    }
    const std::vector<double> mu_a = detail::gauss_valid(av, h, w);
    const std::vector<double> mu_b = detail::gauss_valid(bv, h, w);
    const std::vector<double> e_aa = detail::gauss_valid(aa, h, w);
    const std::vector<double> e_bb = detail::gauss_valid(bb, h, w);
    const std::vector<double> e_ab = detail::gauss_valid(ab, h, w);

    double acc = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double var_a = e_aa[i] - ma * ma;
        const double var_b = e_bb[i] - mb * mb;
        const double cov = e_ab[i] - ma * mb;
        const double num = (2.0 * ma * mb + detail::kSsimC1) * (2.0 * cov + detail::kSsimC2);
        const double den =
            (ma * ma + mb * mb + detail::kSsimC1) * (var_a + var_b + detail::kSsimC2);
        acc += num / den;
    }
    return acc / static_cast<double>(mu_a.size());
}

struct Histogram {
    std::array<std::int64_t, 256> bins{};
    std::int64_t total = 0;
};

// 256-bin intensity histogram; values are clamped into [0,1] and binned as
// floor(v*255 + 0.5).
inline Histogram histogram(const Tensor4& img) {
    Histogram h;
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double v = std::clamp(img[i], 0.0, 1.0);
        const int bin = static_cast<int>(std::floor(v * 255.0 + 0.5));
        ++h.bins[static_cast<std::size_t>(std::clamp(bin, 0, 255))];
        ++h.total;
    }
    return h;
}

// L1 distance between the normalized histograms, in [0,2].
inline double histogram_distance(const Histogram& h1, const Histogram& h2) {
    if (h1.total == 0 || h2.total == 0) {
        throw std::invalid_argument("histogram_distance: empty histogram");
    }
    double d = 0.0;
    for (std::size_t i = 0; i < h1.bins.size(); ++i) {
        d += std::abs(static_cast<double>(h1.bins[i]) / static_cast<double>(h1.total) -
                      static_cast<double>(h2.bins[i]) / static_cast<double>(h2.total));
    }
    return d;
}

struct ImageQuality {
    std::string path;
    double sigma = -1.0;  // byte scale; negative means unknown
    double psnr_db = 0.0;
    double ssim = 0.0;
};

struct QualityReport {
    std::vector<ImageQuality> images;

    // Dataset average is the mean of per-image values.
    double mean_psnr() const {
        double acc = 0.0;
        for (const ImageQuality& q : images) acc += q.psnr_db;
        return images.empty() ? 0.0 : acc / static_cast<double>(images.size());
    }
    double mean_ssim() const {
        double acc = 0.0;
        for (const ImageQuality& q : images) acc += q.ssim;
        return images.empty() ? 0.0 : acc / static_cast<double>(images.size());
    }
};

namespace detail {
inline std::string fmt_psnr(double v) {
    if (std::isinf(v)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}
inline std::string fmt_num(double v, const char* spec = "%.4f") {
    char buf[32];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}
}  // namespace detail

// Machine-readable records, one image per line: path sigma psnr ssim.
inline void write_records(std::ostream& os, const QualityReport& report) {
    for (const ImageQuality& q : report.images) {
        os << q.path << ' ' << (q.sigma < 0.0 ? std::string("-") : detail::fmt_num(q.sigma, "%g"))
           << ' ' << detail::fmt_psnr(q.psnr_db) << ' ' << detail::fmt_num(q.ssim) << '\n';
    }
}

// Aligned table with one PSNR/SSIM column per sigma, one row per image plus
// the dataset average.
inline void write_quality_table(std::ostream& os,
                                const std::vector<std::pair<double, QualityReport>>& per_sigma) {
    if (per_sigma.empty()) return;
    std::size_t name_width = 7;
    for (const ImageQuality& q : per_sigma.front().second.images) {
        name_width = std::max(name_width, q.path.size());
    }
    const int col_width = 18;
    os << std::string(name_width, ' ');
    for (const auto& [sigma, report] : per_sigma) {
        std::string head = "sigma=" + detail::fmt_num(sigma, "%g");
        os << "  " << head << std::string(col_width > static_cast<int>(head.size())
                                              ? col_width - head.size()
                                              : 1,
                                          ' ');
    }
    os << '\n' << std::string(name_width, ' ');
    for (std::size_t i = 0; i < per_sigma.size(); ++i) {
        std::string head = "PSNR(dB)/SSIM";
        os << "  " << head << std::string(col_width - head.size(), ' ');
    }
    os << '\n';
    const std::size_t rows = per_sigma.front().second.images.size();
    for (std::size_t r = 0; r < rows; ++r) {
        const std::string& name = per_sigma.front().second.images[r].path;
        os << name << std::string(name_width - name.size(), ' ');
        for (const auto& [sigma, report] : per_sigma) {
            std::string cell =
                detail::fmt_psnr(report.images[r].psnr_db) + "/" + detail::fmt_num(report.images[r].ssim);
            os << "  " << cell
               << std::string(col_width > static_cast<int>(cell.size()) ? col_width - cell.size() : 1,
                              ' ');
        }
        os << '\n';
    }
    os << "average" << std::string(name_width - 7, ' ');
    for (const auto& [sigma, report] : per_sigma) {
        std::string cell = detail::fmt_psnr(report.mean_psnr()) + "/" +
                           detail::fmt_num(report.mean_ssim());
        os << "  " << cell
           << std::string(col_width > static_cast<int>(cell.size()) ? col_width - cell.size() : 1,
                          ' ');
    }
    os << '\n';
}

}  // namespace win
