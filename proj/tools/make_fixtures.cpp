// Regenerates the synthetic fixture images shipped under fixtures/. The
// images are closed-form (no RNG), 64x64, 8-bit grayscale:
//   fixture_a  dark, smooth blobs on a gradient (histogram sits low)
//   fixture_b  bright sinusoidal texture (histogram sits high)
//   fixture_c  diagonal bands with a soft disc
//   fixture_d  radial pattern, used as a validation image

#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>

#include "win/data.hpp"

namespace {

constexpr std::int64_t kSize = 64;

double blob(double y, double x, double cy, double cx, double radius) {
    const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
    return std::exp(-d2 / (2.0 * radius * radius));
}

win::Image render(const std::string& name, double (*f)(double, double)) {
    win::Image img;
    img.h = kSize;
    img.w = kSize;
    img.source_path = name;
    img.pixels.resize(kSize * kSize);
    for (std::int64_t y = 0; y < kSize; ++y) {
        for (std::int64_t x = 0; x < kSize; ++x) {
            const double v = f(static_cast<double>(y) / (kSize - 1),
                               static_cast<double>(x) / (kSize - 1));
            img.at(y, x) = std::clamp(v, 0.0, 1.0);
        }
    }
    return img;
}

double fixture_a(double y, double x) {
    double v = 0.10 + 0.15 * x + 0.05 * y;
    v += 0.45 * blob(y, x, 0.3, 0.35, 0.18);
    v += 0.30 * blob(y, x, 0.75, 0.7, 0.12);
    v += 0.20 * blob(y, x, 0.6, 0.15, 0.08);
    return v;
}

double fixture_b(double y, double x) {
    double v = 0.72 + 0.16 * std::sin(2.0 * M_PI * 4.0 * x) * std::cos(2.0 * M_PI * 3.0 * y);
    v -= 0.35 * blob(y, x, 0.5, 0.5, 0.15);
    v += 0.08 * std::sin(2.0 * M_PI * 9.0 * (x + y));
    return v;
}

double fixture_c(double y, double x) {
    double v = 0.5 + 0.35 * std::sin(2.0 * M_PI * 2.5 * (x - y));
    v += 0.25 * blob(y, x, 0.4, 0.6, 0.2) - 0.1;
    return v;
}

double fixture_d(double y, double x) {
    const double r = std::sqrt((y - 0.5) * (y - 0.5) + (x - 0.5) * (x - 0.5));
    return 0.35 + 0.4 * std::cos(2.0 * M_PI * 3.0 * r) * std::exp(-2.0 * r) + 0.25 * x;
}

}  // namespace

int main(int argc, char** argv) {
    const std::string dir = argc > 1 ? argv[1] : "fixtures";
    std::filesystem::create_directories(dir);
    const std::pair<const char*, double (*)(double, double)> fixtures[] = {
        {"fixture_a.pgm", fixture_a},
        {"fixture_b.pgm", fixture_b},
        {"fixture_c.pgm", fixture_c},
        {"fixture_d.pgm", fixture_d},
    };
    for (const auto& [name, fn] : fixtures) {
        const std::string path = (std::filesystem::path(dir) / name).string();
        win::save_pgm(render(name, fn), path);
        std::cout << path << "\n";
    }
    return 0;
}
