#pragma once

// Dense rank-4 tensor (batch, channel, height, width), row-major, f64.
// The single data carrier shared by layers, noise, data and metrics code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace win {

struct Shape {
    std::int64_t n = 0;
    std::int64_t c = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;

    bool operator==(const Shape&) const = default;

    // Element count with overflow and positivity checks.
    std::int64_t count() const {
        if (n < 1 || c < 1 || h < 1 || w < 1) {
            throw std::invalid_argument("Shape: all dims must be >= 1, got " + to_string());
        }
        std::int64_t total = n;
        for (std::int64_t d : {c, h, w}) {
            if (__builtin_mul_overflow(total, d, &total)) {
                throw std::invalid_argument("Shape: element count overflows, " + to_string());
            }
        }
        return total;
    }

    std::string to_string() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

class Tensor4 {
public:
    Tensor4() = default;

    explicit Tensor4(Shape shape)
        : shape_(shape), data_(static_cast<std::size_t>(shape.count()), 0.0) {}

    Tensor4(Shape shape, std::vector<double> values) : shape_(shape), data_(std::move(values)) {
        if (static_cast<std::int64_t>(data_.size()) != shape_.count()) {
            throw std::invalid_argument("Tensor4: data length does not match shape " +
                                        shape_.to_string());
        }
    }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
        return data_[index(n, c, h, w)];
    }
    double at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
        return data_[index(n, c, h, w)];
    }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
        return static_cast<std::size_t>(((n * shape_.c + c) * shape_.h + h) * shape_.w + w);
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

inline Tensor4 zeros(Shape shape) { return Tensor4(shape); }

inline void check_same_shape(const Tensor4& a, const Tensor4& b, const char* op) {
    if (!(a.shape() == b.shape())) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    a.shape().to_string() + " vs " + b.shape().to_string());
    }
}

inline Tensor4 add(const Tensor4& a, const Tensor4& b) {
    check_same_shape(a, b, "add");
    Tensor4 out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline Tensor4 sub(const Tensor4& a, const Tensor4& b) {
    check_same_shape(a, b, "sub");
    Tensor4 out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline Tensor4 scale(const Tensor4& a, double s) {
    Tensor4 out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    return out;
}

inline double sum(const Tensor4& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i];
    return acc;
}

inline double mean(const Tensor4& a) {
    if (a.empty()) throw std::invalid_argument("mean: empty tensor");
    return sum(a) / static_cast<double>(a.size());
}

inline double max_abs(const Tensor4& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

inline double max_abs_diff(const Tensor4& a, const Tensor4& b) {
    check_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Clamp into the valid intensity range [0,1]; applied at denoise time only.
inline Tensor4 clamp01(const Tensor4& a) {
    Tensor4 out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::clamp(a[i], 0.0, 1.0);
    return out;
}

}  // namespace win
