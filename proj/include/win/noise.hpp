#pragma once

// AWGN generation with explicit sigma and seed policies. Sigma is given on the
// 0-255 byte scale and applied as sigma/255 on the internal [0,1] image scale.
//
// Two seed policies:
//   fresh  - a new i.i.d. draw for every call (the correct training setup)
//   frozen - ONE noise matrix is generated from the config seed and returned
//            for every subsequent call, reproducing the training flaw where a
//            reseeded generator stamped the identical noise realization onto
//            every training patch.

#include <cstdint>
#include <stdexcept>
#include <utility>

#include "win/rng.hpp"
#include "win/tensor.hpp"

namespace win {

enum class SeedPolicy { fresh, frozen };

struct NoiseConfig {
    double sigma_lo = 25.0;  // byte scale; fixed sigma when lo == hi
    double sigma_hi = 25.0;
    SeedPolicy seed_policy = SeedPolicy::fresh;
    std::uint64_t seed = 0;

    static NoiseConfig fixed(double sigma, SeedPolicy policy = SeedPolicy::fresh,
                             std::uint64_t seed = 0) {
        NoiseConfig cfg;
        cfg.sigma_lo = sigma;
        cfg.sigma_hi = sigma;
        cfg.seed_policy = policy;
        cfg.seed = seed;
        return cfg;
    }

    static NoiseConfig range(double lo, double hi, std::uint64_t seed = 0) {
        NoiseConfig cfg;
        cfg.sigma_lo = lo;
        cfg.sigma_hi = hi;
        cfg.seed = seed;
        return cfg;
    }

    bool is_range() const { return sigma_hi > sigma_lo; }

    void validate() const {
        if (sigma_lo < 0.0 || sigma_hi < 0.0) {
            throw std::invalid_argument("NoiseConfig: sigma must be >= 0");
        }
        if (sigma_lo > sigma_hi) {
            throw std::invalid_argument("NoiseConfig: sigma_lo > sigma_hi");
        }
    }
};

class NoiseSampler {
public:
    // `stream` separates independent consumers (training vs validation vs
    // parallel workers). The frozen matrix deliberately ignores it: it depends
    // only on the config seed, so every sampler built from the same config
    // sees the identical matrix.
    explicit NoiseSampler(NoiseConfig cfg, std::uint64_t stream = streams::noise)
        : cfg_(cfg), rng_(cfg.seed, stream) {
        cfg_.validate();
    }

    const NoiseConfig& config() const { return cfg_; }

    // Draws sigma for one patch: fixed value, or uniform over [lo,hi).
    double draw_sigma() {
        if (!cfg_.is_range()) return cfg_.sigma_lo;
        return rng_.uniform(cfg_.sigma_lo, cfg_.sigma_hi);
    }

    // Zero-mean Gaussian tensor with std sigma/255. Frozen mode returns the
    // cached matrix for every call and rejects any other shape.
    Tensor4 sample(Shape shape) {
        if (cfg_.seed_policy == SeedPolicy::frozen) {
            if (!frozen_ready_) {
                frozen_ = make_frozen(shape);
                frozen_ready_ = true;
            }
            if (!(frozen_.shape() == shape)) {
                throw std::invalid_argument("NoiseSampler: frozen matrix has shape " +
                                            frozen_.shape().to_string() + ", requested " +
                                            shape.to_string());
            }
            return frozen_;
        }
        return draw(shape, rng_, draw_sigma());
    }

    // y = x + noise, unclamped. Returns the sigma that was used (byte scale).
    std::pair<Tensor4, double> corrupt(const Tensor4& x) {
        if (cfg_.seed_policy == SeedPolicy::frozen) {
            Tensor4 n = sample(x.shape());
            return {add(x, n), frozen_sigma_};
        }
        const double sigma = draw_sigma();
        Tensor4 y = draw(x.shape(), rng_, sigma);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
        return {std::move(y), sigma};
    }

private:
    Tensor4 make_frozen(Shape shape) {
        Rng rng(cfg_.seed, streams::frozen);
        frozen_sigma_ = cfg_.is_range() ? Rng(cfg_.seed, streams::frozen + 1)
                                              .uniform(cfg_.sigma_lo, cfg_.sigma_hi)
                                        : cfg_.sigma_lo;
        return draw(shape, rng, frozen_sigma_);
    }

    static Tensor4 draw(Shape shape, Rng& rng, double sigma_byte) {
        Tensor4 out(shape);
        const double sigma = sigma_byte / 255.0;
        if (sigma == 0.0) return out;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigma * rng.gaussian();
        return out;
    }

    NoiseConfig cfg_;
    Rng rng_;
    Tensor4 frozen_;
    double frozen_sigma_ = 0.0;
    bool frozen_ready_ = false;
};

}  // namespace win
