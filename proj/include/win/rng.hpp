#pragma once

// Deterministic PRNG used everywhere randomness is needed, so that runs are
// bit-reproducible across machines and platform RNG differences cannot leak in.
//
// Generator: xoshiro256++ (Blackman & Vigna), state seeded with splitmix64.
// Independent streams come from folding a stream id into the seed before the
// splitmix64 expansion. Standard normals use the trigonometric Box-Muller
// transform (no rejection step, so the draw count per call is fixed).

#include <array>
#include <cmath>
#include <cstdint>

namespace win {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t sm = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0,n) via the multiply-shift reduction.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Uniform in [lo,hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the second deviate of each pair is cached.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0,1], keeps log() finite
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * pi() * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    static constexpr double pi() { return 3.14159265358979323846; }
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Stream ids for the fixed purposes of a training run. Derived generators are
// independent per purpose, so adding a consumer never shifts another's sequence.
namespace streams {
inline constexpr std::uint64_t init = 1;      // weight initialization
inline constexpr std::uint64_t shuffle = 2;   // per-epoch batch shuffling
inline constexpr std::uint64_t noise = 3;     // training noise draws
inline constexpr std::uint64_t val = 4;       // validation noise draws
inline constexpr std::uint64_t frozen = 100;  // the one frozen noise matrix
}  // namespace streams

}  // namespace win
