#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "tensor.hpp"

namespace xnet {

// Deterministic generator: splitmix64 (Steele et al.), fully specified so the
// same seed yields the same stream on every platform. No std:: engine is used
// anywhere in the library.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 3) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit mantissa.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) {
        if (!(lo < hi)) throw std::invalid_argument("Rng::uniform: empty interval [lo, hi)");
        return lo + (hi - lo) * next_double();
    }

    // Standard normal via the polar-free Box-Muller transform. Draws a fresh
    // pair each call so the stream position is a pure function of call count.
    double normal() {
        double u1 = next_double();
        double u2 = next_double();
        // guard log(0)
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

    // Fisher-Yates shuffle driven by this stream.
    template <typename Vec>
    void shuffle(Vec& v) {
        if (v.empty()) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(next_u64() % (i + 1));
            std::swap(v[i], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

template <typename T>
Tensor<T> rng_uniform(Rng& rng, const Shape& shape, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("rng_uniform: empty interval");
    Tensor<T> t(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

// He-normal initialization: normal(0, sqrt(2/fan_in)). Stands in for
// pretrained weights; suits ReLU activations.
template <typename T>
Tensor<T> he_normal_init(Rng& rng, const Shape& shape, std::size_t fan_in) {
    if (fan_in == 0) throw std::invalid_argument("he_normal_init: fan_in must be >= 1");
    double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Tensor<T> t(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(stddev * rng.normal());
    return t;
}

}  // namespace xnet
