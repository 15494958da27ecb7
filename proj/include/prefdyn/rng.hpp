// Deterministic random draws. The mappings from raw engine output to doubles
// are written out by hand so that a (seed, draw sequence) pair produces the
// same stream on every standard library.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "prefdyn/types.hpp"

namespace prefdyn {

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }

    // uniform in [0, 1)
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return engine_() % n; }

    // standard normal via Box-Muller; draws two uniforms per pair
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    Vec gaussian_vec(std::size_t n) {
        Vec v(n);
        for (auto& x : v) x = gaussian();
        return v;
    }

    Vec uniform_vec(std::size_t n, double lo, double hi) {
        Vec v(n);
        for (auto& x : v) x = uniform(lo, hi);
        return v;
    }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace prefdyn
