#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace gridmdp {

/**
 * Seeded random source used everywhere randomness is needed.
 *
 * Engine is std::mt19937_64, whose output sequence is fixed by the C++
 * standard. The std distributions are implementation-defined, so doubles are
 * built from the top 53 bits by hand and normals use Box-Muller. Together this
 * makes every sampled sequence identical across compilers and platforms.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace gridmdp
