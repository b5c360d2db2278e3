#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace otr {

// Deterministic random stream. All randomness in the library flows through
// this wrapper so that builds and benchmarks replay bit-identically for a
// fixed seed. std::mt19937_64 output is pinned by the standard; the
// distribution mappings below are implemented by hand because the standard
// library's distribution classes are not pinned across implementations.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi). Consumes exactly one draw even when lo == hi.
    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Uniform in {0, ..., n-1}. Modulo bias is negligible for the small n
    // used here (axis counts).
    std::uint32_t next_index(std::uint32_t n) {
        return static_cast<std::uint32_t>(gen_() % n);
    }

    // Standard normal via Box-Muller.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_unit();
        while (u1 <= 0.0) u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace otr
