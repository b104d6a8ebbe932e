#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace shrinkerlab {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

// Errors carry enough context to act on (required rho_max, achieved
// tolerance, last residual, ...). Message text is the diagnostic.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidArgument : Error {
    using Error::Error;
};
struct ConvergenceError : Error {
    using Error::Error;
};

// Surface area of the unit (d-1)-sphere in R^d; sphere_area(1) = 2,
// sphere_area(2) = 2*pi, sphere_area(3) = 4*pi.
inline double sphere_area(int d) {
    return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d);
}

// Volume of the unit ball in R^d.
inline double ball_volume_unit(int d) { return sphere_area(d) / d; }

// x*log(x) with the continuous extension by 0 at x = 0.
inline double xlogx(double x) {
    if (x <= 1e-300) return 0.0;
    return x * std::log(x);
}

inline double sq(double x) { return x * x; }

// Deterministic splittable RNG. std::uniform_real_distribution is
// implementation-defined, so doubles are produced by an explicit
// bit recipe to keep reports byte-stable across standard libraries.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ull) {
        next_u64();
        next_u64();
    }

    // Independent substream for a named task; order of use does not matter.
    RngStream fork(const std::string& label) const {
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char c : label) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return RngStream(state_ ^ h);
    }

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

  private:
    std::uint64_t state_;
};

}  // namespace shrinkerlab
