#include "melc/rng.hpp"

#include <cmath>
#include <numbers>

namespace melc::rng {

double Sampler::gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = uniform01_open_low();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
}

Vec Sampler::unit_vector(std::size_t d) {
    Vec v(d);
    for (;;) {
        double ss = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            v[i] = gaussian();
            ss += v[i] * v[i];
        }
        if (ss > 1e-24) {
            const double inv = 1.0 / std::sqrt(ss);
            for (double& x : v) x *= inv;
            return v;
        }
    }
}

}  // namespace melc::rng
