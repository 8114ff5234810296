#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "manifold.hpp"

namespace fracsob {

/// Deterministic generator; uniform doubles are built from raw 64-bit draws so the
/// sequence does not depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

private:
    std::mt19937_64 eng_;
};

/// Random smooth field with modes up to kmax: Fourier modes on the torus and circle,
/// polynomials of degree <= kmax in the embedding coordinates on the sphere.
inline DiscreteFunction band_limited_field(const GridPtr& grid, Rng& rng, int kmax = 4) {
    const auto& m = grid->manifold;
    std::vector<double> v(grid->count(), 0.0);
    const double c0 = rng.uniform(-1.0, 1.0);
    if (m.kind == ManifoldKind::sphere) {
        std::vector<std::array<int, 3>> mono;
        std::vector<double> coef;
        for (int a = 0; a <= kmax; ++a)
            for (int b = 0; a + b <= kmax; ++b)
                for (int c = 0; a + b + c <= kmax; ++c) {
                    if (a + b + c == 0) continue;
                    mono.push_back({a, b, c});
                    coef.push_back(rng.uniform(-1.0, 1.0) / (1.0 + a + b + c));
                }
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto& p = grid->points[i];
            const double x = std::sin(p[0]) * std::cos(p[1]), y = std::sin(p[0]) * std::sin(p[1]), z = std::cos(p[0]);
            double acc = c0;
            for (std::size_t k = 0; k < mono.size(); ++k)
                acc += coef[k] * std::pow(x, mono[k][0]) * std::pow(y, mono[k][1]) * std::pow(z, mono[k][2]);
            v[i] = acc;
        }
        return {grid, std::move(v)};
    }
    const double period = m.kind == ManifoldKind::circle ? 2.0 * kPi : m.scale;
    for (auto& x : v) x = c0;
    for (int kx = 0; kx <= kmax; ++kx)
        for (int ky = (m.dim == 2 ? -kmax : 0); ky <= (m.dim == 2 ? kmax : 0); ++ky) {
            if (kx == 0 && ky <= 0) continue;
            const double damp = 1.0 + kx * kx + ky * ky;
            const double a = rng.uniform(-1.0, 1.0) / damp;
            const double b = rng.uniform(-1.0, 1.0) / damp;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const auto& p = grid->points[i];
                const double ph = 2.0 * kPi * (kx * p[0] + (m.dim == 2 ? ky * p[1] : 0.0)) / period;
                v[i] += a * std::cos(ph) + b * std::sin(ph);
            }
        }
    return {grid, std::move(v)};
}

}  // namespace fracsob
