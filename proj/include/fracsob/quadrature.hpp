#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "common.hpp"

namespace fracsob {

struct GaussRule {
    std::vector<double> x;  // nodes on (0, 1)
    std::vector<double> w;  // weights summing to 1
};

/// Gauss-Legendre rule mapped to (0, 1).
inline const GaussRule& gauss_legendre(int n) {
    static std::map<int, GaussRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(n); it != cache.end()) return it->second;
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        r.x[n - 1 - i] = 0.5 * (1.0 + z);
        r.w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    return cache.emplace(n, std::move(r)).first->second;
}

struct RichardsonFit {
    double limit = 0.0;
    double coefficient = 0.0;
    double order = 0.0;
    double max_residual = 0.0;
};

/// Least-squares fit of v(h) = limit + coefficient * h^order.
inline RichardsonFit richardson(const std::vector<double>& h, const std::vector<double>& v, double order) {
    if (h.size() != v.size() || h.size() < 2) throw ShapeError("richardson: need >= 2 matched samples");
    std::vector<double> x(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) x[i] = std::pow(h[i], order);
    const double c = ols_slope(x, v);
    double mx = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        mx += x[i];
        mv += v[i];
    }
    mx /= static_cast<double>(h.size());
    mv /= static_cast<double>(h.size());
    RichardsonFit f;
    f.order = order;
    f.coefficient = c;
    f.limit = mv - c * mx;
    for (std::size_t i = 0; i < h.size(); ++i)
        f.max_residual = std::max(f.max_residual, std::abs(v[i] - f.limit - c * x[i]));
    return f;
}

}  // namespace fracsob
