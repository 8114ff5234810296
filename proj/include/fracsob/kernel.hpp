#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "manifold.hpp"

namespace fracsob {

struct FracParams {
    int n = 1;
    double s = 0.5;
    double p = 2.0;

    FracParams() = default;
    FracParams(int n_, double s_, double p_) : n(n_), s(s_), p(p_) { validate(); }

    void validate() const {
        if (n < 1) throw ConfigError("FracParams: n must be a positive integer");
        if (!(s > 0.0 && s < 1.0)) throw ConfigError("FracParams: s must lie in (0,1)");
        if (!(p > 1.0)) throw ConfigError("FracParams: p must exceed 1");
        if (!(s * p < n)) throw DomainError("FracParams: requires s*p < n");
    }

    /// Critical exponent np/(n - sp).
    [[nodiscard]] double pstar() const { return n * p / (n - s * p); }
    /// Kernel singularity order n + ps.
    [[nodiscard]] double order() const { return n + p * s; }

    bool operator==(const FracParams&) const = default;
};

enum class KernelKind { pure_fractional, fractional_plus_tail, custom };

inline std::string to_string(KernelKind k) {
    switch (k) {
        case KernelKind::pure_fractional: return "pure_fractional";
        case KernelKind::fractional_plus_tail: return "fractional_plus_tail";
        case KernelKind::custom: return "custom";
    }
    return "?";
}

inline KernelKind parse_kernel_kind(const std::string& s) {
    if (s == "pure_fractional" || s == "pure") return KernelKind::pure_fractional;
    if (s == "fractional_plus_tail" || s == "tail") return KernelKind::fractional_plus_tail;
    throw ConfigError("unknown kernel kind '" + s + "'");
}

/// User kernel K(x, y, d_g(x, y)).
using KernelFn = std::function<double(const Point&, const Point&, double)>;

struct KernelSpec {
    FracParams params;
    KernelKind kind = KernelKind::pure_fractional;
    double alpha = 0.0;
    double lambda_bound = 2.0;
    KernelFn custom_fn;
    // Custom kernels that depend on d only may set this to reuse lattice offset tables.
    bool custom_isotropic = false;

    static KernelSpec pure(FracParams fp, double lambda = 2.0) {
        KernelSpec k;
        k.params = fp;
        k.kind = KernelKind::pure_fractional;
        k.lambda_bound = lambda;
        k.validate();
        return k;
    }

    static KernelSpec tail(FracParams fp, double alpha, double lambda) {
        KernelSpec k;
        k.params = fp;
        k.kind = KernelKind::fractional_plus_tail;
        k.alpha = alpha;
        k.lambda_bound = lambda;
        k.validate();
        return k;
    }

    static KernelSpec custom(FracParams fp, KernelFn fn, double lambda, bool isotropic = false) {
        KernelSpec k;
        k.params = fp;
        k.kind = KernelKind::custom;
        k.custom_fn = std::move(fn);
        k.lambda_bound = lambda;
        k.custom_isotropic = isotropic;
        k.validate();
        return k;
    }

    void validate() const {
        params.validate();
        if (!(lambda_bound > 1.0)) throw ConfigError("KernelSpec: lambda_bound must exceed 1");
        if (kind == KernelKind::fractional_plus_tail && !(alpha > 0.0 && alpha < params.order()))
            throw ConfigError("KernelSpec: alpha must lie in (0, n + p s)");
        if (kind == KernelKind::custom && !custom_fn) throw ConfigError("KernelSpec: custom kernel without function");
    }

    [[nodiscard]] bool isotropic() const { return kind != KernelKind::custom || custom_isotropic; }
};

/// K(d) for built-in kernels; custom kernels are evaluated at the origin pair.
inline double eval_kernel(const KernelSpec& spec, double d) {
    if (!(d > 0.0)) throw DomainError("eval_kernel: distance must be positive");
    const double a = spec.params.order();
    switch (spec.kind) {
        case KernelKind::pure_fractional: return std::pow(d, -a);
        case KernelKind::fractional_plus_tail: return std::pow(d, -a) + std::pow(d, -spec.alpha);
        case KernelKind::custom: return spec.custom_fn(Point{0.0, 0.0}, Point{d, 0.0}, d);
    }
    return 0.0;
}

inline double eval_kernel(const KernelSpec& spec, const Point& x, const Point& y, double d) {
    if (spec.kind == KernelKind::custom) {
        if (!(d > 0.0)) throw DomainError("eval_kernel: distance must be positive");
        return spec.custom_fn(x, y, d);
    }
    return eval_kernel(spec, d);
}

/// K(d) d^{n+ps}; closed form for built-in kernels.
inline double normalized_kernel(const KernelSpec& spec, double d) {
    if (!(d > 0.0)) throw DomainError("normalized_kernel: distance must be positive");
    switch (spec.kind) {
        case KernelKind::pure_fractional: return 1.0;
        case KernelKind::fractional_plus_tail: return 1.0 + std::pow(d, spec.params.order() - spec.alpha);
        case KernelKind::custom: return eval_kernel(spec, d) * std::pow(d, spec.params.order());
    }
    return 0.0;
}

inline double normalized_kernel(const KernelSpec& spec, const Point& x, const Point& y, double d) {
    if (spec.kind == KernelKind::custom) return eval_kernel(spec, x, y, d) * std::pow(d, spec.params.order());
    return normalized_kernel(spec, d);
}

namespace detail {

/// Calls f(i, j, d) for every unordered off-diagonal pair i < j.
template <class F>
void for_each_pair(const Grid& g, F&& f) {
    const std::size_t n = g.count();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) f(i, j, geodesic_distance(g.manifold, g.points[i], g.points[j]));
}

}  // namespace detail

struct K3Report {
    double inf = 0.0;
    double sup = 0.0;
    double lambda_bound = 0.0;
    double d_min = 0.0;
    double d_max = 0.0;
    bool passes = false;
};

inline K3Report check_k3_bounds(const KernelSpec& spec, const Grid& grid) {
    if (grid.count() < 2) throw ConfigError("check_k3_bounds: need at least 2 grid points");
    K3Report r;
    r.lambda_bound = spec.lambda_bound;
    r.inf = INFINITY;
    r.sup = -INFINITY;
    r.d_min = INFINITY;
    r.d_max = 0.0;
    detail::for_each_pair(grid, [&](std::size_t i, std::size_t j, double d) {
        const double v = normalized_kernel(spec, grid.points[i], grid.points[j], d);
        r.inf = std::min(r.inf, v);
        r.sup = std::max(r.sup, v);
        r.d_min = std::min(r.d_min, d);
        r.d_max = std::max(r.d_max, d);
    });
    r.passes = (1.0 / spec.lambda_bound < r.inf) && (r.inf <= r.sup) && (r.sup < spec.lambda_bound);
    return r;
}

/// max |K(x,y) - K(y,x)| over grid pairs.
inline double check_k2_symmetry(const KernelSpec& spec, const Grid& grid) {
    double worst = 0.0;
    detail::for_each_pair(grid, [&](std::size_t i, std::size_t j, double) {
        const auto& x = grid.points[i];
        const auto& y = grid.points[j];
        const double a = eval_kernel(spec, x, y, geodesic_distance(grid.manifold, x, y));
        const double b = eval_kernel(spec, y, x, geodesic_distance(grid.manifold, y, x));
        worst = std::max(worst, std::abs(a - b));
    });
    return worst;
}

/// Quadrature of min{d^p, 1} K over off-diagonal pairs.
inline double check_k1_integrable(const KernelSpec& spec, const Grid& grid) {
    const double p = spec.params.p;
    const std::size_t n = grid.count();
    return 2.0 * reduce_rows(n, [&](std::size_t i) {
        CompensatedSum acc;
        const auto& x = grid.points[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& y = grid.points[j];
            const double d = geodesic_distance(grid.manifold, x, y);
            acc.add(std::min(std::pow(d, p), 1.0) * eval_kernel(spec, x, y, d) * grid.weights[j]);
        }
        return acc.value() * grid.weights[i];
    });
}

struct K4Report {
    double eps = 0.0;
    double max_deviation = 0.0;
};

/// max over pairs of |eps^{n+ps} K(exp eps X, exp eps Y) |X-Y|^{n+ps} - 1|.
inline K4Report check_k4_blowup(const KernelSpec& spec, const ManifoldDesc& desc, const Point& x0,
                                const std::vector<std::pair<TangentVector, TangentVector>>& pairs, double eps) {
    if (!(eps > 0.0)) throw DomainError("check_k4_blowup: eps must be positive");
    const double inj = injectivity_radius(desc);
    const double a = spec.params.order();
    K4Report rep;
    rep.eps = eps;
    for (const auto& [X, Y] : pairs) {
        if (X == Y) throw DomainError("check_k4_blowup: pair with X == Y");
        if (eps * tangent_norm(X) >= inj || eps * tangent_norm(Y) >= inj)
            throw DomainError("check_k4_blowup: eps*|X| must stay below the injectivity radius");
        const TangentVector eX{eps * X[0], eps * X[1]};
        const TangentVector eY{eps * Y[0], eps * Y[1]};
        const double d = chart_distance(desc, x0, eX, eY);
        // |eps X - eps Y| equals eps |X - Y| in exact arithmetic.
        const double r = std::hypot(eX[0] - eY[0], eX[1] - eY[1]);
        double ratio;
        if (spec.kind == KernelKind::custom) {
            const Point px = exp_map(desc, x0, eX), py = exp_map(desc, x0, eY);
            ratio = eval_kernel(spec, px, py, d) * std::pow(r, a);
        } else {
            ratio = (r == d ? 1.0 : std::pow(r / d, a)) * normalized_kernel(spec, d);
        }
        rep.max_deviation = std::max(rep.max_deviation, std::abs(ratio - 1.0));
    }
    return rep;
}

inline std::vector<K4Report> check_k4_ladder(const KernelSpec& spec, const ManifoldDesc& desc, const Point& x0,
                                             const std::vector<std::pair<TangentVector, TangentVector>>& pairs,
                                             const std::vector<double>& eps_ladder) {
    std::vector<K4Report> out;
    out.reserve(eps_ladder.size());
    for (double e : eps_ladder) out.push_back(check_k4_blowup(spec, desc, x0, pairs, e));
    return out;
}

/// Deterministic pairs (X, Y) in the closed ball of the given radius, dimension-aware.
inline std::vector<std::pair<TangentVector, TangentVector>> default_k4_pairs(int dim, double radius, int count = 64) {
    std::vector<std::pair<TangentVector, TangentVector>> out;
    for (int k = 0; k < count; ++k) {
        const double t = (k + 0.5) / count;
        const double a1 = 2.0 * kPi * t, a2 = 2.0 * kPi * std::fmod(t * 7.0 + 0.3, 1.0);
        const double r1 = radius * std::sqrt(t), r2 = radius * std::sqrt(std::fmod(t * 3.0 + 0.5, 1.0));
        TangentVector X{r1 * std::cos(a1), dim == 2 ? r1 * std::sin(a1) : 0.0};
        TangentVector Y{r2 * std::cos(a2), dim == 2 ? r2 * std::sin(a2) : 0.0};
        if (dim == 1) {
            X = {radius * (2.0 * t - 1.0), 0.0};
            Y = {radius * (2.0 * std::fmod(t * 3.0 + 0.5, 1.0) - 1.0), 0.0};
        }
        if (X != Y) out.emplace_back(X, Y);
    }
    return out;
}

}  // namespace fracsob
