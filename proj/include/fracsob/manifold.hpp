#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "common.hpp"

namespace fracsob {

enum class ManifoldKind { circle, torus, sphere };

inline std::string to_string(ManifoldKind k) {
    switch (k) {
        case ManifoldKind::circle: return "circle";
        case ManifoldKind::torus: return "torus";
        case ManifoldKind::sphere: return "sphere";
    }
    return "?";
}

inline ManifoldKind parse_manifold_kind(const std::string& s) {
    if (s == "circle") return ManifoldKind::circle;
    if (s == "torus") return ManifoldKind::torus;
    if (s == "sphere") return ManifoldKind::sphere;
    throw ConfigError("unsupported manifold kind '" + s + "'");
}

/// Intrinsic coordinates. circle: (theta, -), torus: (x, y) in [0,L), sphere: (polar, azimuth).
using Point = std::array<double, 2>;

/// Tangent components in an orthonormal frame, length units. Unused slots are zero.
/// Sphere frame at (theta, phi) is (e_theta, e_phi).
using TangentVector = std::array<double, 2>;

struct ManifoldDesc {
    ManifoldKind kind = ManifoldKind::torus;
    int dim = 1;
    double scale = 1.0;  // torus side L, circle/sphere radius R

    void validate() const {
        if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("manifold scale must be positive");
        switch (kind) {
            case ManifoldKind::circle:
                if (dim != 1) throw ConfigError("unsupported manifold: circle requires dim 1");
                break;
            case ManifoldKind::torus:
                if (dim != 1 && dim != 2) throw ConfigError("unsupported manifold: torus requires dim 1 or 2");
                break;
            case ManifoldKind::sphere:
                if (dim != 2) throw ConfigError("unsupported manifold: sphere requires dim 2");
                break;
        }
    }

    [[nodiscard]] bool flat() const { return kind != ManifoldKind::sphere; }

    [[nodiscard]] double volume() const {
        switch (kind) {
            case ManifoldKind::circle: return 2.0 * kPi * scale;
            case ManifoldKind::torus: return std::pow(scale, dim);
            case ManifoldKind::sphere: return 4.0 * kPi * scale * scale;
        }
        return 0.0;
    }

    bool operator==(const ManifoldDesc&) const = default;
};

struct Grid {
    ManifoldDesc manifold;
    std::vector<Point> points;
    std::vector<double> weights;
    // Uniform lattice side count (torus, circle); 0 for scattered grids.
    int lattice_res = 0;

    [[nodiscard]] std::size_t count() const { return points.size(); }
    [[nodiscard]] bool is_lattice() const { return lattice_res > 0; }
    /// Lattice spacing in length units (0 for scattered grids).
    [[nodiscard]] double spacing() const {
        if (!is_lattice()) return std::sqrt(manifold.volume() / static_cast<double>(count()));
        if (manifold.kind == ManifoldKind::circle) return 2.0 * kPi * manifold.scale / lattice_res;
        return manifold.scale / lattice_res;
    }
    [[nodiscard]] double total_weight() const { return compensated_sum(weights); }
};

using GridPtr = std::shared_ptr<const Grid>;

namespace detail {

inline double wrap_signed(double d, double period) {
    d = std::fmod(d, period);
    if (d > 0.5 * period) d -= period;
    if (d < -0.5 * period) d += period;
    return d;
}

inline double wrap_unit(double x, double period) {
    double r = std::fmod(x, period);
    if (r < 0.0) r += period;
    if (r >= period) r -= period;
    return r;
}

using Vec3 = std::array<double, 3>;

inline Vec3 embed(const Point& p) {
    const double st = std::sin(p[0]);
    return {st * std::cos(p[1]), st * std::sin(p[1]), std::cos(p[0])};
}

inline Point unembed(const Vec3& v) {
    const double th = std::atan2(std::hypot(v[0], v[1]), v[2]);
    double ph = std::atan2(v[1], v[0]);
    if (ph < 0.0) ph += 2.0 * kPi;
    return {th, ph};
}

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline void sphere_frame(const Point& p, Vec3& et, Vec3& ep) {
    const double ct = std::cos(p[0]), st = std::sin(p[0]);
    const double cp = std::cos(p[1]), sp = std::sin(p[1]);
    et = {ct * cp, ct * sp, -st};
    ep = {-sp, cp, 0.0};
}

inline double sphere_angle(const Vec3& a, const Vec3& b) { return std::atan2(norm(cross(a, b)), dot(a, b)); }

}  // namespace detail

inline Grid build_grid(const ManifoldDesc& desc, int resolution) {
    desc.validate();
    if (resolution < 4) throw ConfigError("grid resolution must be >= 4");
    Grid g;
    g.manifold = desc;
    const double L = desc.scale;
    switch (desc.kind) {
        case ManifoldKind::circle: {
            g.lattice_res = resolution;
            const double w = 2.0 * kPi * L / resolution;
            for (int i = 0; i < resolution; ++i) {
                g.points.push_back({2.0 * kPi * i / resolution, 0.0});
                g.weights.push_back(w);
            }
            break;
        }
        case ManifoldKind::torus: {
            g.lattice_res = resolution;
            const double h = L / resolution;
            if (desc.dim == 1) {
                for (int i = 0; i < resolution; ++i) {
                    g.points.push_back({i * h, 0.0});
                    g.weights.push_back(h);
                }
            } else {
                const double w = h * h;
                for (int i = 0; i < resolution; ++i)
                    for (int j = 0; j < resolution; ++j) {
                        g.points.push_back({i * h, j * h});
                        g.weights.push_back(w);
                    }
            }
            break;
        }
        case ManifoldKind::sphere: {
            const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
            const double w = 4.0 * kPi * L * L / resolution;
            for (int i = 0; i < resolution; ++i) {
                const double z = 1.0 - (2.0 * i + 1.0) / resolution;
                const double ph = detail::wrap_unit(2.0 * kPi * i / golden, 2.0 * kPi);
                g.points.push_back({std::acos(z), ph});
                g.weights.push_back(w);
            }
            break;
        }
    }
    return g;
}

inline GridPtr make_grid(const ManifoldDesc& desc, int resolution) {
    return std::make_shared<const Grid>(build_grid(desc, resolution));
}

inline double injectivity_radius(const ManifoldDesc& desc) {
    switch (desc.kind) {
        case ManifoldKind::torus: return desc.scale / 2.0;
        case ManifoldKind::circle:
        case ManifoldKind::sphere: return kPi * desc.scale;
    }
    return 0.0;
}

inline double geodesic_distance(const ManifoldDesc& desc, const Point& x, const Point& y) {
    switch (desc.kind) {
        case ManifoldKind::circle:
            return desc.scale * std::abs(detail::wrap_signed(y[0] - x[0], 2.0 * kPi));
        case ManifoldKind::torus: {
            const double dx = std::abs(detail::wrap_signed(y[0] - x[0], desc.scale));
            if (desc.dim == 1) return dx;
            const double dy = std::abs(detail::wrap_signed(y[1] - x[1], desc.scale));
            return std::hypot(dx, dy);
        }
        case ManifoldKind::sphere:
            if (x == y) return 0.0;
            return desc.scale * detail::sphere_angle(detail::embed(x), detail::embed(y));
    }
    return 0.0;
}

inline double tangent_norm(const TangentVector& v) { return std::hypot(v[0], v[1]); }

inline Point exp_map(const ManifoldDesc& desc, const Point& x0, const TangentVector& v) {
    switch (desc.kind) {
        case ManifoldKind::circle:
            return {detail::wrap_unit(x0[0] + v[0] / desc.scale, 2.0 * kPi), 0.0};
        case ManifoldKind::torus:
            if (desc.dim == 1) return {detail::wrap_unit(x0[0] + v[0], desc.scale), 0.0};
            return {detail::wrap_unit(x0[0] + v[0], desc.scale), detail::wrap_unit(x0[1] + v[1], desc.scale)};
        case ManifoldKind::sphere: {
            const double t = tangent_norm(v);
            if (t == 0.0) return x0;
            detail::Vec3 et, ep;
            detail::sphere_frame(x0, et, ep);
            const auto a = detail::embed(x0);
            const double ang = t / desc.scale;
            const double c = std::cos(ang), s = std::sin(ang) / t;
            detail::Vec3 y;
            for (int k = 0; k < 3; ++k) y[k] = c * a[k] + s * (v[0] * et[k] + v[1] * ep[k]);
            return detail::unembed(y);
        }
    }
    return x0;
}

inline TangentVector log_map(const ManifoldDesc& desc, const Point& x0, const Point& y) {
    switch (desc.kind) {
        case ManifoldKind::circle: {
            const double d = detail::wrap_signed(y[0] - x0[0], 2.0 * kPi);
            if (std::abs(d) >= kPi) throw DomainError("log_map: point on the cut locus");
            return {desc.scale * d, 0.0};
        }
        case ManifoldKind::torus: {
            const double half = 0.5 * desc.scale;
            const double dx = detail::wrap_signed(y[0] - x0[0], desc.scale);
            const double dy = desc.dim == 2 ? detail::wrap_signed(y[1] - x0[1], desc.scale) : 0.0;
            if (std::abs(dx) >= half || std::abs(dy) >= half) throw DomainError("log_map: point on the cut locus");
            return {dx, dy};
        }
        case ManifoldKind::sphere: {
            if (x0 == y) return {0.0, 0.0};
            const auto a = detail::embed(x0);
            const auto b = detail::embed(y);
            const double ang = detail::sphere_angle(a, b);
            if (ang == 0.0) return {0.0, 0.0};
            if (ang >= kPi * (1.0 - 1e-14)) throw DomainError("log_map: antipodal point (cut locus)");
            const double ab = detail::dot(a, b);
            detail::Vec3 dir;
            for (int k = 0; k < 3; ++k) dir[k] = b[k] - ab * a[k];
            const double dn = detail::norm(dir);
            detail::Vec3 et, ep;
            detail::sphere_frame(x0, et, ep);
            const double r = desc.scale * ang / dn;
            return {r * detail::dot(dir, et), r * detail::dot(dir, ep)};
        }
    }
    return {0.0, 0.0};
}

/// d_g(exp_{x0} X, exp_{x0} Y). On flat manifolds the exponential chart is an
/// isometry inside the injectivity radius, so the wrapped tangent difference is used
/// directly without passing through reduced coordinates.
inline double chart_distance(const ManifoldDesc& desc, const Point& x0, const TangentVector& X,
                             const TangentVector& Y) {
    if (desc.flat()) {
        if (desc.kind == ManifoldKind::circle) {
            const double period = 2.0 * kPi * desc.scale;
            return std::abs(detail::wrap_signed(X[0] - Y[0], period));
        }
        const double dx = std::abs(detail::wrap_signed(X[0] - Y[0], desc.scale));
        if (desc.dim == 1) return dx;
        const double dy = std::abs(detail::wrap_signed(X[1] - Y[1], desc.scale));
        return std::hypot(dx, dy);
    }
    return geodesic_distance(desc, exp_map(desc, x0, X), exp_map(desc, x0, Y));
}

/// C^2 smoothstep cutoff: 1 on [0, delta], 0 on [2 delta, inf).
inline double cutoff(double d, double delta) {
    const double r = d / delta;
    if (r <= 1.0) return 1.0;
    if (r >= 2.0) return 0.0;
    const double t = r - 1.0;
    return 1.0 - t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

/// Real samples aligned with a grid's points.
struct DiscreteFunction {
    GridPtr grid;
    std::vector<double> values;

    DiscreteFunction() = default;
    DiscreteFunction(GridPtr g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
        if (!grid) throw ShapeError("DiscreteFunction: null grid");
        if (values.size() != grid->count()) throw ShapeError("DiscreteFunction: value count != grid point count");
        for (double x : values)
            if (!std::isfinite(x)) throw DomainError("DiscreteFunction: non-finite value");
    }

    static DiscreteFunction constant(GridPtr g, double c) {
        const std::size_t n = g->count();
        return {std::move(g), std::vector<double>(n, c)};
    }

    template <class F>
    static DiscreteFunction sample(GridPtr g, F&& f) {
        std::vector<double> v;
        v.reserve(g->count());
        for (const auto& p : g->points) v.push_back(f(p));
        return {std::move(g), std::move(v)};
    }

    [[nodiscard]] std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }

    [[nodiscard]] DiscreteFunction scaled(double c) const {
        auto v = values;
        for (auto& x : v) x *= c;
        return {grid, std::move(v)};
    }
};

inline void require_same_grid(const DiscreteFunction& a, const DiscreteFunction& b) {
    if (a.grid != b.grid && !(a.grid && b.grid && a.grid->points == b.grid->points &&
                               a.grid->manifold == b.grid->manifold && a.grid->weights == b.grid->weights))
        throw ShapeError("functions live on different grids");
    if (a.size() != b.size()) throw ShapeError("function sizes differ");
}

inline std::vector<DiscreteFunction> partition_of_unity(const GridPtr& grid, const std::vector<Point>& centers,
                                                        double delta) {
    const auto& desc = grid->manifold;
    if (centers.empty()) throw ConfigError("partition_of_unity: no centers");
    if (!(delta > 0.0) || delta >= injectivity_radius(desc))
        throw ConfigError("partition_of_unity: delta must lie in (0, injectivity radius)");
    const std::size_t n = grid->count();
    std::vector<std::vector<double>> raw(centers.size(), std::vector<double>(n, 0.0));
    std::vector<double> total(n, 0.0);
    for (std::size_t c = 0; c < centers.size(); ++c)
        for (std::size_t i = 0; i < n; ++i) {
            raw[c][i] = cutoff(geodesic_distance(desc, centers[c], grid->points[i]), delta);
            total[i] += raw[c][i];
        }
    for (std::size_t i = 0; i < n; ++i)
        if (total[i] <= 0.0) {
            const auto& p = grid->points[i];
            throw CoverageError("partition_of_unity: grid point " + std::to_string(i) + " (" + std::to_string(p[0]) +
                                ", " + std::to_string(p[1]) + ") is not covered");
        }
    std::vector<DiscreteFunction> out;
    out.reserve(centers.size());
    for (std::size_t c = 0; c < centers.size(); ++c) {
        for (std::size_t i = 0; i < n; ++i) raw[c][i] /= total[i];
        out.emplace_back(grid, std::move(raw[c]));
    }
    return out;
}

}  // namespace fracsob
