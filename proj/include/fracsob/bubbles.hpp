#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "common.hpp"
#include "euclidean.hpp"
#include "kernel.hpp"
#include "manifold.hpp"
#include "pairs.hpp"
#include "quadrature.hpp"
#include "sobolev.hpp"

namespace fracsob {

enum class CutoffProfile { smoothstep_c2 };

struct BubbleConfig {
    FracParams params{2, 0.5, 2.0};
    Point center{0.0, 0.0};
    double eps = 0.1;
    double delta = 0.2;
    CutoffProfile cutoff = CutoffProfile::smoothstep_c2;
    double amplitude = 1.0;  // constant multiple of u_eps

    void validate(const ManifoldDesc& desc) const {
        params.validate();
        if (params.p != 2.0) throw ConfigError("BubbleConfig: bubbles require p = 2");
        if (params.n != desc.dim) throw ConfigError("BubbleConfig: params.n must equal the manifold dimension");
        if (!(eps > 0.0)) throw ConfigError("BubbleConfig: eps must be positive");
        if (!(delta > 0.0)) throw ConfigError("BubbleConfig: delta must be positive");
        if (!(2.0 * delta < injectivity_radius(desc)))
            throw ConfigError("BubbleConfig: 2*delta must be smaller than the injectivity radius");
    }

    [[nodiscard]] BubbleConfig with_eps(double e) const {
        BubbleConfig c = *this;
        c.eps = e;
        return c;
    }
};

/// Decay exponent n - 2s of the extremal profile.
inline double bubble_gamma(const FracParams& fp) { return fp.n - 2.0 * fp.s; }

inline double bubble_U_radial(double r, const FracParams& fp) {
    return std::pow(1.0 + r * r, -0.5 * bubble_gamma(fp));
}

inline double bubble_U(const EPoint& x, const FracParams& fp) {
    if (fp.p != 2.0) throw ConfigError("bubble_U: requires p = 2");
    const double r2 = fp.n == 1 ? x[0] * x[0] : x[0] * x[0] + x[1] * x[1];
    return std::pow(1.0 + r2, -0.5 * bubble_gamma(fp));
}

/// U(x / lambda) as a Euclidean field with its tail amplitude lambda^{n-2s}.
inline EuclideanField bubble_field(const FracParams& fp, double lambda = 1.0) {
    const double g = bubble_gamma(fp);
    const int n = fp.n;
    return {[g, n, lambda](const EPoint& x) {
                const double r2 = (n == 1 ? x[0] * x[0] : x[0] * x[0] + x[1] * x[1]) / (lambda * lambda);
                return std::pow(1.0 + r2, -0.5 * g);
            },
            std::pow(lambda, g)};
}

/// u_eps(x) = eta(d(x0, x)) eps^{-(n-2s)/2} U(log_{x0}(x) / eps).
inline DiscreteFunction bubble_on_manifold(const BubbleConfig& cfg, const GridPtr& grid) {
    const auto& desc = grid->manifold;
    cfg.validate(desc);
    const double peak = cfg.amplitude * std::pow(cfg.eps, -0.5 * bubble_gamma(cfg.params));
    std::vector<double> v(grid->count(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = geodesic_distance(desc, cfg.center, grid->points[i]);
        if (d >= 2.0 * cfg.delta) continue;
        // U is radial and |log_{x0} x| = d inside the injectivity radius
        v[i] = cutoff(d, cfg.delta) * peak * bubble_U_radial(d / cfg.eps, cfg.params);
    }
    return {grid, std::move(v)};
}

/// Kernel energy for p = 2; lattice grids use the circulant structure of K (FFT), others the pair sum.
inline double lattice_kernel_energy(const DiscreteFunction& u, const PairKernel& pk) {
    if (pk.grid_ptr() != u.grid) throw ShapeError("lattice_kernel_energy: function and kernel grids differ");
    if (pk.spec().params.p != 2.0 || !pk.is_lattice()) return kernel_energy(u, pk);
    const Grid& g = pk.grid();
    detail::PeriodicConvolver conv(g.manifold.dim, g.lattice_res, pk.offset_table());
    const auto ku = conv.apply(u.values);
    const double row = compensated_sum(pk.offset_table());
    CompensatedSum acc;
    for (std::size_t i = 0; i < u.size(); ++i) acc.add(u.values[i] * (u.values[i] * row - ku[i]));
    const double w = g.weights.front();
    return std::max(0.0, 2.0 * w * w * acc.value());
}

// Euclidean reference quantities --------------------------------------------------------

struct EuclideanRefOptions {
    double R = 20.0;
    std::vector<int> resolutions{200, 400, 800};
    ExteriorOptions exterior{};
};

struct RayleighPoint {
    int resolution = 0;
    double h = 0.0;
    SeminormParts seminorm;
    NormParts crit;
    double rayleigh = 0.0;
};

struct RayleighReport {
    std::vector<RayleighPoint> levels;
    RichardsonFit seminorm_fit;
    double crit_norm = 0.0;          // int |U|^{2*} at the finest level
    double seminorm = 0.0;           // extrapolated [U]^2
    double rayleigh = 0.0;           // extrapolated [U]^2 / ||U||_{2*}^2, estimate of K^{-1}
    double kconst = 0.0;             // 1 / rayleigh
    double richardson_change = 0.0;  // |extrapolated - finest| / extrapolated
};

/// [u]^2 / ||u||_{2*}^2 at one resolution.
inline RayleighPoint euclidean_rayleigh(const EuclideanField& u, const EuclideanGrid& eg, double s,
                                        const ExteriorOptions& opt = {}) {
    if (2.0 * s >= eg.n) throw DomainError("euclidean_rayleigh: requires sp < n");
    const double q = 2.0 * eg.n / (eg.n - 2.0 * s);
    RayleighPoint pt;
    pt.resolution = eg.res;
    pt.h = eg.h();
    pt.seminorm = euclidean_seminorm2(u, eg, s, opt);
    pt.crit = euclidean_lq_norm(u, eg, q, opt);
    pt.rayleigh = pt.seminorm.total() / std::pow(pt.crit.total(), 2.0 / q);
    return pt;
}

inline RayleighPoint euclidean_rayleigh(const FracParams& fp, const EuclideanGrid& eg, const ExteriorOptions& opt = {}) {
    if (fp.p != 2.0) throw ConfigError("euclidean_rayleigh: requires p = 2");
    if (fp.n != eg.n) throw ConfigError("euclidean_rayleigh: dimension mismatch");
    return euclidean_rayleigh(bubble_field(fp), eg, fp.s, opt);
}

/// Rayleigh quotient of a field over a resolution ladder, extrapolated in h with order 2 - 2s.
inline RayleighReport euclidean_rayleigh_extrapolated(const EuclideanField& u, int n, double s,
                                                      const EuclideanRefOptions& opt = {}) {
    if (opt.resolutions.size() < 2) throw ConfigError("euclidean_rayleigh: need at least two resolutions");
    RayleighReport rep;
    std::vector<double> hs, vs;
    for (int res : opt.resolutions) {
        const EuclideanGrid eg(n, opt.R, res);
        RayleighPoint pt;
        pt.resolution = res;
        pt.h = eg.h();
        pt.seminorm.box = euclidean_seminorm2(eg.sample(u.f), eg, s);
        if (rep.levels.empty()) {
            SeminormParts full = euclidean_seminorm2(u, eg, s, opt.exterior);
            pt.seminorm = full;
            pt.crit = euclidean_lq_norm(u, eg, 2.0 * n / (n - 2.0 * s), opt.exterior);
        } else {
            // exterior parts are continuum quantities independent of the lattice
            pt.seminorm.coupling = rep.levels.front().seminorm.coupling;
            pt.seminorm.exterior = rep.levels.front().seminorm.exterior;
            pt.crit = euclidean_lq_norm(u, eg, 2.0 * n / (n - 2.0 * s), opt.exterior);
        }
        const double q = 2.0 * n / (n - 2.0 * s);
        pt.rayleigh = pt.seminorm.total() / std::pow(pt.crit.total(), 2.0 / q);
        hs.push_back(pt.h);
        vs.push_back(pt.seminorm.total());
        rep.levels.push_back(pt);
    }
    const double q = 2.0 * n / (n - 2.0 * s);
    rep.seminorm_fit = richardson(hs, vs, 2.0 - 2.0 * s);
    rep.seminorm = rep.seminorm_fit.limit;
    rep.crit_norm = rep.levels.back().crit.total();
    rep.rayleigh = rep.seminorm / std::pow(rep.crit_norm, 2.0 / q);
    rep.kconst = 1.0 / rep.rayleigh;
    rep.richardson_change = std::abs(rep.seminorm - vs.back()) / rep.seminorm;
    return rep;
}

inline RayleighReport euclidean_rayleigh_extrapolated(const FracParams& fp, const EuclideanRefOptions& opt = {}) {
    if (fp.p != 2.0) throw ConfigError("euclidean_rayleigh: requires p = 2");
    return euclidean_rayleigh_extrapolated(bubble_field(fp), fp.n, fp.s, opt);
}

// Sweeps over an eps ladder -------------------------------------------------------------

namespace detail {

inline void check_ladder(const BubbleConfig& base, const std::vector<double>& ladder, const Grid& grid) {
    if (ladder.size() < 2) throw ConfigError("eps ladder needs at least two values");
    for (double e : ladder)
        if (!(e > 0.0 && e < base.delta)) throw ConfigError("eps ladder must lie in (0, delta)");
    const double emin = *std::min_element(ladder.begin(), ladder.end());
    const double h = grid.spacing();
    if (emin < 4.0 * h * (1.0 - 1e-12))
        throw ResolutionError("unresolved bubble: eps_min = " + std::to_string(emin) + " < 4 * spacing = " +
                              std::to_string(4.0 * h));
}

}  // namespace detail

struct L2ScalingReport {
    std::vector<double> eps;
    std::vector<double> l2;
    double slope = 0.0;
    double intercept = 0.0;
    double target = 0.0;      // 2s
    bool log_regime = false;  // n = 4s: int U^2 diverges logarithmically
    bool l2_regime = false;   // n > 4s: U in L^2(R^n), the regime where the eps^{2s} law is sharp
};

inline L2ScalingReport bubble_l2_scaling(const BubbleConfig& base, const std::vector<double>& ladder,
                                         const GridPtr& grid) {
    base.validate(grid->manifold);
    detail::check_ladder(base, ladder, *grid);
    L2ScalingReport rep;
    rep.eps = ladder;
    rep.target = 2.0 * base.params.s;
    rep.log_regime = std::abs(base.params.n - 4.0 * base.params.s) < 1e-12;
    rep.l2_regime = base.params.n > 4.0 * base.params.s + 1e-12;
    std::vector<double> lx, ly;
    for (double e : ladder) {
        const double v = lp_norm_p(bubble_on_manifold(base.with_eps(e), grid), 2.0);
        rep.l2.push_back(v);
        lx.push_back(std::log(e));
        ly.push_back(std::log(v));
    }
    rep.slope = ols_slope(lx, ly);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    rep.intercept = (my - rep.slope * mx) / static_cast<double>(lx.size());
    return rep;
}

struct CriticalLimitReport {
    std::vector<double> eps;
    std::vector<double> values;  // int_M |u_eps|^{2*}
    double reference = 0.0;      // int_{R^n} |U|^{2*}
    NormParts reference_parts;
    [[nodiscard]] double final_relative_error() const { return std::abs(values.back() - reference) / reference; }
};

inline NormParts critical_norm_reference(const FracParams& fp, const EuclideanRefOptions& opt = {}) {
    const EuclideanGrid eg(fp.n, opt.R, opt.resolutions.back());
    return euclidean_lq_norm(bubble_field(fp), eg, fp.pstar(), opt.exterior);
}

inline CriticalLimitReport bubble_critical_limit(const BubbleConfig& base, const std::vector<double>& ladder,
                                                 const GridPtr& grid, const EuclideanRefOptions& opt = {}) {
    base.validate(grid->manifold);
    detail::check_ladder(base, ladder, *grid);
    CriticalLimitReport rep;
    rep.eps = ladder;
    const double q = base.params.pstar();
    for (double e : ladder) rep.values.push_back(lp_norm_p(bubble_on_manifold(base.with_eps(e), grid), q));
    rep.reference_parts = critical_norm_reference(base.params, opt);
    rep.reference = rep.reference_parts.total();
    return rep;
}

struct EnergyLimitReport {
    std::vector<double> eps;
    std::vector<double> energies;  // kernel energy of u_eps
    std::vector<double> ratios;    // energy / reference
    double reference = 0.0;        // [U]^2 over R^n
};

inline EnergyLimitReport bubble_energy_limit(const BubbleConfig& base, const std::vector<double>& ladder,
                                             const GridPtr& grid, const KernelSpec& spec, double reference) {
    base.validate(grid->manifold);
    detail::check_ladder(base, ladder, *grid);
    if (spec.params.p != 2.0) throw ConfigError("bubble_energy_limit: requires p = 2");
    const PairKernel pk(grid, spec);
    EnergyLimitReport rep;
    rep.eps = ladder;
    rep.reference = reference;
    for (double e : ladder) {
        const double E = lattice_kernel_energy(bubble_on_manifold(base.with_eps(e), grid), pk);
        rep.energies.push_back(E);
        rep.ratios.push_back(E / reference);
    }
    return rep;
}

inline EnergyLimitReport bubble_energy_limit(const BubbleConfig& base, const std::vector<double>& ladder,
                                             const GridPtr& grid, const KernelSpec& spec,
                                             const EuclideanRefOptions& opt = {}) {
    base.validate(grid->manifold);
    return bubble_energy_limit(base, ladder, grid, spec, euclidean_rayleigh_extrapolated(base.params, opt).seminorm);
}

// Blow-up identity ----------------------------------------------------------------------

struct BlowupReport {
    double left = 0.0;   // double sum of U_eps over B_delta(x0) on the manifold grid
    double right = 0.0;  // eps^{n+2s} times the rescaled double sum over B_{delta/eps} in the tangent space
    double gap = 0.0;    // |left - right| / max(|left|, |right|), 0 when both vanish
    std::size_t manifold_points = 0;
    std::size_t tangent_points = 0;
};

/// Both sides of the change of variables x = exp_{x0}(eps X) for the energy of U_eps over B_delta(x0).
/// profile(r) replaces the radial bubble profile when given.
inline BlowupReport blowup_identity_check(const BubbleConfig& cfg, const GridPtr& grid, const KernelSpec& spec,
                                          const std::function<double(double)>& profile = {}) {
    const auto& desc = grid->manifold;
    if (!desc.flat()) throw ConfigError("unsupported manifold for the blow-up identity: requires a flat manifold");
    cfg.params.validate();
    if (cfg.params.p != 2.0 || spec.params.p != 2.0) throw ConfigError("blowup_identity_check: requires p = 2");
    if (cfg.params.n != desc.dim) throw ConfigError("blowup_identity_check: dimension mismatch");
    if (!(cfg.eps > 0.0) || !(cfg.delta > 0.0) || cfg.delta >= injectivity_radius(desc))
        throw ConfigError("blowup_identity_check: need eps > 0 and 0 < delta < injectivity radius");
    const int n = desc.dim;
    const double s = cfg.params.s;
    auto U = [&](double r) { return profile ? profile(r) : bubble_U_radial(r, cfg.params); };
    const double peak = std::pow(cfg.eps, -0.5 * bubble_gamma(cfg.params));

    // left side on the manifold grid
    std::vector<std::size_t> idx;
    std::vector<double> vals;
    for (std::size_t i = 0; i < grid->count(); ++i) {
        const double d = geodesic_distance(desc, cfg.center, grid->points[i]);
        if (d < cfg.delta) {
            idx.push_back(i);
            vals.push_back(peak * U(d / cfg.eps));
        }
    }
    const PairKernel pk(grid, spec);
    const auto& w = grid->weights;
    BlowupReport rep;
    rep.manifold_points = idx.size();
    rep.left = 2.0 * reduce_rows(idx.size(), [&](std::size_t a) {
        CompensatedSum acc;
        for (std::size_t b = a + 1; b < idx.size(); ++b) {
            const double du = vals[a] - vals[b];
            acc.add(du * du * pk(idx[a], idx[b]) * w[idx[b]]);
        }
        return acc.value() * w[idx[a]];
    });

    // right side on a cell-centered tangent lattice over B_{delta/eps}, same physical spacing
    const double Rt = cfg.delta / cfg.eps;
    const int res = std::max(2, static_cast<int>(std::lround(2.0 * cfg.delta / grid->spacing())));
    const EuclideanGrid eg(n, Rt, res);
    std::vector<double> uv(eg.count()), mask(eg.count());
    for (std::size_t i = 0; i < eg.count(); ++i) {
        const EPoint X = eg.point(i);
        const double r = detail::enorm(X, n);
        mask[i] = r < Rt ? 1.0 : 0.0;
        uv[i] = mask[i] * U(r);
        rep.tangent_points += mask[i] > 0.0 ? 1 : 0;
    }
    const double eps = cfg.eps;
    const Point x0 = cfg.center;
    detail::LatticeConvolver conv(n, res, eg.h(), [&](double r) {
        // K(exp eps X, exp eps Y) with |X - Y| = r: the flat chart distance is eps r
        const TangentVector eX{eps * r, 0.0}, eY{0.0, 0.0};
        const double d = chart_distance(desc, x0, eX, eY);
        return eval_kernel(spec, d);
    });
    rep.right = std::pow(eps, n + 2.0 * s) * detail::masked_pair_energy(conv, eg, uv, mask);
    const double scale = std::max(std::abs(rep.left), std::abs(rep.right));
    rep.gap = scale > 0.0 ? std::abs(rep.left - rep.right) / scale : 0.0;
    return rep;
}

// Best constant ---------------------------------------------------------------------------

struct BestConstantReport {
    std::vector<double> eps;
    std::vector<double> crit_sq;  // (int |u_eps|^{2*})^{2/2*}
    std::vector<double> energy;   // kernel energy of u_eps
    std::vector<double> l2;       // int |u_eps|^2
    std::vector<double> c1;       // (crit_sq - C2 l2) / energy
    double c2 = 0.0;
    double c1_fit = 0.0;   // smallest C1 valid on every ladder member
    double kconst = 0.0;   // Euclidean Rayleigh estimate of K(n, s, 2)
    double ratio = 0.0;    // c1_fit / kconst
};

inline BestConstantReport best_constant_fit(const BubbleConfig& base, const std::vector<double>& ladder,
                                            const GridPtr& grid, const KernelSpec& spec, double kconst,
                                            double c2 = 0.0) {
    base.validate(grid->manifold);
    detail::check_ladder(base, ladder, *grid);
    if (!(kconst > 0.0)) throw ConfigError("best_constant_fit: kconst must be positive");
    const PairKernel pk(grid, spec);
    const double q = base.params.pstar();
    BestConstantReport rep;
    rep.eps = ladder;
    rep.c2 = c2;
    rep.kconst = kconst;
    rep.c1_fit = -INFINITY;
    for (double e : ladder) {
        const auto u = bubble_on_manifold(base.with_eps(e), grid);
        const double cs = std::pow(lp_norm_p(u, q), 2.0 / q);
        const double en = lattice_kernel_energy(u, pk);
        const double l2 = lp_norm_p(u, 2.0);
        rep.crit_sq.push_back(cs);
        rep.energy.push_back(en);
        rep.l2.push_back(l2);
        rep.c1.push_back((cs - c2 * l2) / en);
        rep.c1_fit = std::max(rep.c1_fit, rep.c1.back());
    }
    rep.ratio = rep.c1_fit / kconst;
    return rep;
}

}  // namespace fracsob
