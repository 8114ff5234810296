#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "common.hpp"
#include "kernel.hpp"
#include "manifold.hpp"
#include "pairs.hpp"

namespace fracsob {

/// Sum over ordered pairs i != j of |u_i - u_j|^p K_ij w_i w_j.
inline double pair_energy(const PairKernel& pk, const std::vector<double>& u, double p) {
    const auto& w = pk.grid().weights;
    if (u.size() != pk.size()) throw ShapeError("pair_energy: size mismatch");
    return 2.0 * reduce_rows(pk.size(), [&](std::size_t i) {
        CompensatedSum acc;
        const double ui = u[i];
        pk.row_upper(i, [&](std::size_t j, double k) { acc.add(abs_pow(ui - u[j], p) * k * w[j]); });
        return acc.value() * w[i];
    });
}

/// Sum over ordered pairs of |u_i-u_j|^{p-2}(u_i-u_j)(v_i-v_j) K_ij w_i w_j.
inline double pair_form(const PairKernel& pk, const std::vector<double>& u, const std::vector<double>& v, double p) {
    const auto& w = pk.grid().weights;
    if (u.size() != pk.size() || v.size() != pk.size()) throw ShapeError("pair_form: size mismatch");
    return 2.0 * reduce_rows(pk.size(), [&](std::size_t i) {
        CompensatedSum acc;
        const double ui = u[i], vi = v[i];
        pk.row_upper(i, [&](std::size_t j, double k) { acc.add(signed_pow(ui - u[j], p) * (vi - v[j]) * k * w[j]); });
        return acc.value() * w[i];
    });
}

/// Nodal representative of the derivative of pair_energy / p:
/// g_j = 2 sum_{i != j} |u_j-u_i|^{p-2}(u_j-u_i) K_ij w_i w_j.
inline std::vector<double> pair_gradient(const PairKernel& pk, const std::vector<double>& u, double p) {
    const auto& w = pk.grid().weights;
    std::vector<double> g(pk.size(), 0.0);
    parallel_rows(pk.size(), [&](std::size_t j) {
        CompensatedSum acc;
        const double uj = u[j];
        pk.row_full(j, [&](std::size_t i, double k) { acc.add(signed_pow(uj - u[i], p) * k * w[i]); });
        g[j] = 2.0 * acc.value() * w[j];
    });
    return g;
}

inline PairKernel seminorm_pairs(const GridPtr& grid, const FracParams& params) {
    return PairKernel(grid, KernelSpec::pure(params));
}

inline double gagliardo_seminorm_p(const DiscreteFunction& u, const FracParams& params) {
    params.validate();
    return pair_energy(seminorm_pairs(u.grid, params), u.values, params.p);
}

inline double gagliardo_seminorm_p(const DiscreteFunction& u, const PairKernel& pure_pairs) {
    return pair_energy(pure_pairs, u.values, pure_pairs.spec().params.p);
}

inline double kernel_energy(const DiscreteFunction& u, const KernelSpec& spec) {
    return pair_energy(PairKernel(u.grid, spec), u.values, spec.params.p);
}

inline double kernel_energy(const DiscreteFunction& u, const PairKernel& pk) {
    return pair_energy(pk, u.values, pk.spec().params.p);
}

inline double semilinear_form(const DiscreteFunction& u, const DiscreteFunction& v, const KernelSpec& spec) {
    require_same_grid(u, v);
    return pair_form(PairKernel(u.grid, spec), u.values, v.values, spec.params.p);
}

inline double semilinear_form(const DiscreteFunction& u, const DiscreteFunction& v, const PairKernel& pk) {
    require_same_grid(u, v);
    return pair_form(pk, u.values, v.values, pk.spec().params.p);
}

inline double lp_norm_p(const DiscreteFunction& u, double q) {
    if (!(q >= 1.0)) throw ConfigError("lp_norm_p: q must be >= 1");
    CompensatedSum acc;
    for (std::size_t i = 0; i < u.size(); ++i) acc.add(abs_pow(u.values[i], q) * u.grid->weights[i]);
    return acc.value();
}

/// Weighted integral sum_i u_i w_i.
inline double integral(const DiscreteFunction& u) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < u.size(); ++i) acc.add(u.values[i] * u.grid->weights[i]);
    return acc.value();
}

inline double sobolev_norm_p(const DiscreteFunction& u, const FracParams& params) {
    return lp_norm_p(u, params.p) + gagliardo_seminorm_p(u, params);
}

inline double sobolev_norm_p(const DiscreteFunction& u, const PairKernel& pure_pairs) {
    return lp_norm_p(u, pure_pairs.spec().params.p) + gagliardo_seminorm_p(u, pure_pairs);
}

struct EnergyReport {
    double seminorm_p = 0.0;
    double kernel_energy = 0.0;
    double lp_norm_p = 0.0;
    int resolution = 0;
    std::size_t excluded_pairs = 0;
};

inline EnergyReport energy_report(const DiscreteFunction& u, const KernelSpec& spec, int resolution) {
    EnergyReport r;
    r.seminorm_p = gagliardo_seminorm_p(u, spec.params);
    r.kernel_energy = spec.kind == KernelKind::pure_fractional ? r.seminorm_p : kernel_energy(u, spec);
    r.lp_norm_p = lp_norm_p(u, spec.params.p);
    r.resolution = resolution;
    r.excluded_pairs = u.size();
    return r;
}

struct LocalizedNormReport {
    double ratio_lower = 0.0;  // m^{1-p}, the Jensen floor for ratio
    double ratio = 0.0;        // sum_i ||eta_i u||^p / ||u||^p
    double global_norm_p = 0.0;
    double local_sum = 0.0;
    std::size_t charts = 0;
    double jensen_rhs = 0.0;  // m^{p-1} sum_i ||eta_i u||^p
    [[nodiscard]] bool jensen_holds() const { return global_norm_p <= jensen_rhs; }
};

inline LocalizedNormReport localized_norm_ratio(const DiscreteFunction& u, const std::vector<DiscreteFunction>& partition,
                                                const PairKernel& pure_pairs) {
    if (partition.empty()) throw ConfigError("localized_norm_ratio: empty partition");
    const double p = pure_pairs.spec().params.p;
    LocalizedNormReport r;
    r.charts = partition.size();
    r.global_norm_p = sobolev_norm_p(u, pure_pairs);
    if (!(r.global_norm_p > 0.0)) throw DomainError("localized_norm_ratio: u has zero norm");
    CompensatedSum acc;
    for (const auto& eta : partition) {
        require_same_grid(u, eta);
        std::vector<double> v(u.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = eta.values[i] * u.values[i];
        acc.add(sobolev_norm_p(DiscreteFunction(u.grid, std::move(v)), pure_pairs));
    }
    r.local_sum = acc.value();
    r.ratio = r.local_sum / r.global_norm_p;
    const double m = static_cast<double>(r.charts);
    r.ratio_lower = std::pow(m, 1.0 - p);
    r.jensen_rhs = std::pow(m, p - 1.0) * r.local_sum;
    return r;
}

inline LocalizedNormReport localized_norm_ratio(const DiscreteFunction& u, const std::vector<DiscreteFunction>& partition,
                                                const FracParams& params) {
    return localized_norm_ratio(u, partition, seminorm_pairs(u.grid, params));
}

struct HistogramBin {
    double d = 0.0;  // bin center
    double contribution = 0.0;
};

/// Ordered-pair contributions |u_i-u_j|^p K_ij w_i w_j binned by distance.
inline std::vector<HistogramBin> pair_histogram(const DiscreteFunction& u, const PairKernel& pk, int bins) {
    if (bins < 1) throw ConfigError("pair_histogram: bins must be positive");
    const double p = pk.spec().params.p;
    const auto& w = pk.grid().weights;
    double dmax = 0.0;
    for (std::size_t i = 0; i < pk.size(); ++i)
        pk.row_upper(i, [&](std::size_t j, double) { dmax = std::max(dmax, pk.distance(i, j)); });
    std::vector<CompensatedSum> acc(static_cast<std::size_t>(bins));
    const double width = dmax / bins;
    for (std::size_t i = 0; i < pk.size(); ++i)
        pk.row_upper(i, [&](std::size_t j, double k) {
            const double d = pk.distance(i, j);
            auto b = static_cast<std::size_t>(std::min<double>(bins - 1, std::floor(d / width)));
            acc[b].add(2.0 * abs_pow(u.values[i] - u.values[j], p) * k * w[i] * w[j]);
        });
    std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
    for (int b = 0; b < bins; ++b) out[b] = {(b + 0.5) * width, acc[b].value()};
    return out;
}

inline void write_histogram_csv(std::ostream& os, const std::vector<HistogramBin>& h) {
    os << "d,contribution\r\n";
    os.precision(17);
    for (const auto& b : h) os << b.d << ',' << b.contribution << "\r\n";
}

}  // namespace fracsob
