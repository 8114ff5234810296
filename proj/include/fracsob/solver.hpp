#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "bubbles.hpp"
#include "common.hpp"
#include "fields.hpp"
#include "kernel.hpp"
#include "manifold.hpp"
#include "pairs.hpp"
#include "sobolev.hpp"

namespace fracsob {

/// L_K u + h |u|^{p-2} u = f |u|^{q-2} u on a grid.
struct ProblemData {
    GridPtr grid;
    KernelSpec spec;
    DiscreteFunction h;
    DiscreteFunction f;
    double q = 2.0;
    std::shared_ptr<const PairKernel> pairs;       // kernel K
    std::shared_ptr<const PairKernel> pure_pairs;  // d^{-(n+ps)}, for Sobolev norms

    static ProblemData make(GridPtr grid, KernelSpec spec, DiscreteFunction h, DiscreteFunction f, double q) {
        ProblemData d;
        d.grid = std::move(grid);
        d.spec = std::move(spec);
        d.h = std::move(h);
        d.f = std::move(f);
        d.q = q;
        d.spec.validate();
        if (d.spec.params.n != d.grid->manifold.dim) throw ConfigError("ProblemData: kernel n != manifold dimension");
        d.pairs = std::make_shared<const PairKernel>(d.grid, d.spec);
        d.pure_pairs = d.spec.kind == KernelKind::pure_fractional
                           ? d.pairs
                           : std::make_shared<const PairKernel>(d.grid, KernelSpec::pure(d.spec.params));
        d.validate();
        return d;
    }

    [[nodiscard]] ProblemData with_q(double q_new) const {
        ProblemData d = *this;
        d.q = q_new;
        d.validate();
        return d;
    }

    [[nodiscard]] const FracParams& params() const { return spec.params; }

    void validate() const {
        if (h.grid != grid || f.grid != grid) throw ShapeError("ProblemData: h and f must live on the problem grid");
        for (double x : f.values)
            if (x < 0.0) throw ConfigError("ProblemData: f must be nonnegative");
        if (!(integral(f) > 0.0)) throw ConfigError("ProblemData: f must have positive integral");
        if (!(q > 1.0)) throw ConfigError("ProblemData: q must exceed 1");
        if (q > params().pstar() * (1.0 + 1e-14)) throw ConfigError("ProblemData: q must not exceed p*");
    }
};

inline void require_on_problem(const ProblemData& d, const DiscreteFunction& u) {
    if (u.size() != d.grid->count()) throw ShapeError("function size does not match the problem grid");
}

/// (1/p) (L_K u, u) + (1/p) int h |u|^p
inline double functional_JK(const ProblemData& d, const DiscreteFunction& u) {
    require_on_problem(d, u);
    const double p = d.params().p;
    CompensatedSum loc;
    for (std::size_t i = 0; i < u.size(); ++i) loc.add(d.h.values[i] * abs_pow(u.values[i], p) * d.grid->weights[i]);
    return (pair_energy(*d.pairs, u.values, p) + loc.value()) / p;
}

/// int f |u|^q
inline double constraint_value(const ProblemData& d, const DiscreteFunction& u) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < u.size(); ++i) acc.add(d.f.values[i] * abs_pow(u.values[i], d.q) * d.grid->weights[i]);
    return acc.value();
}

inline double functional_I(const ProblemData& d, const DiscreteFunction& u) {
    return functional_JK(d, u) - constraint_value(d, u) / d.q;
}

/// Nodal representative of J_K'(u): entry j is <J_K'(u), e_j>.
inline std::vector<double> gradient_JK(const ProblemData& d, const DiscreteFunction& u) {
    require_on_problem(d, u);
    const double p = d.params().p;
    auto g = pair_gradient(*d.pairs, u.values, p);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += d.h.values[j] * signed_pow(u.values[j], p) * d.grid->weights[j];
    return g;
}

/// Nodal representative of I'(u).
inline DiscreteFunction gradient_I(const ProblemData& d, const DiscreteFunction& u) {
    auto g = gradient_JK(d, u);
    for (std::size_t j = 0; j < g.size(); ++j)
        g[j] -= d.f.values[j] * signed_pow(u.values[j], d.q) * d.grid->weights[j];
    return {d.grid, std::move(g)};
}

// Coercivity ----------------------------------------------------------------------------

struct CoercivityReport {
    double c_est = 0.0;
    std::size_t probes = 0;
    std::size_t skipped = 0;
    std::string argmin;  // probe family attaining the minimum
    std::vector<double> ratios;
};

inline CoercivityReport check_coercivity(const ProblemData& d, std::uint64_t seed = 0, int band_probes = 200) {
    const double p = d.params().p;
    CoercivityReport rep;
    rep.c_est = INFINITY;
    auto probe = [&](const DiscreteFunction& u, const char* kind) {
        const double norm = sobolev_norm_p(u, *d.pure_pairs);
        if (!(norm > 0.0)) {
            ++rep.skipped;
            return;
        }
        const double r = functional_JK(d, u) / norm;
        rep.ratios.push_back(r);
        ++rep.probes;
        if (r < rep.c_est) {
            rep.c_est = r;
            rep.argmin = kind;
        }
    };
    Rng rng(seed ^ 0x5eedc0e5ULL);
    for (int k = 0; k < band_probes; ++k) probe(band_limited_field(d.grid, rng, 1 + k % 6), "band_limited");
    probe(DiscreteFunction::constant(d.grid, 1.0), "constant");
    if (p == 2.0) {
        const auto& desc = d.grid->manifold;
        BubbleConfig b;
        b.params = d.params();
        b.center = d.grid->points.front();
        b.delta = 0.24 * injectivity_radius(desc);
        b.eps = std::max(2.0 * d.grid->spacing(), 0.25 * b.delta);
        probe(bubble_on_manifold(b, d.grid), "bubble");
    }
    return rep;
}

// Weak residual ---------------------------------------------------------------------------

/// Fixed family of test fields with their (s,p) norms.
struct TestFamily {
    std::vector<DiscreteFunction> fields;
    std::vector<double> field_norms;  // ||v||_{s,p}
    std::vector<double> bump_norms;   // ||e_j||_{s,p}; empty when N > 1024
};

inline TestFamily make_test_family(const ProblemData& d, std::uint64_t seed = 0, int count = 50) {
    TestFamily t;
    const double p = d.params().p;
    Rng rng(seed ^ 0x7e57f1e1dULL);
    for (int k = 0; k < count; ++k) {
        auto v = band_limited_field(d.grid, rng, 1 + k % 8);
        t.field_norms.push_back(std::pow(sobolev_norm_p(v, *d.pure_pairs), 1.0 / p));
        t.fields.push_back(std::move(v));
    }
    if (d.grid->count() <= 1024) {
        const auto& w = d.grid->weights;
        t.bump_norms.resize(d.grid->count());
        for (std::size_t j = 0; j < d.grid->count(); ++j) {
            CompensatedSum acc;
            d.pure_pairs->row_full(j, [&](std::size_t i, double k) { acc.add(k * w[i]); });
            t.bump_norms[j] = std::pow(w[j] + 2.0 * w[j] * acc.value(), 1.0 / p);
        }
    }
    return t;
}

struct ResidualReport {
    double weak = 0.0;       // max |<R, v>| / ||v||_{s,p} over the test family
    double projected = 0.0;  // L^2 dual norm of the constraint-projected gradient
    double multiplier = 0.0;
};

/// Defect of L_K u + h|u|^{p-2}u = theta f|u|^{q-2}u with theta = <J_K'(u), u> / int f|u|^q.
inline ResidualReport weak_residual(const ProblemData& d, const DiscreteFunction& u, const TestFamily& tests,
                                    const std::vector<double>* grad_jk = nullptr) {
    std::vector<double> g = grad_jk ? *grad_jk : gradient_JK(d, u);
    const auto& w = d.grid->weights;
    CompensatedSum gu, fu;
    std::vector<double> nu(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) {
        gu.add(g[j] * u.values[j]);
        nu[j] = d.f.values[j] * signed_pow(u.values[j], d.q) * w[j];
        fu.add(nu[j] * u.values[j]);
    }
    ResidualReport r;
    r.multiplier = fu.value() > 0.0 ? gu.value() / fu.value() : 0.0;
    std::vector<double> R(u.size());
    CompensatedSum l2;
    for (std::size_t j = 0; j < u.size(); ++j) {
        R[j] = g[j] - r.multiplier * nu[j];
        l2.add(R[j] * R[j] / w[j]);
    }
    r.projected = std::sqrt(l2.value());
    for (std::size_t k = 0; k < tests.fields.size(); ++k) {
        CompensatedSum acc;
        for (std::size_t j = 0; j < u.size(); ++j) acc.add(R[j] * tests.fields[k].values[j]);
        r.weak = std::max(r.weak, std::abs(acc.value()) / tests.field_norms[k]);
    }
    for (std::size_t j = 0; j < tests.bump_norms.size(); ++j) r.weak = std::max(r.weak, std::abs(R[j]) / tests.bump_norms[j]);
    return r;
}

// Constrained descent -------------------------------------------------------------------

struct SolveOptions {
    double tol_energy = 1e-13;
    double tol_res = 1e-6;
    int max_iter = 20000;
    std::uint64_t seed = 0;
    double armijo = 1e-4;
    int max_halvings = 60;
    bool require_coercive = true;
    int test_fields = 50;
};

struct TraceEntry {
    int iteration = 0;
    double energy = 0.0;
    double constraint_defect = 0.0;
    double step = 0.0;
    double residual = 0.0;
};

struct SolveResult {
    DiscreteFunction u;
    double mu = 0.0;
    double residual = 0.0;
    double projected_gradient = 0.0;
    double multiplier = 0.0;
    double constraint_defect = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<TraceEntry> trace;
};

struct SolverFailure : StagnationError {
    SolverFailure(const std::string& msg, std::vector<TraceEntry> t) : StagnationError(msg), trace(std::move(t)) {}
    std::vector<TraceEntry> trace;
};

inline DiscreteFunction normalize_on_constraint(const ProblemData& d, const DiscreteFunction& u) {
    const double G = constraint_value(d, u);
    if (!(G > 0.0)) throw ConfigError("cannot normalize: int f |u|^q = 0");
    return u.scaled(std::pow(G, -1.0 / d.q));
}

inline SolveResult solve_subcritical(const ProblemData& d, const DiscreteFunction& init, const SolveOptions& opt = {}) {
    require_on_problem(d, init);
    if (opt.require_coercive) {
        const auto c = check_coercivity(d, opt.seed);
        if (!(c.c_est > 0.0))
            throw NonCoerciveError("non-coercive data: empirical coercivity constant " + std::to_string(c.c_est) +
                                   " attained by a " + c.argmin + " probe");
    }
    if (!(constraint_value(d, init) > 0.0)) throw ConfigError("initial state has int f |u|^q = 0");
    const auto tests = make_test_family(d, opt.seed, opt.test_fields);
    const auto& w = d.grid->weights;
    const std::size_t N = d.grid->count();

    SolveResult res;
    DiscreteFunction u = normalize_on_constraint(d, init);
    double J = functional_JK(d, u);
    std::vector<double> g = gradient_JK(d, u);
    auto rep = weak_residual(d, u, tests, &g);
    auto direction = [&](const std::vector<double>& grad, const DiscreteFunction& at, double theta) {
        // mass-preconditioned gradient of J_K projected on the tangent space of the constraint
        std::vector<double> dir(N);
        for (std::size_t j = 0; j < N; ++j)
            dir[j] = -(grad[j] - theta * d.f.values[j] * signed_pow(at.values[j], d.q) * w[j]) / w[j];
        return dir;
    };
    auto wdot = [&](const std::vector<double>& a, const std::vector<double>& b) {
        CompensatedSum acc;
        for (std::size_t j = 0; j < N; ++j) acc.add(a[j] * b[j] * w[j]);
        return acc.value();
    };
    std::vector<double> dir = direction(g, u, rep.multiplier);
    double tau = 1.0;
    {
        const double dn = std::sqrt(wdot(dir, dir));
        const double un = std::sqrt(wdot(u.values, u.values));
        if (dn > 0.0) tau = 0.1 * un / dn;
    }
    res.trace.push_back({0, J, std::abs(constraint_value(d, u) - 1.0), 0.0, rep.weak});
    const double mu_scale = 1.0;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        if (rep.weak <= opt.tol_res * (mu_scale + std::abs(J))) {
            res.converged = true;
            break;
        }
        const double slope = wdot(dir, dir);
        DiscreteFunction trial;
        double Jt = 0.0;
        bool accepted = false;
        double t = tau;
        for (int k = 0; k <= opt.max_halvings; ++k, t *= 0.5) {
            std::vector<double> v(N);
            for (std::size_t j = 0; j < N; ++j) v[j] = u.values[j] + t * dir[j];
            DiscreteFunction cand(d.grid, std::move(v));
            if (!(constraint_value(d, cand) > 0.0)) continue;
            cand = normalize_on_constraint(d, cand);
            const double Jc = functional_JK(d, cand);
            if (Jc <= J - opt.armijo * t * slope) {
                trial = std::move(cand);
                Jt = Jc;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (rep.weak <= 100.0 * opt.tol_res * (mu_scale + std::abs(J))) break;  // roundoff floor
            res.u = u;
            res.mu = J;
            res.trace.push_back({it + 1, J, std::abs(constraint_value(d, u) - 1.0), 0.0, rep.weak});
            throw SolverFailure("line search failed after " + std::to_string(opt.max_halvings) + " halvings", res.trace);
        }
        const double dJ = J - Jt;
        std::vector<double> s(N);
        for (std::size_t j = 0; j < N; ++j) s[j] = trial.values[j] - u.values[j];
        u = std::move(trial);
        J = Jt;
        g = gradient_JK(d, u);
        rep = weak_residual(d, u, tests, &g);
        auto ndir = direction(g, u, rep.multiplier);
        // Barzilai-Borwein step from the change in the projected gradient
        std::vector<double> y(N);
        for (std::size_t j = 0; j < N; ++j) y[j] = dir[j] - ndir[j];
        const double sy = wdot(s, y), ss = wdot(s, s);
        tau = (sy > 0.0 && ss > 0.0) ? ss / sy : 2.0 * t;
        dir = std::move(ndir);
        res.trace.push_back({it + 1, J, std::abs(constraint_value(d, u) - 1.0), t, rep.weak});
        if (dJ < opt.tol_energy * (1.0 + std::abs(J)) && rep.weak <= opt.tol_res * (mu_scale + std::abs(J))) {
            res.converged = true;
            ++it;
            break;
        }
    }
    res.u = u;
    res.mu = J;
    res.residual = rep.weak;
    res.projected_gradient = rep.projected;
    res.multiplier = rep.multiplier;
    res.constraint_defect = std::abs(constraint_value(d, u) - 1.0);
    res.iterations = it;
    return res;
}

/// Default initial state: the normalized constant.
inline DiscreteFunction constant_init(const ProblemData& d) {
    return normalize_on_constraint(d, DiscreteFunction::constant(d.grid, 1.0));
}

// Continuation toward the critical exponent -----------------------------------------------

struct StageReport {
    double q = 0.0;
    double mu = 0.0;
    double gap = 0.0;     // |mu_q - mu_prev|, 0 for the first stage
    double holder = 0.0;  // (int f)^{1-q/2*} (int f |u_q|^{2*})^{q/2*}, >= 1
    double residual = 0.0;
    int iterations = 0;
};

struct ContinuationResult {
    std::vector<StageReport> stages;
    SolveResult final;
};

inline ContinuationResult solve_critical_continuation(const ProblemData& d, const std::vector<double>& schedule,
                                                      const SolveOptions& opt = {},
                                                      const DiscreteFunction* init = nullptr) {
    if (d.params().p != 2.0) throw ConfigError("continuation requires p = 2");
    if (schedule.empty()) throw ConfigError("continuation schedule is empty");
    const double crit = d.params().pstar();
    for (std::size_t k = 1; k < schedule.size(); ++k)
        if (!(schedule[k] > schedule[k - 1])) throw ConfigError("continuation schedule must be strictly increasing");
    if (schedule.back() > crit - 0.05 + 1e-12)
        throw ConfigError("last schedule value must satisfy q <= p* - 0.05");
    ContinuationResult out;
    DiscreteFunction u = init ? *init : DiscreteFunction::constant(d.grid, 1.0);
    const double intf = integral(d.f);
    SolveOptions stage_opt = opt;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        const auto dq = d.with_q(schedule[k]);
        SolveResult r;
        try {
            r = solve_subcritical(dq, u, stage_opt);
        } catch (const SolverFailure& e) {
            throw SolverFailure("continuation stage q=" + std::to_string(schedule[k]) + ": " + e.what(), e.trace);
        }
        stage_opt.require_coercive = false;  // coercivity does not depend on q
        StageReport st;
        st.q = schedule[k];
        st.mu = r.mu;
        st.gap = out.stages.empty() ? 0.0 : std::abs(r.mu - out.stages.back().mu);
        CompensatedSum fc;
        for (std::size_t i = 0; i < r.u.size(); ++i)
            fc.add(d.f.values[i] * abs_pow(r.u.values[i], crit) * d.grid->weights[i]);
        st.holder = std::pow(intf, 1.0 - st.q / crit) * std::pow(fc.value(), st.q / crit);
        st.residual = r.residual;
        st.iterations = r.iterations;
        out.stages.push_back(st);
        u = r.u;
        out.final = std::move(r);
    }
    return out;
}

// Existence condition ---------------------------------------------------------------------

struct ConditionReport {
    double kconst = 0.0;
    double threshold = 0.0;       // 1 / (2 (max f)^{2/2*} K)
    double mu_constant = 0.0;     // J_K at (int f)^{-1/2*}
    double mu_continuation = 0.0; // NaN when no continuation result is supplied
    double inf_JK_est = 0.0;
    double corollary_lhs = 0.0;   // (max f)^{2/2*} int h / (int f)^{2/2*}
    double kinv = 0.0;
    bool condition_holds = false;
    bool corollary_holds = false;
};

inline ConditionReport check_existence_condition(const ProblemData& d, double kconst,
                                                 const ContinuationResult* cont = nullptr) {
    if (d.params().p != 2.0) throw ConfigError("existence condition requires p = 2");
    if (!(kconst > 0.0)) throw ConfigError("existence condition: kconst must be positive");
    const double crit = d.params().pstar();
    const double fmax = *std::max_element(d.f.values.begin(), d.f.values.end());
    const double intf = integral(d.f);
    const double inth = integral(d.h);
    ConditionReport r;
    r.kconst = kconst;
    r.kinv = 1.0 / kconst;
    r.threshold = 1.0 / (2.0 * std::pow(fmax, 2.0 / crit) * kconst);
    r.mu_constant = 0.5 * inth * std::pow(intf, -2.0 / crit);
    r.mu_continuation = cont ? cont->final.mu : std::numeric_limits<double>::quiet_NaN();
    r.inf_JK_est = cont ? std::min(r.mu_constant, r.mu_continuation) : r.mu_constant;
    r.corollary_lhs = std::pow(fmax, 2.0 / crit) * inth / std::pow(intf, 2.0 / crit);
    r.condition_holds = r.inf_JK_est < r.threshold;
    r.corollary_holds = r.corollary_lhs < r.kinv;
    return r;
}

/// Reference problem on T^2 (side 2, n = 2, s = 1/2, p = 2) with smooth nonconstant h and f.
inline ProblemData default_torus_problem(int resolution = 32) {
    const double L = 2.0;
    auto grid = make_grid({ManifoldKind::torus, 2, L}, resolution);
    std::vector<double> h(grid->count()), f(grid->count());
    for (std::size_t i = 0; i < grid->count(); ++i) {
        const auto& x = grid->points[i];
        h[i] = 1.0 + 0.5 * std::cos(2.0 * kPi * x[0] / L);
        f[i] = 1.0 + 0.5 * std::sin(2.0 * kPi * x[1] / L);
    }
    return ProblemData::make(grid, KernelSpec::pure({2, 0.5, 2.0}), {grid, std::move(h)}, {grid, std::move(f)}, 2.2);
}

inline std::vector<double> default_schedule() { return {2.2, 2.6, 3.0, 3.4, 3.8}; }

/// J_K at the normalized constant (int f)^{-1/q}: the closed-form level for constant data.
inline double constant_level(const ProblemData& d) {
    const double c = std::pow(integral(d.f), -1.0 / d.q);
    return std::pow(c, d.params().p) * integral(d.h) / d.params().p;
}

}  // namespace fracsob
