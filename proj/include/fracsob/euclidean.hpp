#pragma once

#include <fftw3.h>

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <vector>

#include "common.hpp"
#include "quadrature.hpp"

namespace fracsob {

using EPoint = std::array<double, 2>;

/// Cell-centered lattice on the box [-R, R]^n, n in {1, 2}.
struct EuclideanGrid {
    int n = 2;
    double R = 20.0;
    int res = 200;

    EuclideanGrid() = default;
    EuclideanGrid(int n_, double R_, int res_) : n(n_), R(R_), res(res_) { validate(); }

    void validate() const {
        if (n != 1 && n != 2) throw ConfigError("EuclideanGrid: dimension must be 1 or 2");
        if (!(R > 0.0)) throw ConfigError("EuclideanGrid: box radius must be positive");
        if (res < 2) throw ConfigError("EuclideanGrid: resolution must be >= 2");
    }

    [[nodiscard]] double h() const { return 2.0 * R / res; }
    [[nodiscard]] double weight() const { return std::pow(h(), n); }
    [[nodiscard]] std::size_t count() const { return n == 1 ? res : static_cast<std::size_t>(res) * res; }
    [[nodiscard]] double coord(int k) const { return -R + (k + 0.5) * h(); }
    [[nodiscard]] EPoint point(std::size_t idx) const {
        if (n == 1) return {coord(static_cast<int>(idx)), 0.0};
        return {coord(static_cast<int>(idx / res)), coord(static_cast<int>(idx % res))};
    }

    template <class F>
    [[nodiscard]] std::vector<double> sample(F&& f) const {
        std::vector<double> v(count());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(point(i));
        return v;
    }
};

/// A field on R^n given by a callable, with its far-field amplitude A in u ~ A |x|^{-(n-2s)}.
struct EuclideanField {
    std::function<double(const EPoint&)> f;
    double tail_amplitude = 0.0;

    double operator()(const EPoint& x) const { return f(x); }
};

namespace detail {

/// FFTW planning is not thread-safe; every plan creation and destruction goes through this lock.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex mu;
    return mu;
}

inline double enorm(const EPoint& x, int n) { return n == 1 ? std::abs(x[0]) : std::hypot(x[0], x[1]); }

/// Linear convolution with k -> |k h|^{-order} (k != 0) on an m^n lattice, via zero-padded FFT.
class LatticeConvolver {
public:
    LatticeConvolver(int n, int m, double h, double order)
        : LatticeConvolver(n, m, h, [order](double d) { return std::pow(d, -order); }) {}

    /// Kernel given as a function of the distance |k| h.
    LatticeConvolver(int n, int m, double h, const std::function<double(double)>& kernel)
        : n_(n), m_(m), P_(2 * m) {
        const std::size_t real_size = n == 1 ? P_ : static_cast<std::size_t>(P_) * P_;
        const std::size_t cplx_size = n == 1 ? P_ / 2 + 1 : static_cast<std::size_t>(P_) * (P_ / 2 + 1);
        real_.reset(fftw_alloc_real(real_size));
        cplx_.reset(fftw_alloc_complex(cplx_size));
        kern_.reset(fftw_alloc_complex(cplx_size));
        if (!real_ || !cplx_ || !kern_) throw NumericalError("LatticeConvolver: allocation failed");
        real_size_ = real_size;
        cplx_size_ = cplx_size;
        {
            std::lock_guard<std::mutex> lock(fftw_planner_mutex());
            if (n == 1) {
                fwd_ = fftw_plan_dft_r2c_1d(P_, real_.get(), cplx_.get(), FFTW_ESTIMATE);
                bwd_ = fftw_plan_dft_c2r_1d(P_, cplx_.get(), real_.get(), FFTW_ESTIMATE);
            } else {
                fwd_ = fftw_plan_dft_r2c_2d(P_, P_, real_.get(), cplx_.get(), FFTW_ESTIMATE);
                bwd_ = fftw_plan_dft_c2r_2d(P_, P_, cplx_.get(), real_.get(), FFTW_ESTIMATE);
            }
        }
        auto wrapped = [&](int a) { return a < m_ ? a : P_ - a; };
        for (std::size_t i = 0; i < real_size; ++i) real_.get()[i] = 0.0;
        if (n == 1) {
            for (int a = 1; a < P_; ++a) {
                const int k = wrapped(a);
                if (k < m_) real_.get()[a] = kernel(k * h);
            }
        } else {
            for (int a = 0; a < P_; ++a) {
                const int ka = wrapped(a);
                if (ka >= m_) continue;
                for (int b = 0; b < P_; ++b) {
                    const int kb = wrapped(b);
                    if (kb >= m_ || (ka == 0 && kb == 0)) continue;
                    real_.get()[static_cast<std::size_t>(a) * P_ + b] =
                        kernel(h * std::sqrt(static_cast<double>(ka) * ka + static_cast<double>(kb) * kb));
                }
            }
        }
        fftw_execute(fwd_);
        for (std::size_t i = 0; i < cplx_size; ++i) {
            kern_.get()[i][0] = cplx_.get()[i][0];
            kern_.get()[i][1] = cplx_.get()[i][1];
        }
    }

    ~LatticeConvolver() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }

    LatticeConvolver(const LatticeConvolver&) = delete;
    LatticeConvolver& operator=(const LatticeConvolver&) = delete;

    /// (K * x)_i for x on the m^n lattice (row-major).
    std::vector<double> apply(const std::vector<double>& x) {
        double* r = real_.get();
        for (std::size_t i = 0; i < real_size_; ++i) r[i] = 0.0;
        if (n_ == 1) {
            for (int a = 0; a < m_; ++a) r[a] = x[a];
        } else {
            for (int a = 0; a < m_; ++a)
                for (int b = 0; b < m_; ++b)
                    r[static_cast<std::size_t>(a) * P_ + b] = x[static_cast<std::size_t>(a) * m_ + b];
        }
        fftw_execute(fwd_);
        fftw_complex* c = cplx_.get();
        const fftw_complex* k = kern_.get();
        for (std::size_t i = 0; i < cplx_size_; ++i) {
            const double re = c[i][0] * k[i][0] - c[i][1] * k[i][1];
            const double im = c[i][0] * k[i][1] + c[i][1] * k[i][0];
            c[i][0] = re;
            c[i][1] = im;
        }
        fftw_execute(bwd_);
        const double norm = 1.0 / static_cast<double>(real_size_);
        std::vector<double> out(x.size());
        if (n_ == 1) {
            for (int a = 0; a < m_; ++a) out[a] = r[a] * norm;
        } else {
            for (int a = 0; a < m_; ++a)
                for (int b = 0; b < m_; ++b)
                    out[static_cast<std::size_t>(a) * m_ + b] = r[static_cast<std::size_t>(a) * P_ + b] * norm;
        }
        return out;
    }

private:
    struct FreeReal {
        void operator()(double* p) const { fftw_free(p); }
    };
    struct FreeCplx {
        void operator()(fftw_complex* p) const { fftw_free(p); }
    };

    int n_, m_, P_;
    std::size_t real_size_ = 0, cplx_size_ = 0;
    std::unique_ptr<double, FreeReal> real_;
    std::unique_ptr<fftw_complex, FreeCplx> cplx_;
    std::unique_ptr<fftw_complex, FreeCplx> kern_;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

/// Circular convolution with a kernel table indexed by lattice offset on an m^n periodic lattice.
class PeriodicConvolver {
public:
    PeriodicConvolver(int n, int m, const std::vector<double>& table) : n_(n), m_(m) {
        size_ = n == 1 ? static_cast<std::size_t>(m) : static_cast<std::size_t>(m) * m;
        if (table.size() != size_) throw ShapeError("PeriodicConvolver: table size mismatch");
        csize_ = n == 1 ? static_cast<std::size_t>(m / 2 + 1) : static_cast<std::size_t>(m) * (m / 2 + 1);
        real_.reset(fftw_alloc_real(size_));
        cplx_.reset(fftw_alloc_complex(csize_));
        kern_.reset(fftw_alloc_complex(csize_));
        if (!real_ || !cplx_ || !kern_) throw NumericalError("PeriodicConvolver: allocation failed");
        {
            std::lock_guard<std::mutex> lock(fftw_planner_mutex());
            if (n == 1) {
                fwd_ = fftw_plan_dft_r2c_1d(m, real_.get(), cplx_.get(), FFTW_ESTIMATE);
                bwd_ = fftw_plan_dft_c2r_1d(m, cplx_.get(), real_.get(), FFTW_ESTIMATE);
            } else {
                fwd_ = fftw_plan_dft_r2c_2d(m, m, real_.get(), cplx_.get(), FFTW_ESTIMATE);
                bwd_ = fftw_plan_dft_c2r_2d(m, m, cplx_.get(), real_.get(), FFTW_ESTIMATE);
            }
        }
        for (std::size_t i = 0; i < size_; ++i) real_.get()[i] = table[i];
        fftw_execute(fwd_);
        for (std::size_t i = 0; i < csize_; ++i) {
            kern_.get()[i][0] = cplx_.get()[i][0];
            kern_.get()[i][1] = cplx_.get()[i][1];
        }
    }

    ~PeriodicConvolver() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }

    PeriodicConvolver(const PeriodicConvolver&) = delete;
    PeriodicConvolver& operator=(const PeriodicConvolver&) = delete;

    /// (K * x)_i = sum_j table[j - i] x_j with offsets taken modulo m per axis.
    std::vector<double> apply(const std::vector<double>& x) {
        double* r = real_.get();
        // table[j - i] convolution: reverse x so the FFT product computes the correlation
        for (std::size_t i = 0; i < size_; ++i) r[i] = x[reversed(i)];
        fftw_execute(fwd_);
        fftw_complex* c = cplx_.get();
        const fftw_complex* k = kern_.get();
        for (std::size_t i = 0; i < csize_; ++i) {
            const double re = c[i][0] * k[i][0] - c[i][1] * k[i][1];
            const double im = c[i][0] * k[i][1] + c[i][1] * k[i][0];
            c[i][0] = re;
            c[i][1] = im;
        }
        fftw_execute(bwd_);
        const double norm = 1.0 / static_cast<double>(size_);
        std::vector<double> out(size_);
        for (std::size_t i = 0; i < size_; ++i) out[reversed(i)] = r[i] * norm;
        return out;
    }

private:
    [[nodiscard]] std::size_t reversed(std::size_t i) const {
        const std::size_t m = static_cast<std::size_t>(m_);
        if (n_ == 1) return (m - i) % m;
        const std::size_t a = i / m, b = i % m;
        return ((m - a) % m) * m + (m - b) % m;
    }
    struct FreeReal {
        void operator()(double* p) const { fftw_free(p); }
    };
    struct FreeCplx {
        void operator()(fftw_complex* p) const { fftw_free(p); }
    };

    int n_, m_;
    std::size_t size_ = 0, csize_ = 0;
    std::unique_ptr<double, FreeReal> real_;
    std::unique_ptr<fftw_complex, FreeCplx> cplx_;
    std::unique_ptr<fftw_complex, FreeCplx> kern_;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

/// Sum over ordered pairs i != j inside the mask of (u_i-u_j)^2 |x_i-x_j|^{-(n+2s)} h^{2n}.
inline double masked_pair_energy(LatticeConvolver& conv, const EuclideanGrid& eg, const std::vector<double>& u,
                                 const std::vector<double>& mask) {
    std::vector<double> mu(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) mu[i] = mask[i] * u[i];
    const auto k_mask = conv.apply(mask);
    const auto k_mu = conv.apply(mu);
    CompensatedSum acc;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (mask[i] == 0.0) continue;
        acc.add(u[i] * u[i] * k_mask[i] - u[i] * k_mu[i]);
    }
    return 2.0 * eg.weight() * eg.weight() * acc.value();
}

inline double masked_pair_energy(const EuclideanGrid& eg, double s, const std::vector<double>& u,
                                 const std::vector<double>& mask) {
    LatticeConvolver conv(eg.n, eg.res, eg.h(), eg.n + 2.0 * s);
    return masked_pair_energy(conv, eg, u, mask);
}

/// Ray directions from x to the outside of [-R, R]^n: (unit direction, angular weight).
inline void box_exit_directions(const EPoint& x, int n, double R, int per_arc,
                                std::vector<std::tuple<EPoint, double, double>>& out) {
    out.clear();
    if (n == 1) {
        out.emplace_back(EPoint{1.0, 0.0}, 1.0, R - x[0]);
        out.emplace_back(EPoint{-1.0, 0.0}, 1.0, R + x[0]);
        return;
    }
    std::array<double, 4> corner{};
    const std::array<EPoint, 4> cs{EPoint{R, R}, EPoint{-R, R}, EPoint{-R, -R}, EPoint{R, -R}};
    for (int k = 0; k < 4; ++k) corner[k] = std::atan2(cs[k][1] - x[1], cs[k][0] - x[0]);
    // corners are seen in counterclockwise order; unwrap so the sequence increases
    for (int k = 1; k < 4; ++k)
        while (corner[k] <= corner[k - 1]) corner[k] += 2.0 * kPi;
    const auto& g = gauss_legendre(per_arc);
    for (int k = 0; k < 4; ++k) {
        const double a0 = corner[k];
        const double a1 = k < 3 ? corner[k + 1] : corner[0] + 2.0 * kPi;
        const double len = a1 - a0;
        for (std::size_t q = 0; q < g.x.size(); ++q) {
            const double th = a0 + len * g.x[q];
            const EPoint w{std::cos(th), std::sin(th)};
            double rb = INFINITY;
            if (w[0] > 0) rb = std::min(rb, (R - x[0]) / w[0]);
            if (w[0] < 0) rb = std::min(rb, (-R - x[0]) / w[0]);
            if (w[1] > 0) rb = std::min(rb, (R - x[1]) / w[1]);
            if (w[1] < 0) rb = std::min(rb, (-R - x[1]) / w[1]);
            out.emplace_back(w, len * g.w[q], rb);
        }
    }
}

}  // namespace detail

struct ExteriorOptions {
    int coupling_res = 200;  // outer-node lattice per axis for the box-exterior coupling
    int per_arc = 8;         // angular Gauss nodes per box arc
    int radial = 12;         // radial Gauss nodes per segment
    double split = 0.5;      // near/far radial split, in units of R
};

/// g(x) = int_{outside [-R,R]^n} (u(x) - u(y))^2 |x-y|^{-(n+2s)} dy for x in the box.
inline double exterior_coupling_density(const EuclideanField& u, const EPoint& x, int n, double R, double s,
                                        const ExteriorOptions& opt,
                                        std::vector<std::tuple<EPoint, double, double>>& dirs) {
    detail::box_exit_directions(x, n, R, opt.per_arc, dirs);
    const auto& g = gauss_legendre(opt.radial);
    const double ux = u(x);
    const double two_s = 2.0 * s;
    CompensatedSum total;
    for (const auto& [w, aw, rb] : dirs) {
        const double rs = std::max(rb, opt.split * R);
        double ray = 0.0;
        if (rs > rb) {
            const double lr = std::log(rs / rb);
            double acc = 0.0;
            for (std::size_t q = 0; q < g.x.size(); ++q) {
                const double rho = rb * std::exp(lr * g.x[q]);
                const double d = ux - u({x[0] + rho * w[0], x[1] + rho * w[1]});
                acc += g.w[q] * d * d * std::pow(rho, -two_s);
            }
            ray += acc * lr;
        }
        double acc = 0.0;
        for (std::size_t q = 0; q < g.x.size(); ++q) {
            const double rho = rs * std::pow(g.x[q], -1.0 / two_s);
            const double d = ux - u({x[0] + rho * w[0], x[1] + rho * w[1]});
            acc += g.w[q] * d * d;
        }
        ray += acc * std::pow(rs, -two_s) / two_s;
        total.add(aw * ray);
    }
    return total.value();
}

/// int_B g(x) dx on a cell-centered lattice of the box, restricted to nodes where keep(x) holds.
template <class Keep>
double exterior_coupling_energy(const EuclideanField& u, int n, double R, double s, const ExteriorOptions& opt,
                                const EuclideanGrid& nodes, Keep&& keep) {
    return reduce_rows(nodes.count(), [&](std::size_t i) {
        const EPoint x = nodes.point(i);
        if (!keep(x)) return 0.0;
        std::vector<std::tuple<EPoint, double, double>> dirs;
        return exterior_coupling_density(u, x, n, R, s, opt, dirs) * nodes.weight();
    });
}

inline double exterior_coupling_energy(const EuclideanField& u, int n, double R, double s,
                                       const ExteriorOptions& opt = {}) {
    const EuclideanGrid nodes(n, R, opt.coupling_res);
    return exterior_coupling_energy(u, n, R, s, opt, nodes, [](const EPoint&) { return true; });
}

/// Self-similar constant c with E_{O_R x O_R}(|x|^{-(n-2s)}) = c R^{-(n-2s)}, O_R the complement of [-R,R]^n.
inline double exterior_self_constant(int n, double s) {
    static std::map<std::pair<int, double>, double> cache;
    static std::mutex mu;
    {
        std::lock_guard<std::mutex> lock(mu);
        if (auto it = cache.find({n, s}); it != cache.end()) return it->second;
    }
    const double gamma = n - 2.0 * s;
    if (!(gamma > 0.0)) throw DomainError("exterior_self_constant: requires n > 2s");
    const EuclideanField v{[n, gamma](const EPoint& x) { return std::pow(detail::enorm(x, n), -gamma); }, 1.0};
    auto in_annulus = [n](const EPoint& x) {
        const double m = n == 1 ? std::abs(x[0]) : std::max(std::abs(x[0]), std::abs(x[1]));
        return m > 1.0;
    };
    // annulus self energy by diagonal-excluded lattice sums, extrapolated in h
    std::vector<double> hs, es;
    for (int res : {n == 1 ? 800 : 160, n == 1 ? 1600 : 320}) {
        const EuclideanGrid eg(n, 2.0, res);
        const auto vals = eg.sample([&](const EPoint& x) { return in_annulus(x) ? v(x) : 0.0; });
        const auto mask = eg.sample([&](const EPoint& x) { return in_annulus(x) ? 1.0 : 0.0; });
        hs.push_back(eg.h());
        es.push_back(detail::masked_pair_energy(eg, s, vals, mask));
    }
    const double e_aa = richardson(hs, es, 2.0 - 2.0 * s).limit;
    ExteriorOptions opt;
    opt.coupling_res = n == 1 ? 400 : 160;
    const EuclideanGrid nodes(n, 2.0, opt.coupling_res);
    const double e_ao = exterior_coupling_energy(v, n, 2.0, s, opt, nodes, in_annulus);
    const double c = (e_aa + 2.0 * e_ao) / (1.0 - std::pow(2.0, -gamma));
    std::lock_guard<std::mutex> lock(mu);
    cache[{n, s}] = c;
    return c;
}

struct SeminormParts {
    double box = 0.0;       // pairs inside the box, lattice quadrature
    double coupling = 0.0;  // box x exterior, both orders
    double exterior = 0.0;  // exterior x exterior, homogeneous tail model
    [[nodiscard]] double total() const { return box + coupling + exterior; }
};

/// Box-only Gagliardo energy [u]^2 of lattice samples, diagonal excluded.
inline double euclidean_seminorm2(const std::vector<double>& samples, const EuclideanGrid& eg, double s) {
    if (samples.size() != eg.count()) throw ShapeError("euclidean_seminorm2: sample count mismatch");
    if (!(s > 0.0 && s < 1.0)) throw ConfigError("euclidean_seminorm2: s must lie in (0,1)");
    return detail::masked_pair_energy(eg, s, samples, std::vector<double>(samples.size(), 1.0));
}

/// [u]^2 over R^n: box lattice sum plus exterior coupling plus tail self energy.
inline SeminormParts euclidean_seminorm2(const EuclideanField& u, const EuclideanGrid& eg, double s,
                                         const ExteriorOptions& opt = {}) {
    if (2.0 * s >= eg.n) throw DomainError("euclidean_seminorm2: requires 2s < n");
    SeminormParts p;
    p.box = euclidean_seminorm2(eg.sample(u.f), eg, s);
    p.coupling = 2.0 * exterior_coupling_energy(u, eg.n, eg.R, s, opt);
    if (u.tail_amplitude != 0.0) {
        const double gamma = eg.n - 2.0 * s;
        p.exterior = u.tail_amplitude * u.tail_amplitude * std::pow(eg.R, -gamma) * exterior_self_constant(eg.n, s);
    }
    return p;
}

struct NormParts {
    double box = 0.0;
    double exterior = 0.0;
    [[nodiscard]] double total() const { return box + exterior; }
};

/// int_{R^n} |u|^q: lattice sum on the box plus radial tail integrals from the origin.
/// The tail substitution assumes |u|^q decays like |x|^{-2n} (critical exponent of the bubble family).
inline NormParts euclidean_lq_norm(const EuclideanField& u, const EuclideanGrid& eg, double q,
                                   const ExteriorOptions& opt = {}) {
    NormParts out;
    CompensatedSum acc;
    for (std::size_t i = 0; i < eg.count(); ++i) acc.add(abs_pow(u(eg.point(i)), q));
    out.box = acc.value() * eg.weight();
    std::vector<std::tuple<EPoint, double, double>> dirs;
    detail::box_exit_directions({0.0, 0.0}, eg.n, eg.R, opt.per_arc, dirs);
    const auto& g = gauss_legendre(opt.radial);
    const double a = eg.n;
    CompensatedSum tail;
    for (const auto& [w, aw, rb] : dirs) {
        double ray = 0.0;
        for (std::size_t k = 0; k < g.x.size(); ++k) {
            const double rho = rb * std::pow(g.x[k], -1.0 / a);
            ray += g.w[k] * abs_pow(u({rho * w[0], rho * w[1]}), q) * std::pow(rho, eg.n - 1 + 1 + a);
        }
        tail.add(aw * ray * std::pow(rb, -a) / a);
    }
    out.exterior = tail.value();
    return out;
}

}  // namespace fracsob
