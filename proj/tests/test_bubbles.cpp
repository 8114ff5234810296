#include <gtest/gtest.h>

#include <cmath>

#include "fracsob/bubbles.hpp"
#include "fracsob/fields.hpp"

using namespace fracsob;

namespace {

// [U]^2 over R^n through the Fourier identity (-Delta)^s U = 4^s G((n+2s)/2)/G((n-2s)/2) U^{(n+2s)/(n-2s)}
// and [u]^2 = 2/C(n,s) ||(-Delta)^{s/2} u||^2, C(n,s) = s 4^s G((n+2s)/2) / (pi^{n/2} G(1-s)).
double bubble_seminorm_exact_n2(double s) {
    const double n = 2.0;
    const double c = s * std::pow(4.0, s) * std::tgamma((n + 2 * s) / 2) / (kPi * std::tgamma(1 - s));
    const double lap = std::pow(4.0, s) * std::tgamma((n + 2 * s) / 2) / std::tgamma((n - 2 * s) / 2);
    return 2.0 / c * lap * kPi;  // int_{R^2} (1+|x|^2)^{-2} dx = pi
}

// Gaussian exp(-|x|^2/2) on R^2: [u]^2 = 4 pi^2 4^{-s} Gamma(1-s) / (2s).
double gaussian_seminorm_exact_n2(double s) { return 4 * kPi * kPi * std::pow(0.25, s) * std::tgamma(1 - s) / (2 * s); }

EuclideanField gaussian() {
    return {[](const EPoint& x) { return std::exp(-0.5 * (x[0] * x[0] + x[1] * x[1])); }, 0.0};
}

GridPtr torus2(double L, int res) { return make_grid({ManifoldKind::torus, 2, L}, res); }

BubbleConfig torus_bubble(double s, double L, double delta) {
    BubbleConfig b;
    b.params = FracParams(2, s, 2.0);
    b.center = {L / 2, L / 2};
    b.delta = delta;
    return b;
}

const std::vector<double> kLadder{0.3, 0.2, 0.12};

}  // namespace

TEST(BubbleProfile, Examples) {
    EXPECT_EQ(bubble_U({0.0, 0.0}, FracParams(2, 0.5, 2.0)), 1.0);
    EXPECT_NEAR(bubble_U({std::sqrt(3.0), 0.0}, FracParams(2, 0.5, 2.0)), 0.5, 1e-15);
    EXPECT_NEAR(bubble_U_radial(1.0, FracParams(3, 0.5, 2.0)), 0.5, 1e-15);
    EXPECT_THROW(bubble_U({0.0, 0.0}, FracParams(2, 0.5, 3.0)), ConfigError);
}

TEST(BubbleProfile, RadialMonotone) {
    const FracParams fp(2, 0.3, 2.0);
    double prev = 2.0;
    for (int k = 0; k <= 200; ++k) {
        const double r = 0.05 * k;
        const double v = bubble_U({r / std::sqrt(2.0), r / std::sqrt(2.0)}, fp);
        EXPECT_LE(v, prev);
        EXPECT_GT(v, 0.0);
        EXPECT_LE(v, 1.0);
        prev = v;
    }
}

TEST(BubbleOnManifold, PeakSupportAndInterior) {
    auto g = torus2(2.0, 64);
    auto b = torus_bubble(0.4, 2.0, 0.4);
    b.eps = 0.15;
    b.center = g->points[32 * 64 + 32];
    const auto u = bubble_on_manifold(b, g);
    const double peak = std::pow(b.eps, -0.5 * (2 - 0.8));
    EXPECT_NEAR(u[32 * 64 + 32], peak, 1e-13 * peak);
    for (std::size_t i = 0; i < g->count(); ++i) {
        const double d = geodesic_distance(g->manifold, b.center, g->points[i]);
        if (d >= 2 * b.delta) {
            EXPECT_EQ(u[i], 0.0);
        }
        if (d <= b.delta) {
            const auto X = log_map(g->manifold, b.center, g->points[i]);
            EXPECT_NEAR(u[i], peak * bubble_U({X[0] / b.eps, X[1] / b.eps}, b.params), 1e-13 * peak);
        }
    }
}

TEST(BubbleOnManifold, CircleScalarOracle) {
    auto g = make_grid({ManifoldKind::torus, 1, 1.0}, 100);
    BubbleConfig b;
    b.params = FracParams(1, 0.25, 2.0);
    b.center = g->points[50];
    b.eps = 0.1;
    b.delta = 0.2;
    const auto u = bubble_on_manifold(b, g);
    // d_g = 0.1 from the center: eps^{-1/4} (1 + 1)^{-1/4}
    EXPECT_NEAR(u[60], std::pow(0.1, -0.25) * std::pow(2.0, -0.25), 1e-12);
    EXPECT_NEAR(u[40], u[60], 1e-12);
}

TEST(BubbleOnManifold, ConfigErrors) {
    auto g = torus2(1.0, 32);
    auto b = torus_bubble(0.5, 1.0, 0.25);
    EXPECT_THROW(bubble_on_manifold(b, g), ConfigError);  // 2 delta = inj
    b.delta = 0.2;
    b.params = FracParams(2, 0.5, 3.0);
    EXPECT_THROW(bubble_on_manifold(b, g), ConfigError);
    b.params = FracParams(1, 0.25, 2.0);
    EXPECT_THROW(bubble_on_manifold(b, g), ConfigError);
    b.params = FracParams(2, 0.5, 2.0);
    b.eps = 0.0;
    EXPECT_THROW(bubble_on_manifold(b, g), ConfigError);
}

TEST(Euclidean, GridBasics) {
    const EuclideanGrid eg(2, 20.0, 200);
    EXPECT_DOUBLE_EQ(eg.h(), 0.2);
    EXPECT_NEAR(eg.weight(), 0.04, 1e-15);
    EXPECT_EQ(eg.count(), 40000u);
    EXPECT_THROW(EuclideanGrid(3, 1.0, 10), ConfigError);
    EXPECT_THROW(EuclideanGrid(2, -1.0, 10), ConfigError);
}

TEST(Euclidean, FftPairSumMatchesDirect) {
    const EuclideanGrid eg(2, 2.0, 24);
    const double s = 0.4;
    const auto u = eg.sample([](const EPoint& x) { return std::exp(-x[0] * x[0] - 0.5 * x[1] * x[1]) + 0.1 * x[0]; });
    CompensatedSum direct;
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < u.size(); ++j) {
            if (i == j) continue;
            const auto a = eg.point(i), b = eg.point(j);
            const double d = std::hypot(a[0] - b[0], a[1] - b[1]);
            direct.add((u[i] - u[j]) * (u[i] - u[j]) * std::pow(d, -2 - 2 * s) * eg.weight() * eg.weight());
        }
    EXPECT_NEAR(euclidean_seminorm2(u, eg, s), direct.value(), 1e-10 * direct.value());
}

TEST(Euclidean, GaussianSeminormOracle) {
    for (double s : {0.3, 0.5}) {
        const auto r = euclidean_rayleigh_extrapolated(gaussian(), 2, s);
        const double ex = gaussian_seminorm_exact_n2(s);
        EXPECT_NEAR(r.seminorm, ex, 1e-4 * ex) << "s=" << s;
    }
}

TEST(Euclidean, BubbleSeminormOracle) {
    for (double s : {0.3, 0.5, 0.6}) {
        const auto r = euclidean_rayleigh_extrapolated(FracParams(2, s, 2.0));
        const double ex = bubble_seminorm_exact_n2(s);
        EXPECT_NEAR(r.seminorm, ex, 2e-3 * ex) << "s=" << s;
        EXPECT_NEAR(r.crit_norm, kPi, 1e-2 * kPi);
    }
    EXPECT_NEAR(bubble_seminorm_exact_n2(0.5), 4 * kPi * kPi, 1e-12);
}

TEST(Euclidean, CriticalNormReference) {
    const auto ref = critical_norm_reference(FracParams(2, 0.5, 2.0));
    EXPECT_NEAR(ref.total(), kPi, 1e-2 * kPi);
    EXPECT_GT(ref.exterior, 0.0);
}

TEST(Euclidean, BestConstantReferenceValue) {
    const auto r = euclidean_rayleigh_extrapolated(FracParams(2, 0.5, 2.0));
    // frozen reference K(2, 1/2, 2)^{-1}; exact value 4 pi^2 / pi^{1/2} = 22.2733
    EXPECT_NEAR(r.rayleigh, 22.2745, 5e-4);
    EXPECT_NEAR(r.rayleigh, 4 * kPi * kPi / std::sqrt(kPi), 1e-3 * r.rayleigh);
    ASSERT_EQ(r.levels.size(), 3u);
    // discrete quotients increase toward the limit and the fit is tight
    EXPECT_LT(r.levels[0].rayleigh, r.levels[1].rayleigh);
    EXPECT_LT(r.levels[1].rayleigh, r.levels[2].rayleigh);
    EXPECT_LT(r.levels[2].rayleigh, r.rayleigh);
    EXPECT_LT(r.seminorm_fit.max_residual, 1e-3 * r.seminorm);
    EXPECT_LT(r.richardson_change, 0.02);
}

TEST(Euclidean, ScaleInvariance) {
    const FracParams fp(2, 0.5, 2.0);
    const double base = euclidean_rayleigh_extrapolated(fp).rayleigh;
    for (double lam : {0.5, 2.0}) {
        const double r = euclidean_rayleigh_extrapolated(bubble_field(fp, lam), 2, 0.5).rayleigh;
        EXPECT_NEAR(r, base, 0.03 * base) << "lambda=" << lam;
    }
}

TEST(Euclidean, ExtremalLocalMinimality) {
    const FracParams fp(2, 0.5, 2.0);
    EuclideanRefOptions o;
    o.resolutions = {100, 200, 400};
    const double base = euclidean_rayleigh_extrapolated(fp, o).rayleigh;
    Rng rng(7);
    for (int k = 0; k < 20; ++k) {
        const double cx = rng.uniform(-1, 1), cy = rng.uniform(-1, 1);
        const double a = rng.uniform() < 0.5 ? -0.1 : 0.1, w = rng.uniform(1, 2);
        EuclideanField pf{[=](const EPoint& x) {
                              const double r2 = ((x[0] - cx) * (x[0] - cx) + (x[1] - cy) * (x[1] - cy)) / (w * w);
                              const double b = r2 < 1 ? std::exp(1 - 1 / (1 - r2)) : 0.0;
                              return bubble_U(x, fp) + a * b;
                          },
                          1.0};
        EXPECT_GE(euclidean_rayleigh_extrapolated(pf, 2, 0.5, o).rayleigh, base) << "perturbation " << k;
    }
}

TEST(Euclidean, DomainErrors) {
    const EuclideanGrid eg(1, 5.0, 50);
    EXPECT_THROW(euclidean_rayleigh(bubble_field(FracParams(1, 0.25, 2.0)), eg, 0.5), DomainError);
    EXPECT_THROW(FracParams(1, 0.5, 2.0).validate(), DomainError);
}

TEST(BubbleSweeps, LadderErrors) {
    auto g = torus2(4.0, 40);
    auto b = torus_bubble(0.5, 4.0, 0.9);
    EXPECT_THROW(bubble_l2_scaling(b, {0.3, 0.2}, g), ResolutionError);  // eps_min < 4h = 0.4
    EXPECT_THROW(bubble_l2_scaling(b, {1.2, 0.5}, g), ConfigError);
    EXPECT_THROW(bubble_l2_scaling(b, {0.5, -0.1}, g), ConfigError);
}

TEST(BubbleSweeps, L2SlopeResolvedRegime) {
    // with delta / eps large the exponent is min(2s, n - 2s)
    auto g = torus2(16.0, 640);
    for (double s : {0.3, 0.7}) {
        auto b = torus_bubble(s, 16.0, 3.9);
        const auto r = bubble_l2_scaling(b, {0.4, 0.28, 0.2, 0.14, 0.1}, g);
        EXPECT_NEAR(r.slope, std::min(2 * s, 2 - 2 * s), 0.1) << "s=" << s;
        EXPECT_EQ(r.l2_regime, s < 0.5);
        EXPECT_FALSE(r.log_regime);
    }
    auto b = torus_bubble(0.5, 16.0, 3.9);
    EXPECT_TRUE(bubble_l2_scaling(b, {0.4, 0.2}, g).log_regime);
}

TEST(BubbleSweeps, L2SlopeInvariantUnderRescaling) {
    auto g = torus2(2.4, 96);
    auto b = torus_bubble(0.3, 2.4, 0.55);
    const std::vector<double> ladder{0.4, 0.28, 0.2, 0.14, 0.1};
    const auto r1 = bubble_l2_scaling(b, ladder, g);
    b.amplitude = 3.0;
    const auto r3 = bubble_l2_scaling(b, ladder, g);
    EXPECT_NEAR(r1.slope, r3.slope, 1e-12);
    EXPECT_NEAR(r3.intercept - r1.intercept, std::log(9.0), 1e-12);
}

TEST(BubbleSweeps, CriticalNormApproachesReference) {
    auto g = torus2(3.8, 128);
    const auto r = bubble_critical_limit(torus_bubble(0.5, 3.8, 0.9), kLadder, g);
    EXPECT_NEAR(r.reference, kPi, 0.01 * kPi);
    EXPECT_LT(r.final_relative_error(), 0.05);
    for (std::size_t k = 1; k < r.values.size(); ++k)
        EXPECT_LE(std::abs(r.values[k] - r.reference), std::abs(r.values[k - 1] - r.reference));
}

TEST(BubbleSweeps, EnergyLimitBand) {
    auto g = torus2(4.0, 160);
    auto b = torus_bubble(0.6, 4.0, 0.9);
    const auto spec = KernelSpec::pure(b.params);
    const auto r = bubble_energy_limit(b, kLadder, g, spec);
    EXPECT_NEAR(r.reference, bubble_seminorm_exact_n2(0.6), 2e-3 * r.reference);
    EXPECT_GE(r.ratios.back(), 0.85);
    EXPECT_LE(r.ratios.back(), 1.10);
    const auto tail = bubble_energy_limit(b, kLadder, g, KernelSpec::tail(b.params, 1.0, 16.0), r.reference);
    for (std::size_t k = 0; k < kLadder.size(); ++k) EXPECT_GT(tail.energies[k], r.energies[k]);
}

TEST(BubbleSweeps, ConstantHasZeroEnergy) {
    auto g = torus2(2.0, 32);
    const auto u = DiscreteFunction::constant(g, 5.0);
    EXPECT_EQ(kernel_energy(u, KernelSpec::pure(FracParams(2, 0.5, 2.0))), 0.0);
}

TEST(Blowup, IdentityGap) {
    BubbleConfig c;
    c.params = FracParams(1, 0.25, 2.0);
    c.center = {0.3, 0.0};
    c.eps = 0.2;
    c.delta = 0.25;
    const auto g256 = make_grid({ManifoldKind::torus, 1, 1.0}, 256);
    const auto g512 = make_grid({ManifoldKind::torus, 1, 1.0}, 512);
    const auto r256 = blowup_identity_check(c, g256, KernelSpec::pure(c.params));
    const auto r512 = blowup_identity_check(c, g512, KernelSpec::pure(c.params));
    EXPECT_LE(r256.gap, 0.03);
    EXPECT_GT(r256.left, 0.0);
    EXPECT_LT(r512.gap, r256.gap);
    const auto rc = blowup_identity_check(c, g256, KernelSpec::pure(c.params), [](double) { return 1.0; });
    EXPECT_EQ(rc.left, 0.0);
    EXPECT_EQ(rc.right, 0.0);
    EXPECT_EQ(rc.gap, 0.0);
}

TEST(Blowup, RejectsCurvedManifold) {
    BubbleConfig c;
    c.params = FracParams(2, 0.5, 2.0);
    c.center = {1.0, 1.0};
    c.eps = 0.1;
    c.delta = 0.3;
    const auto g = make_grid({ManifoldKind::sphere, 2, 1.0}, 200);
    try {
        blowup_identity_check(c, g, KernelSpec::pure(c.params));
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("unsupported manifold"), std::string::npos);
    }
}

TEST(BestConstant, CoherentWithEuclideanExtremal) {
    auto g = torus2(4.0, 160);
    auto b = torus_bubble(0.5, 4.0, 0.9);
    const double k = 1.0 / 22.2745;
    const auto r = best_constant_fit(b, kLadder, g, KernelSpec::pure(b.params), k);
    EXPECT_GE(r.ratio, 0.9);
    for (std::size_t i = 0; i < kLadder.size(); ++i) EXPECT_LE(r.c1[i], r.c1_fit);
    EXPECT_THROW(best_constant_fit(b, kLadder, g, KernelSpec::pure(b.params), 0.0), ConfigError);
}

TEST(LatticeEnergy, MatchesPairSum) {
    Rng rng(21);
    for (int dim : {1, 2}) {
        const auto g = make_grid({ManifoldKind::torus, dim, 1.7}, dim == 1 ? 96 : 24);
        const FracParams fp(dim, dim == 1 ? 0.3 : 0.6, 2.0);
        for (const auto& spec : {KernelSpec::pure(fp), KernelSpec::tail(fp, 0.5, 8.0)}) {
            const PairKernel pk(g, spec);
            ASSERT_TRUE(pk.is_lattice());
            const auto u = band_limited_field(g, rng, 5);
            const double direct = kernel_energy(u, pk);
            EXPECT_NEAR(lattice_kernel_energy(u, pk), direct, 1e-12 * direct);
        }
    }
    const auto gs = make_grid({ManifoldKind::sphere, 2, 1.0}, 100);
    const PairKernel ps(gs, KernelSpec::pure(FracParams(2, 0.5, 2.0)));
    const auto v = band_limited_field(gs, rng, 2);
    EXPECT_EQ(lattice_kernel_energy(v, ps), kernel_energy(v, ps));
}
