#include <gtest/gtest.h>

#include <cmath>

#include <fracsob/kernel.hpp>

#include "test_util.hpp"

using namespace fracsob;

namespace {

const ManifoldDesc kTorus1{ManifoldKind::torus, 1, 1.0};
const ManifoldDesc kTorus2{ManifoldKind::torus, 2, 1.0};
const ManifoldDesc kSphere{ManifoldKind::sphere, 2, 1.0};

}  // namespace

TEST(FracParamsType, CriticalExponent) {
    EXPECT_DOUBLE_EQ(FracParams(2, 0.5, 2.0).pstar(), 4.0);
    EXPECT_DOUBLE_EQ(FracParams(1, 0.25, 2.0).pstar(), 4.0);
    FracParams fp(2, 0.5, 2.0);
    fp.s = 0.3;
    EXPECT_DOUBLE_EQ(fp.pstar(), 2.0 * 2.0 / (2.0 - 0.6));
    EXPECT_THROW(FracParams(1, 0.5, 2.0), DomainError);
    EXPECT_THROW(FracParams(1, 1.5, 2.0), ConfigError);
    EXPECT_THROW(FracParams(1, 0.2, 1.0), ConfigError);
}

TEST(KernelSpecType, Validation) {
    const FracParams fp(1, 0.25, 2.0);
    EXPECT_THROW(KernelSpec::tail(fp, 0.0, 2.0), ConfigError);
    EXPECT_THROW(KernelSpec::tail(fp, 1.5, 2.0), ConfigError);
    EXPECT_THROW(KernelSpec::pure(fp, 1.0), ConfigError);
    EXPECT_NO_THROW(KernelSpec::tail(fp, 1.0, 3.0));
}

TEST(EvalKernel, Examples) {
    const auto tail = KernelSpec::tail(FracParams(2, 0.3, 2.0), 1.1, 5.0);
    EXPECT_EQ(eval_kernel(tail, 1.0), 2.0);
    FracParams fp;  // n=1, s=0.5, p=2 is outside sp<n, bypass the constructor for the formula check
    fp.n = 1;
    fp.s = 0.5;
    fp.p = 2.0;
    KernelSpec t2;
    t2.params = fp;
    t2.kind = KernelKind::fractional_plus_tail;
    t2.alpha = 1.0;
    EXPECT_DOUBLE_EQ(eval_kernel(t2, 0.5), 6.0);
    KernelSpec p2;
    p2.params = fp;
    EXPECT_DOUBLE_EQ(eval_kernel(p2, 2.0), 0.25);
    EXPECT_THROW(eval_kernel(p2, 0.0), DomainError);
    EXPECT_THROW(eval_kernel(p2, -1.0), DomainError);
}

TEST(EvalKernel, PositiveAndDecreasing) {
    for (const auto& spec : {KernelSpec::pure(FracParams(2, 0.5, 2.0)),
                             KernelSpec::tail(FracParams(2, 0.5, 2.0), 1.5, 10.0),
                             KernelSpec::tail(FracParams(1, 0.3, 3.0), 0.2, 10.0)}) {
        double prev = INFINITY;
        for (int k = -40; k <= 40; ++k) {
            const double d = std::pow(10.0, k / 10.0);
            const double v = eval_kernel(spec, d);
            EXPECT_GT(v, 0.0);
            EXPECT_LT(v, prev);
            prev = v;
        }
    }
}

TEST(KernelAxioms, SymmetryOnRandomPairs) {
    const auto spec = KernelSpec::tail(FracParams(2, 0.4, 2.0), 1.0, 10.0);
    auto r = testutil::rng(5);
    for (const auto& desc : {kTorus2, kSphere}) {
        for (int k = 0; k < 1000; ++k) {
            const auto x = testutil::random_point(desc, r);
            const auto y = testutil::random_point(desc, r);
            const double dxy = geodesic_distance(desc, x, y), dyx = geodesic_distance(desc, y, x);
            ASSERT_EQ(eval_kernel(spec, x, y, dxy), eval_kernel(spec, y, x, dyx));
        }
        EXPECT_EQ(check_k2_symmetry(spec, build_grid(desc, desc.kind == ManifoldKind::sphere ? 300 : 16)), 0.0);
    }
}

TEST(KernelAxioms, K3PurePinchIsExactlyOne) {
    const auto spec = KernelSpec::pure(FracParams(2, 0.5, 2.0));
    for (const auto& desc : {kTorus2, kSphere}) {
        const auto rep = check_k3_bounds(spec, build_grid(desc, desc.kind == ManifoldKind::sphere ? 300 : 16));
        EXPECT_EQ(rep.inf, 1.0);
        EXPECT_EQ(rep.sup, 1.0);
        EXPECT_TRUE(rep.passes);
    }
}

TEST(KernelAxioms, K3TailMatchesBruteForce) {
    const auto spec = KernelSpec::tail(FracParams(2, 0.5, 2.0), 1.5, 3.0);
    const auto g = build_grid(kTorus2, 12);
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < g.count(); ++i)
        for (std::size_t j = 0; j < g.count(); ++j) {
            if (i == j) continue;
            const double d = geodesic_distance(kTorus2, g.points[i], g.points[j]);
            const double v = (std::pow(d, -3.0) + std::pow(d, -1.5)) * std::pow(d, 3.0);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    const auto rep = check_k3_bounds(spec, g);
    EXPECT_NEAR(rep.inf, lo, 1e-13);
    EXPECT_NEAR(rep.sup, hi, 1e-13);
    EXPECT_NEAR(rep.sup, 1.0 + std::pow(std::sqrt(0.5), 1.5), 1e-13);
    EXPECT_TRUE(rep.passes);
    const auto tight = KernelSpec::tail(FracParams(2, 0.5, 2.0), 1.5, 1.2);
    EXPECT_FALSE(check_k3_bounds(tight, g).passes);
}

TEST(KernelAxioms, K1RefinementOracle) {
    // n=1, s=0.25, p=2 keeps sp<n; integrand min{d^2,1} d^{-1.5} = d^{0.5} is bounded
    const auto spec = KernelSpec::pure(FracParams(1, 0.25, 2.0));
    const double v64 = check_k1_integrable(spec, build_grid(kTorus1, 64));
    const double v128 = check_k1_integrable(spec, build_grid(kTorus1, 128));
    const double v256 = check_k1_integrable(spec, build_grid(kTorus1, 256));
    // continuum value: int_0^1 int_0^1 d^{1/2} with wrap distance = 2 * int_0^{1/2} t^{1/2} dt
    const double exact = 2.0 * std::pow(0.5, 1.5) / 1.5;
    EXPECT_TRUE(std::isfinite(v64));
    EXPECT_NEAR(v128 / v64, 1.0, 0.2);
    EXPECT_NEAR(v256 / v128, 1.0, 0.2);
    EXPECT_NEAR(v256, exact, 0.01 * exact);
}

TEST(KernelAxioms, K1PureHalfOrderIsCountingMeasure) {
    // s=0.5, p=2, n=1: min{d^2,1} d^{-2} = 1 on the unit torus, so the sum is 1 - 1/N
    FracParams fp;
    fp.n = 1;
    fp.s = 0.5;
    fp.p = 2.0;
    KernelSpec spec;
    spec.params = fp;
    for (int res : {64, 128, 256}) {
        EXPECT_NEAR(check_k1_integrable(spec, build_grid(kTorus1, res)), 1.0 - 1.0 / res, 1e-12);
    }
}

TEST(KernelAxioms, K1ZeroKernel) {
    const auto zero = KernelSpec::custom(FracParams(1, 0.25, 2.0),
                                         [](const Point&, const Point&, double) { return 0.0; }, 2.0);
    EXPECT_EQ(check_k1_integrable(zero, build_grid(kTorus1, 32)), 0.0);
}

TEST(KernelAxioms, K4FlatPureIsExact) {
    const auto spec = KernelSpec::pure(FracParams(2, 0.5, 2.0));
    const auto pairs = default_k4_pairs(2, 1.0);
    for (double eps : {0.2, 0.1, 0.05, 0.013}) {
        EXPECT_EQ(check_k4_blowup(spec, kTorus2, {0.3, 0.7}, pairs, eps).max_deviation, 0.0);
    }
    const auto spec1 = KernelSpec::pure(FracParams(1, 0.25, 2.0));
    const auto pairs1 = default_k4_pairs(1, 1.0);
    EXPECT_EQ(check_k4_blowup(spec1, kTorus1, {0.9, 0.0}, pairs1, 0.2).max_deviation, 0.0);
}

TEST(KernelAxioms, K4TailDecreases) {
    const auto spec = KernelSpec::tail(FracParams(2, 0.5, 2.0), 1.5, 10.0);
    const auto pairs = default_k4_pairs(2, 1.0);
    const auto ladder = check_k4_ladder(spec, kTorus2, {0.5, 0.5}, pairs, {0.2, 0.1, 0.05});
    // oracle: deviation = max (eps |X-Y|)^{n+ps-alpha}
    double rmax = 0.0;
    for (const auto& [X, Y] : pairs) rmax = std::max(rmax, std::hypot(X[0] - Y[0], X[1] - Y[1]));
    for (const auto& rep : ladder) EXPECT_NEAR(rep.max_deviation, std::pow(rep.eps * rmax, 1.5), 1e-12);
    EXPECT_LT(ladder[1].max_deviation, ladder[0].max_deviation);
    EXPECT_LT(ladder[2].max_deviation, ladder[1].max_deviation);
}

TEST(KernelAxioms, K4SphereCurvatureCorrection) {
    const auto spec = KernelSpec::pure(FracParams(2, 0.5, 2.0));
    const auto pairs = default_k4_pairs(2, 1.0);
    double prev = INFINITY;
    for (double eps : {0.2, 0.1, 0.05}) {
        const double dev = check_k4_blowup(spec, kSphere, {1.0, 2.0}, pairs, eps).max_deviation;
        EXPECT_LE(dev, prev + 1e-12);
        prev = dev;
    }
    EXPECT_LE(prev, 0.02);
}

TEST(KernelAxioms, K4Errors) {
    const auto spec = KernelSpec::pure(FracParams(2, 0.5, 2.0));
    EXPECT_THROW(check_k4_blowup(spec, kTorus2, {0, 0}, {{{0.1, 0.1}, {0.1, 0.1}}}, 0.1), DomainError);
    EXPECT_THROW(check_k4_blowup(spec, kTorus2, {0, 0}, {{{10.0, 0.0}, {0.0, 0.0}}}, 0.1), DomainError);
}
