#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "vpl/experiments.hpp"

using namespace vpl;

namespace {

const CollisionFields& fields24() {
  static const CollisionFields cf = compute_sigma(build_grid(6.0, 24));
  return cf;
}

KernelSeries analytic_series(const Mode& k, double T, double dt) {
  KernelSeries K;
  K.k = k;
  K.series = sample_series([&](double t) { return analytic_kernel_vp(k, t); }, T, dt);
  return K;
}

}  // namespace

TEST(Density, AnalyticKernel) {
  EXPECT_DOUBLE_EQ(analytic_kernel_vp({1, 0, 0}, 0.0), 0.0);
  EXPECT_NEAR(analytic_kernel_vp({1, 0, 0}, 2.0), std::pow(pi, 1.5) * 2.0 * std::exp(-1.0), 1e-14);
  EXPECT_NEAR(analytic_kernel_vp({2, 0, 0}, 1.0), std::pow(pi, 1.5) * std::exp(-1.0), 1e-14);
  EXPECT_THROW(analytic_kernel_vp({0, 0, 0}, 1.0), ConfigError);
}

TEST(Density, CollisionlessKernelMatchesOracle) {
  const auto& cf = fields24();
  for (const Mode k : {Mode{1, 0, 0}, Mode{2, 0, 0}}) {
    auto K = compute_kernel(k, 0.0, 6.0, 0.05, cf);
    auto ref = analytic_series(k, 6.0, 0.05);
    EXPECT_LT(relative_linf(K.series, ref.series), 1e-6) << k[0];
    EXPECT_LT(K.imag_residue, 1e-6);
  }
}

TEST(Density, FoldedAndTwistedFramesAgreeWithoutCollisions) {
  const auto& cf = fields24();
  const Mode k{1, 0, 0};
  PropagationOptions tw;
  tw.frame = DensityFrame::twisted;
  auto a = density_response(sqrt_maxwellian(cf.grid), k, 0.0, 4.0, 0.1, cf);
  auto b = density_response(sqrt_maxwellian(cf.grid), k, 0.0, 4.0, 0.1, cf, tw);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = 0.1 * double(i);
    const double exact = std::pow(pi, 1.5) * std::exp(-0.25 * t * t);
    // Velocity-grid accuracy at h = 0.5; the folded frame also pays for the spectral cut.
    EXPECT_NEAR(std::abs(a[i] - exact), 0.0, 1e-6 * std::pow(pi, 1.5)) << t;
    EXPECT_NEAR(std::abs(b[i] - exact), 0.0, 1e-6 * std::pow(pi, 1.5)) << t;
  }
}

TEST(Density, TrapezoidConvolutionIsExactForLinearData) {
  auto one = sample_series([](double) { return 1.0; }, 2.0, 0.1);
  auto lin = sample_series([](double t) { return t; }, 2.0, 0.1);
  auto c = trapezoid_convolution(one, lin);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c.values[i].real(), 0.5 * std::pow(c.time(i), 2), 1e-13);
  auto shorter = sample_series([](double) { return 1.0; }, 1.0, 0.1);
  EXPECT_THROW(trapezoid_convolution(shorter, lin), ConfigError);
}

TEST(Density, ManufacturedVolterraSolution) {
  auto m = manufactured_volterra(5.0, 0.02);
  EXPECT_LE(m.discrete_error, 1e-10);
  EXPECT_NEAR(m.order, 2.0, 0.2);
  ASSERT_EQ(m.errors.size(), 3u);
  EXPECT_GT(m.errors[0], m.errors[2]);
}

TEST(Density, ResolventAgreesWithVolterra) {
  const Mode k{2, 0, 0};
  auto K = analytic_series(k, 20.0, 0.01);
  auto N = sample_series([](double t) { return std::exp(-t) * std::sin(3.0 * t); }, 20.0, 0.01);
  auto v = solve_volterra(K, N);
  auto G = resolvent_kernel(K, pi / 0.01, 0.01, 0.02);
  auto r = resolvent_solution(G.G, N);
  EXPECT_EQ(v.provenance, "volterra");
  EXPECT_EQ(r.provenance, "resolvent");
  EXPECT_LT(relative_linf(r.rho, v.rho), 1e-4);
  EXPECT_GT(G.min_denominator, 0.02);
  EXPECT_THROW(resolvent_kernel(K, 2.0 * pi / 0.01, 0.01), ConfigError);
}

TEST(Density, LaplaceTransformOfAnalyticKernel) {
  using boost::math::quadrature::gauss_kronrod;
  const Mode k{1, 0, 0};
  auto K = analytic_series(k, 20.0, 0.02);
  // int_0^inf t e^{-t^2/4} dt = 2.
  EXPECT_NEAR(laplace_transform(K, 0.0).value.real(), 2.0 * std::pow(pi, 1.5), 1e-7);
  // Endpoint-corrected trapezoid: O(dt^4) against an adaptive quadrature of the exact kernel.
  for (double lam : {0.5, 2.0}) {
    const double exact = gauss_kronrod<double, 61>::integrate(
        [&](double t) { return std::exp(-lam * t) * analytic_kernel_vp(k, t); }, 0.0,
        std::numeric_limits<double>::infinity(), 15, 1e-13);
    const double e1 = std::abs(laplace_transform(analytic_series(k, 20.0, 0.02), lam).value.real() - exact);
    const double e2 = std::abs(laplace_transform(analytic_series(k, 20.0, 0.01), lam).value.real() - exact);
    EXPECT_LT(e2, 1e-7 * exact) << lam;
    EXPECT_GT(std::log2(e1 / e2), 3.5) << lam;
  }
  EXPECT_THROW(laplace_transform(K, -1.0), ConfigError);
}

TEST(Density, PenroseMarginOfAnalyticKernel) {
  auto K = analytic_series({1, 0, 0}, 20.0, 0.02);
  auto grid = tau_grid(0.0, 10.0, 0.02);
  EXPECT_EQ(grid.size(), 501u);
  auto rep = penrose_margin(K, grid);
  EXPECT_GT(rep.kappa, 0.0);
  double coarse = 1e300;
  for (double tau : grid) coarse = std::min(coarse, std::abs(1.0 + laplace_transform(K, cplx(0.0, tau)).value));
  EXPECT_LE(rep.kappa, coarse + 1e-14);
  EXPECT_GT(rep.kappa, coarse - 1e-3);
}

TEST(Density, SplineResamplingIsAccurate) {
  // Fourth order in the interior; the estimated end derivatives cost accuracy near the ends.
  auto errors = [](double dt, double* edge) {
    auto f = resample(sample_series([](double t) { return std::sin(t); }, 6.0, dt), 10);
    double inner = 0.0;
    *edge = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double t = f.time(i), e = std::abs(f.values[i].real() - std::sin(t));
      double& worst = (t >= 1.0 && t <= 5.0) ? inner : *edge;
      worst = std::max(worst, e);
    }
    return inner;
  };
  double edge1 = 0.0, edge2 = 0.0;
  const double i1 = errors(0.1, &edge1), i2 = errors(0.05, &edge2);
  EXPECT_LT(i1, 1e-6);
  EXPECT_GT(std::log2(i1 / i2), 3.5);
  EXPECT_LT(edge1, 5e-3);
  EXPECT_LT(edge2, edge1);
  auto s = sample_series([](double t) { return std::sin(t); }, 6.0, 0.1);
  EXPECT_EQ(resample(s, 10).size(), 601u);
  EXPECT_THROW(resample(s, 0), ConfigError);
}

TEST(Density, CoupledSolveRequiresNonzeroMode) {
  const auto& cf = fields24();
  EXPECT_THROW(linear_vpl_mode(sqrt_maxwellian(cf.grid), {0, 0, 0}, 0.0, 1.0, 0.1, cf), ConfigError);
  EXPECT_THROW(compute_kernel({0, 0, 0}, 0.0, 1.0, 0.1, cf), ConfigError);
}
