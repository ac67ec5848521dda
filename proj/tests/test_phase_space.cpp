#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "vpl/grid.hpp"
#include "vpl/random.hpp"

using namespace vpl;

namespace {

/** @brief int_{R^3} f(|v|) dv by radial Gauss-Kronrod quadrature. */
template <class F>
double radial_integral(F&& f) {
  using boost::math::quadrature::gauss_kronrod;
  return 4.0 * pi *
         gauss_kronrod<double, 61>::integrate([&](double r) { return r * r * f(r); }, 0.0,
                                              std::numeric_limits<double>::infinity(), 15, 1e-13);
}

}  // namespace

TEST(PhaseSpace, GridSpacing) {
  auto g = build_grid(5.0, 16);
  EXPECT_DOUBLE_EQ(g.spacing, 0.625);
  EXPECT_EQ(g.size(), 4096u);
  EXPECT_DOUBLE_EQ(build_grid(6.0, 32).spacing, 0.375);
}

TEST(PhaseSpace, NodesAreCellCenteredAndSymmetric) {
  auto g = build_grid(6.0, 24);
  EXPECT_DOUBLE_EQ(g.node(0), -6.0 + 0.25);
  for (int i = 0; i < g.n; ++i) EXPECT_NEAR(g.node(i), -g.node(g.n - 1 - i), 1e-14);
  auto idx = g.index(3, 5, 7);
  auto c = g.coords(idx);
  EXPECT_EQ(c[0], 3);
  EXPECT_EQ(c[1], 5);
  EXPECT_EQ(c[2], 7);
}

TEST(PhaseSpace, RejectsInvalidGrids) {
  EXPECT_THROW(build_grid(6.0, 31), ConfigError);
  EXPECT_THROW(build_grid(6.0, 6), ConfigError);
  EXPECT_THROW(build_grid(2.0, 32), ConfigError);
  EXPECT_THROW(build_grid(-1.0, 32), ConfigError);
}

TEST(PhaseSpace, MaxwellianQuadrature) {
  auto g = build_grid(6.0, 48);
  auto s = sqrt_maxwellian(g);
  double n = norm(s);
  EXPECT_NEAR(n * n, std::pow(pi, 1.5), 1e-6);
}

TEST(PhaseSpace, WeightedNormMatchesRadialQuadrature) {
  auto g = build_grid(6.0, 32);
  auto s = sqrt_maxwellian(g);
  for (double ell : {-2.0, 0.0, 1.5, 3.0}) {
    const double exact = radial_integral([&](double r) { return std::pow(1 + r * r, ell) * std::exp(-r * r); });
    const double w = weighted_norm(s, {ell, 0, 0.0});
    // <v>^{2 ell} has complex poles at distance 1 for ell < 0, which caps the trapezoid accuracy.
    EXPECT_NEAR(w * w, exact, (ell < 0 ? 1e-5 : 1e-8) * exact) << ell;
  }
  const double q = 0.5;
  const double exact = radial_integral([&](double r) { return std::exp(q * r * r - r * r); });
  const double w = weighted_norm(s, {0.0, 2, q});
  EXPECT_NEAR(w * w, exact, 1e-6 * exact);
}

TEST(PhaseSpace, WeightValidation) {
  auto g = build_grid(6.0, 32);
  EXPECT_THROW((WeightSpec{0.0, 3, 0.1}.validated(g)), ConfigError);
  EXPECT_THROW((WeightSpec{0.0, 2, 1.5}.validated(g)), ConfigError);
  EXPECT_THROW((WeightSpec{0.0, 2, 0.0}.validated(g)), ConfigError);
  try {
    (void)WeightSpec{0.0, 2, 0.95}.validated(build_grid(10.0, 32));
    FAIL() << "expected the overflow guard";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("overflow guard"), std::string::npos);
  }
  EXPECT_EQ((WeightSpec{1.0, 0, 0.7}.validated(g).q), 0.0);
}

TEST(PhaseSpace, GradientIsFourthOrder) {
  // h = v1 v2^2 sqrt(mu): d_1 h = (1 - v1^2) v2^2 sqrt(mu).
  auto err = [](int n) {
    auto g = build_grid(6.0, n);
    auto h = sample_field(g, [](double a, double b, double c) { return a * b * b * std::exp(-0.5 * (a * a + b * b + c * c)); });
    auto gr = twisted_gradient(h);
    double e = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto v = g.velocity(i);
      const double exact = (1 - v[0] * v[0]) * v[1] * v[1] * std::exp(-0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]));
      e = std::max(e, std::abs(gr[0][i] - exact));
    }
    return e;
  };
  const double e32 = err(32), e64 = err(64);
  EXPECT_LT(e64, 1e-3);
  EXPECT_GT(std::log2(e32 / e64), 3.7);
}

TEST(PhaseSpace, TwistedGradientDifferentiatesThePhase) {
  // Represented function e^{-i k.v tau} sqrt(mu): its gradient is (-i k tau - v) times itself,
  // so in the field's own frame the gradient is (-i k tau - v) sqrt(mu).
  auto g = build_grid(6.0, 32);
  const Mode k{1, 2, 0};
  const double tau = 0.7;
  auto H = sqrt_maxwellian(g, k);
  H.twist = tau;
  auto gr = twisted_gradient(H);
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto v = g.velocity(i);
    const double s = std::exp(-0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]));
    for (int a = 0; a < 3; ++a) err = std::max(err, std::abs(gr[a][i] - cplx(-v[a], -k[a] * tau) * s));
  }
  EXPECT_LT(err, 5e-3);  // fourth-order truncation of d sqrt(mu) at h = 0.375
  // The twist enters exactly: twisted gradient = plain gradient - i k tau H.
  auto plain = sqrt_maxwellian(g, k);
  auto gp = twisted_gradient(plain);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (int a = 0; a < 3; ++a)
      ASSERT_NEAR(std::abs(gr[a][i] - (gp[a][i] - cplx(0.0, k[a] * tau) * plain.values[i])), 0.0, 1e-13);
}

TEST(PhaseSpace, VelocityAverageOfMaxwellian) {
  auto g = build_grid(6.0, 32);
  EXPECT_NEAR(std::abs(velocity_average(sqrt_maxwellian(g)) - std::pow(pi, 1.5)), 0.0, 1e-8);
  // Free transport of sqrt(mu): average e^{-|k t|^2/4} pi^{3/2}.
  auto h = sqrt_maxwellian(g, {1, 0, 0});
  h.twist = 2.0;
  EXPECT_NEAR(std::abs(velocity_average(h) - std::pow(pi, 1.5) * std::exp(-1.0)), 0.0, 1e-8);
  h.twist = 9.0;  // beyond the resolved band
  EXPECT_EQ(velocity_average(h), cplx(0.0));
}

TEST(PhaseSpace, NullSpaceProjection) {
  auto g = build_grid(6.0, 24);
  auto basis = null_space_basis(g);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(std::abs(inner(basis[i], basis[j])), i == j ? 1.0 : 0.0, 1e-12);
  auto f = random_smooth_field(g, 3, 0, true);
  auto p = project_null(f);
  auto pp = project_null(p);
  EXPECT_LT(norm(axpy(pp, -1.0, p)), 1e-12 * norm(p));
  auto r = axpy(f, -1.0, p);
  for (const auto& b : basis) EXPECT_LT(std::abs(inner(r, b)), 1e-12 * norm(f));
}

TEST(PhaseSpace, TailRatio) {
  auto g = build_grid(6.0, 32);
  EXPECT_LT(tail_ratio(sqrt_maxwellian(g)), 1e-6);
  auto flat = sample_field(g, [](double, double, double) { return 1.0; });
  EXPECT_DOUBLE_EQ(tail_ratio(flat), 1.0);
}

TEST(PhaseSpace, ProbesAreReproducible) {
  auto g = build_grid(6.0, 16);
  auto a = random_smooth_field(g, 7, 11, true);
  auto b = random_smooth_field(g, 7, 11, true);
  auto c = random_smooth_field(g, 7, 12, true);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
}
