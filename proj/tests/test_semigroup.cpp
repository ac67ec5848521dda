#include <gtest/gtest.h>

#include "vpl/random.hpp"
#include "vpl/semigroup.hpp"

using namespace vpl;

namespace {

const CollisionFields& fields16() {
  static const CollisionFields cf = compute_sigma(build_grid(6.0, 16));
  return cf;
}

double free_average(const Mode& k, double t) { return std::pow(pi, 1.5) * std::exp(-0.25 * mode_norm2(k) * t * t); }

}  // namespace

TEST(Semigroup, FreeSemigroupAdvancesTheTwist) {
  auto g = build_grid(6.0, 32);
  const Mode k{1, 1, 0};
  auto h = exact_free_semigroup(sqrt_maxwellian(g, k), k, 1.5);
  EXPECT_DOUBLE_EQ(h.twist, 1.5);
  EXPECT_NEAR(std::abs(velocity_average(h) - free_average(k, 1.5)), 0.0, 1e-9);
  auto h2 = exact_free_semigroup(h, k, 0.5);
  EXPECT_DOUBLE_EQ(h2.twist, 2.0);
  EXPECT_THROW(exact_free_semigroup(h, {2, 0, 0}, 0.1), ConfigError);
}

TEST(Semigroup, CollisionlessEvolutionIsExactTransport) {
  const auto& cf = fields16();
  const Mode k{1, 0, 0};
  EvolutionConfig c;
  c.k = k;
  c.T = 3.0;
  c.dt = 0.25;
  c.snapshot_stride = 4;
  auto tr = evolve_mode(sqrt_maxwellian(cf.grid), c, cf);
  ASSERT_EQ(tr.times.size(), 13u);
  EXPECT_EQ(tr.snapshots.size(), 4u);
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    EXPECT_NEAR(tr.norm_l2[i], tr.norm_l2[0], 1e-13);
    const cplx exact = velocity_average(exact_free_semigroup(sqrt_maxwellian(cf.grid, k), k, tr.times[i]));
    EXPECT_NEAR(std::abs(tr.rho[i] - exact), 0.0, 1e-13) << tr.times[i];
  }
  // Against the continuum average while the coarse grid still resolves the phase.
  EXPECT_NEAR(std::abs(tr.rho[2] - free_average(k, 0.5)), 0.0, 1e-6 * free_average(k, 0.0));
}

TEST(Semigroup, CollisionsDissipateAndKeepInvariants) {
  const auto& cf = fields16();
  auto f = random_smooth_field(cf.grid, 4, 1, true);
  const double n0 = norm(f);
  const double d = null_space_floor(cf);
  ModeField h = f;
  for (int s = 0; s < 5; ++s) {
    const double before = norm(h);
    collision_step(h, 0.5, 0.2, cf, CollisionModel::landau);
    EXPECT_LE(norm(h), before * (1.0 + 1e-12));
  }
  EXPECT_LT(norm(h), n0);
  // The invariant part moves only by the discrete null-space floor.
  auto p0 = project_null(f), p1 = project_null(h);
  EXPECT_LT(norm(axpy(p1, -1.0, p0)), 5.0 * 0.5 * 1.0 * d * n0 + 1e-12);
}

TEST(Semigroup, CrankNicolsonIsSecondOrder) {
  // Smooth data: rough probes excite stiff modes that stay pre-asymptotic at these steps.
  const auto& cf = fields16();
  auto f = sample_field(cf.grid, [](double a, double b, double c) {
    return (a + a * b + 0.3 * c * c) * std::exp(-0.5 * (a * a + b * b + c * c));
  });
  for (auto model : {CollisionModel::fokker_planck, CollisionModel::landau}) {
    auto run = [&](double dt) {
      ModeField h = f;
      const int n = int(std::llround(0.4 / dt));
      for (int s = 0; s < n; ++s) collision_step(h, 1.0, dt, cf, model, 1e-14, 4000);
      return h;
    };
    auto a = run(0.05), b = run(0.025), c = run(0.0125);
    const double order = std::log2(norm(axpy(a, -1.0, b)) / norm(axpy(b, -1.0, c)));
    EXPECT_NEAR(order, 2.0, 0.2) << to_string(model);
  }
}

TEST(Semigroup, StepCountValidation) {
  EvolutionConfig c;
  c.T = 1.0;
  c.dt = 0.3;
  EXPECT_THROW(c.steps(), ConfigError);
  c.dt = 0.25;
  EXPECT_EQ(c.steps(), 4u);
  c.nu = -1.0;
  EXPECT_THROW(c.steps(), ConfigError);
}

TEST(Semigroup, VectorFieldCommutesWithTransport) {
  // In the frame of mode k at time t, Y_{k,0} sqrt(mu) = -v sqrt(mu) for every t.
  auto g = build_grid(6.0, 32);
  const Mode k{1, 0, 0};
  for (double t : {0.0, 1.3}) {
    auto h = exact_free_semigroup(sqrt_maxwellian(g, k), k, t);
    auto y = apply_Y(h, k, {0, 0, 0}, t);
    double err = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
      auto v = g.velocity(n);
      const double s = std::exp(-0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]));
      for (int a = 0; a < 3; ++a) err = std::max(err, std::abs(y[a].values[n] + v[a] * s));
    }
    EXPECT_LT(err, 5e-3) << t;
  }
}

TEST(Semigroup, AveragingBoundConstantIsBounded) {
  auto g = build_grid(6.0, 32);
  const Mode k{1, 0, 0};
  for (double t : {0.0, 2.0, 4.0}) {
    auto h = exact_free_semigroup(sqrt_maxwellian(g, k), k, t);
    auto rep = y_decay_bound_check(h, k, {0, 0, 0}, t, 2, 0.0);
    EXPECT_GT(rep.y_sum, 0.0);
    EXPECT_LT(rep.constant, 1.0) << t;
  }
  EXPECT_THROW(y_decay_bound_check(sqrt_maxwellian(g), k, {0, 0, 0}, 0.0, 4, 0.0), ConfigError);
}

TEST(Semigroup, DecayFitRecoversSyntheticRates) {
  std::vector<double> t, yp, ys;
  for (int i = 0; i <= 200; ++i) {
    t.push_back(0.1 * i);
    yp.push_back(3.0 * std::pow(1.0 + t.back() * t.back(), -1.25));
    ys.push_back(2.0 * std::exp(-0.7 * std::cbrt(0.5 * t.back())));
  }
  auto p = decay_fit(t, yp, {DecayModel::power});
  EXPECT_NEAR(p.rate, 2.5, 1e-10);
  EXPECT_NEAR(p.amplitude, 3.0, 1e-9);
  auto s = decay_fit(t, ys, {DecayModel::stretched, 1.0 / 3.0, 0.5});
  EXPECT_NEAR(s.rate, 0.7, 1e-10);
  EXPECT_LT(s.residual, 1e-12);
  EXPECT_THROW(decay_fit(t, std::vector<double>(t.size(), 0.0), {}), NumericalError);
  EXPECT_THROW(decay_fit(t, yp, {}, 100.0), NumericalError);
}

TEST(Semigroup, CrossingTimeAndSlope) {
  std::vector<double> t, y, x, p;
  for (int i = 0; i <= 50; ++i) {
    t.push_back(0.1 * i);
    y.push_back(std::exp(-t.back()));
  }
  EXPECT_NEAR(crossing_time(t, y, std::exp(-2.0)), 2.0, 1e-12);
  EXPECT_THROW(crossing_time(t, y, 1e-9), NumericalError);
  for (double v : {1e-4, 1e-3, 1e-2}) {
    x.push_back(v);
    p.push_back(5.0 * std::pow(v, -1.0 / 3.0));
  }
  EXPECT_NEAR(log_log_slope(x, p), -1.0 / 3.0, 1e-12);
}
