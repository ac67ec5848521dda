#include <gtest/gtest.h>

#include "vpl/energy.hpp"

using namespace vpl;

namespace {

const CollisionFields& fields16() {
  static const CollisionFields cf = compute_sigma(build_grid(6.0, 16));
  return cf;
}

/** @brief A0 (||h||^2 + |k|^2 ||h||^2_{-2}) + nu^{2/3} ||grad h||^2_{-2}, assembled from weighted norms. */
double cross_free_energy(const ModeField& h, const Mode& k, double A0, double nu) {
  const WeightSpec w0{0.0, 0, 0.0}, w2{-2.0, 0, 0.0};
  double e = A0 * (std::pow(weighted_norm(h, w0), 2) + mode_norm2(k) * std::pow(weighted_norm(h, w2), 2));
  auto gr = twisted_gradient(h);
  for (int a = 0; a < 3; ++a) {
    ModeField d(h.grid, h.k, h.twist);
    d.values = gr[a];
    e += std::pow(nu, 2.0 / 3.0) * std::pow(weighted_norm(d, w2), 2);
  }
  return e;
}

}  // namespace

TEST(Energy, ZeroAndQuadraticScaling) {
  auto g = build_grid(6.0, 16);
  const Mode k{1, 0, 0};
  EnergyParams p;
  p.nu = 1e-3;
  EXPECT_EQ(mode_energy(ModeField(g, k), k, p), 0.0);
  auto h = random_smooth_field(g, 2, 1, true, k);
  const double e = mode_energy(h, k, p);
  EXPECT_GT(e, 0.0);
  EXPECT_NEAR(mode_energy(scaled(h, 2.0), k, p), 4.0 * e, 1e-12 * e);
  EXPECT_NEAR(mode_energy(scaled(h, cplx(0.0, 1.0)), k, p), e, 1e-12 * e);
  p.phi = 0.3;  // frozen potential factor e^{2 phi} for a polynomial weight
  EXPECT_NEAR(mode_energy(h, k, p), std::exp(0.6) * e, 1e-12 * e);
}

TEST(Energy, ComparableToTheCrossFreeForm) {
  // |cross| <= (2 sqrt(A0))^{-1} (A0 |k|^2 ||h||^2_{-2} + nu^{2/3} ||grad h||^2_{-2}) by AM-GM.
  auto g = build_grid(6.0, 16);
  for (const Mode k : {Mode{1, 0, 0}, Mode{2, 1, 0}})
    for (double nu : {1e-1, 1e-3}) {
      EnergyParams p;
      p.nu = nu;
      const double slack = 1.0 / (2.0 * std::sqrt(p.A0));
      for (int i = 0; i < 10; ++i) {
        auto h = random_smooth_field(g, 3, std::uint64_t(i), true, k);
        h.twist = 0.5 * i;
        const double ratio = mode_energy(h, k, p) / cross_free_energy(h, k, p.A0, nu);
        EXPECT_GE(ratio, 1.0 - slack - 1e-12);
        EXPECT_LE(ratio, 1.0 + slack + 1e-12);
        EXPECT_GE(ratio, 0.5);
        EXPECT_LE(ratio, 2.0);
      }
    }
}

TEST(Energy, CollisionlessLimit) {
  auto g = build_grid(6.0, 16);
  const Mode k{1, 0, 0};
  auto h = random_smooth_field(g, 3, 7, true, k);
  EnergyParams p;
  p.nu = 0.0;
  EXPECT_NEAR(mode_energy(h, k, p), cross_free_energy(h, k, p.A0, 0.0), 1e-12 * mode_energy(h, k, p));
  const double d = mode_dissipation(h, k, p, fields16());
  EXPECT_NEAR(d, std::pow(weighted_norm(h, {-2.0, 0, 0.0}), 2), 1e-12 * d);
}

TEST(Energy, DissipationIsPositive) {
  const auto& cf = fields16();
  const Mode k{1, 0, 0};
  EnergyParams p;
  p.nu = 1e-2;
  auto h = random_smooth_field(cf.grid, 3, 8, true, k);
  const double d = mode_dissipation(h, k, p, cf);
  EXPECT_GT(d, std::pow(weighted_norm(h, {-2.0, 0, 0.0}), 2));
  EXPECT_NEAR(mode_dissipation(scaled(h, 3.0), k, p, cf), 9.0 * d, 1e-12 * d);
}

TEST(Energy, IndefiniteFormIsReported) {
  // Oscillating data e^{-i beta k.v} sqrt(mu) makes the cross term -nu^{1/3} beta |k|^2 ||h||^2_{-2}.
  auto g = build_grid(6.0, 32);
  const Mode k{1, 0, 0};
  auto h = sqrt_maxwellian(g, k);
  h.twist = 5.0;
  EnergyParams p;
  p.nu = 1e-3;
  p.A0 = 0.05;
  try {
    (void)mode_energy(h, k, p);
    FAIL() << "expected an indefinite-form error";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("A0"), std::string::npos);
  }
  p.A0 = 16.0;
  EXPECT_GT(mode_energy(h, k, p), 0.0);
}

TEST(Energy, ParameterValidation) {
  auto g = build_grid(6.0, 16);
  const Mode k{1, 0, 0};
  EnergyParams p;
  p.nu = 1e-3;
  p.A0 = 0.25;
  EXPECT_THROW(validate_energy_params(p, g, k, 1, 10), ConfigError);
  p.A0 = 16.0;
  EXPECT_NO_THROW(validate_energy_params(p, g, k, 1, 20));
  p.theta = 2;
  p.q = 0.5;
  EXPECT_EQ(validate_energy_params(p, g, k, 1, 5).q, 0.5);
  p.q = 1.5;
  EXPECT_THROW(validate_energy_params(p, g, k, 1, 5), ConfigError);
}

TEST(Energy, MonitorWithoutCollisionsDemandsNothing) {
  std::vector<double> t{0, 1, 2, 3}, e{1, 1, 1, 1}, d{1, 1, 1, 1};
  auto r = hypocoercivity_monitor(t, e, d, 0.0);
  EXPECT_TRUE(r.unconstrained);
  EXPECT_TRUE(std::isinf(r.theta_hat));
  EXPECT_THROW(hypocoercivity_monitor(t, e, {1, 1}, 1e-3), ConfigError);
  EXPECT_THROW(hypocoercivity_monitor({0, 1}, {1, 1}, {1, 1}, 1e-3), ConfigError);
}

TEST(Energy, MonitorOnSyntheticDecay) {
  // E = e^{-t}, D = c e^{-t}: centered dE = -e^{-t} sinh(dt)/dt, so theta = sinh(dt)/(dt nu^{1/3} c) + O(tol).
  const double nu = 1e-3, c = 4.0, dt = 0.1;
  std::vector<double> t, e, d;
  for (int i = 0; i <= 50; ++i) {
    t.push_back(dt * i);
    e.push_back(std::exp(-t.back()));
    d.push_back(c * std::exp(-t.back()));
  }
  auto r = hypocoercivity_monitor(t, e, d, nu);
  EXPECT_FALSE(r.unconstrained);
  const double expect = std::sinh(dt) / dt / (std::cbrt(nu) * c);
  EXPECT_NEAR(r.theta_hat, expect, 1e-5 * expect);
  EXPECT_DOUBLE_EQ(r.binding_time, t[1]);
  EXPECT_EQ(r.samples, 49u);
  // Growing energy admits no positive theta.
  for (auto& x : e) x = 1.0 / x;
  EXPECT_EQ(hypocoercivity_monitor(t, e, d, nu).theta_hat, 0.0);
}

TEST(Energy, MonitorOnTrajectory) {
  const auto& cf = fields16();
  const Mode k{1, 0, 0};
  EnergyParams p;
  p.nu = 1e-2;
  EvolutionConfig c;
  c.k = k;
  c.nu = p.nu;
  c.T = 1.0;
  c.dt = 0.1;
  c.snapshot_stride = 0;
  Trajectory plain = evolve_mode(random_smooth_field(cf.grid, 5, 1, true, k), c, cf);
  EXPECT_THROW(hypocoercivity_monitor(plain, p), ConfigError);
  c.functionals = energy_functionals(k, p, cf);
  auto tr = evolve_mode(random_smooth_field(cf.grid, 5, 1, true, k), c, cf);
  ASSERT_EQ(tr.energy.size(), tr.times.size());
  auto r = hypocoercivity_monitor(tr, p);
  EXPECT_GT(r.theta_hat, 0.0);
  EXPECT_EQ(r.k, k);
  EXPECT_EQ(r.A0, p.A0);
}

TEST(Energy, CombinedNormReducesToTheSlotEnergy) {
  auto g = build_grid(6.0, 16);
  const Mode k{1, 0, 0};
  auto h = random_smooth_field(g, 6, 1, true, k);
  EnergyParams p;
  p.nu = 1e-3;
  p.n_max = 2;
  auto terms = combined_energy_terms(h, k, p, {}, 0.0);
  ASSERT_EQ(terms.size(), 1u);
  EnergyParams slot = p;
  slot.ell_star = p.slot_ell(0, 0, 0);
  EXPECT_NEAR(combined_energy_norm(h, k, p, {}, 0.0), mode_energy(h, k, slot), 1e-12 * mode_energy(h, k, slot));
}

TEST(Energy, CombinedNormPrefactorsAndBudget) {
  auto g = build_grid(6.0, 16);
  const Mode k{2, 0, 0};
  auto h = random_smooth_field(g, 6, 2, true, k);
  EnergyParams p;
  p.nu = 1e-3;
  p.n_max = 2;
  NormSelector s{0, 1, 1, 0};
  auto a = combined_energy_terms(h, k, p, s, 0.0);
  p.nu *= 2.0;
  auto b = combined_energy_terms(h, k, p, s, 0.0);
  ASSERT_EQ(a.size(), 3u);  // (alpha, beta) = (0, 0), (1, 0), (0, 1)
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double expect = (a[i].beta == 1 ? std::pow(2.0, 2.0 / 3.0) : 1.0);
    EXPECT_NEAR(b[i].prefactor / a[i].prefactor, expect, 1e-12);
    if (a[i].alpha == 1) {
      EXPECT_DOUBLE_EQ(a[i].prefactor, 4.0);  // |k|^2
    }
  }
  EXPECT_THROW(combined_energy_terms(h, k, p, {0, 2, 2, 1}, 0.0), ConfigError);
  EXPECT_THROW(combined_energy_terms(h, k, p, {0, 3, 0, 0}, 0.0), ConfigError);
  EXPECT_THROW(combined_energy_terms(h, k, p, {2, 1, 0, 0}, 0.0), ConfigError);
}

TEST(Energy, GNorm) {
  auto g = build_grid(6.0, 16);
  const Mode k{1, 0, 0};
  auto h = sqrt_maxwellian(g, k);
  const double n0 = g_norm(h, k, 1e-3, 0, 0.0);
  EXPECT_GT(n0, 0.0);
  EXPECT_GT(g_norm(h, k, 1e-3, 1, 0.0), n0);
  EXPECT_THROW(g_norm(h, k, 1e-3, 2, 0.0), ConfigError);
}

TEST(Energy, StrainGuoConstructSatisfiesTheLemmas) {
  std::vector<double> t;
  for (int i = 0; i <= 200; ++i) t.push_back(0.05 * i);
  const double c = 1.0, m = 1.0, q = 0.5, p = 0.2;
  auto in = strain_guo_construct(c, m, q, p, 1.0, t);
  auto r = strain_guo_check(in);
  ASSERT_TRUE(r.evaluated) << r.refusal;
  EXPECT_DOUBLE_EQ(r.C_bound, 2.0 + std::exp(q) * (2.0 + m) / q);
  EXPECT_TRUE(r.holds);
  EXPECT_GE(r.C, in.g2.front() / in.moment_bound * (1.0 - 1e-12));  // the t = 0 sample alone
  EXPECT_LT(r.hypothesis_residual, 1e-3);
  in.moment_bound = in.poly_moment.front();
  auto pr = strain_guo_poly_check(in);
  ASSERT_TRUE(pr.evaluated) << pr.refusal;
  EXPECT_DOUBLE_EQ(pr.C_bound, std::pow(3.0, 5) * pi / 2.0 + 1.0);
  EXPECT_TRUE(pr.holds);
}

TEST(Energy, StrainGuoRefusesViolatedHypotheses) {
  std::vector<double> t;
  for (int i = 0; i <= 20; ++i) t.push_back(0.1 * i);
  StrainGuoInput in;
  in.c = 1.0;
  in.q = 0.5;
  in.p = 0.2;
  in.t = t;
  in.g2.assign(t.size(), 1.0);  // constant G cannot satisfy G' + c Gw <= 0
  in.g2_weighted.assign(t.size(), 0.5);
  in.gaussian_moment.assign(t.size(), 1.0);
  in.poly_moment.assign(t.size(), 1.0);
  auto r = strain_guo_check(in);
  EXPECT_FALSE(r.evaluated);
  EXPECT_NE(r.refusal.find("differential inequality"), std::string::npos);
  EXPECT_FALSE(strain_guo_poly_check(in).evaluated);
  in.p = 0.3;  // p must stay below q/2
  EXPECT_NE(strain_guo_check(in).refusal.find("range"), std::string::npos);
  in.p = 0.2;
  in.gaussian_moment.back() = 2.0;
  EXPECT_NE(strain_guo_check(in).refusal.find("moment"), std::string::npos);
  in.g2.pop_back();
  EXPECT_THROW(strain_guo_check(in), ConfigError);
}
