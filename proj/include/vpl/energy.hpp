#pragma once

// Hypocoercive energy and dissipation functionals at a fixed mode, the
// energy-inequality monitor, and the Strain-Guo decay-lemma checkers.
//
// For a field H on mode k (gradient taken of the represented function, so the
// transport frame is accounted for), with weights w_l = <v>^l e^{q|v|^theta/2}
// and l = ell_star:
//
//   E(H) = A0 (||H||_l^2 + |k|^2 ||H||_{l-2}^2)
//        + nu^{1/3} Re int w_{l-2}^2 (i k H) . conj(grad H)
//        + nu^{2/3} ||grad H||_{l-2}^2
//   D(H) = nu^{2/3} A0 (|H|_{Delta,l}^2 + |k|^2 |H|_{Delta,l-2}^2)
//        + |k|^2 ||H||_{l-2}^2 + nu^{4/3} sum_a |d_a H|_{Delta,l-2}^2
//
// Both carry the factor e^{2(q+1) phi} of a frozen scalar potential phi.

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vpl/collision.hpp"
#include "vpl/grid.hpp"
#include "vpl/random.hpp"
#include "vpl/semigroup.hpp"

namespace vpl {

/** @brief Parameters of the hypocoercive energy at one (alpha, beta, omega) slot. */
struct EnergyParams {
  double A0 = 16.0;      // cross-term dominance constant
  double nu = 0.0;
  double ell_star = 0.0; // polynomial weight index of the slot
  int theta = 0;         // 0: polynomial weight only; 2: Gaussian factor e^{q|v|^2/2}
  double q = 0.0;        // Gaussian rate (theta = 2)
  int n_max = 9;         // derivative budget; M = n_max + 30
  double phi = 0.0;      // frozen scalar potential in the factor e^{(q+1) phi}

  int M() const { return n_max + 30; }
  /** @brief The weight index 2M - 2(|alpha| + |beta| + |omega|). */
  double slot_ell(int a, int b, int w) const { return 2.0 * M() - 2.0 * (a + b + w); }
  WeightSpec weight(double ell) const { return {ell, theta, q}; }
  double phi_factor() const { return std::exp(2.0 * ((theta == 2 ? q : 0.0) + 1.0) * phi); }
};

namespace detail {

inline double weighted_sum(const VelocityGrid& g, const WeightSpec& w, const Field& f) {
  double acc = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) acc += w.weight2(speed2(g, n)) * std::norm(f[n]);
  return acc * g.cell_volume();
}

inline void check_mode(const ModeField& h, const Mode& k, const char* where) {
  if (h.k != k) throw ConfigError(std::string(where) + ": field mode does not match k");
}

/** @brief The three parts of E: A0 part, cross part, gradient part (without the phi factor). */
struct EnergyParts {
  double coercive = 0.0, cross = 0.0, gradient = 0.0;
};

inline EnergyParts energy_parts(const ModeField& h, const Mode& k, const EnergyParams& p) {
  const auto& g = h.grid;
  const WeightSpec w0 = p.weight(p.ell_star).validated(g), w2 = p.weight(p.ell_star - 2.0).validated(g);
  auto gr = twisted_gradient(h);
  EnergyParts e;
  const double k2 = mode_norm2(k);
  double a0 = 0.0, a2 = 0.0, cross = 0.0, grad = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double r2 = speed2(g, n);
    const double ww0 = w0.weight2(r2), ww2 = w2.weight2(r2);
    const double h2 = std::norm(h.values[n]);
    a0 += ww0 * h2;
    a2 += ww2 * h2;
    cplx c = 0.0;
    double gg = 0.0;
    for (int a = 0; a < 3; ++a) {
      c += (I * double(k[a]) * h.values[n]) * std::conj(gr[a][n]);
      gg += std::norm(gr[a][n]);
    }
    cross += ww2 * c.real();
    grad += ww2 * gg;
  }
  const double dv = g.cell_volume();
  e.coercive = p.A0 * (a0 + k2 * a2) * dv;
  e.cross = std::cbrt(p.nu) * cross * dv;
  e.gradient = std::pow(p.nu, 2.0 / 3.0) * grad * dv;
  return e;
}

}  // namespace detail

/**
 * @brief Hypocoercive energy E(h) on mode k. Throws NumericalError (naming A0)
 * if the form evaluates negative beyond round-off.
 */
inline double mode_energy(const ModeField& h, const Mode& k, const EnergyParams& p) {
  detail::check_mode(h, k, "mode_energy");
  auto e = detail::energy_parts(h, k, p);
  const double total = e.coercive + e.cross + e.gradient;
  const double scale = e.coercive + std::abs(e.cross) + e.gradient;
  if (total < -1e-12 * scale)
    throw NumericalError("mode_energy: energy form is indefinite on this input (A0 = " + std::to_string(p.A0) +
                         " too small)");
  return std::max(total, 0.0) * p.phi_factor();
}

/** @brief Hypocoercive dissipation D(h) on mode k (Delta-norms via dissipation_norm). */
inline double mode_dissipation(const ModeField& h, const Mode& k, const EnergyParams& p, const CollisionFields& cf) {
  detail::check_mode(h, k, "mode_dissipation");
  const auto& g = h.grid;
  const WeightSpec w0 = p.weight(p.ell_star), w2 = p.weight(p.ell_star - 2.0);
  const double k2 = mode_norm2(k);
  const double n23 = std::pow(p.nu, 2.0 / 3.0), n43 = std::pow(p.nu, 4.0 / 3.0);
  double d = n23 * p.A0 * (std::pow(dissipation_norm(h, w0, cf), 2) + k2 * std::pow(dissipation_norm(h, w2, cf), 2));
  d += k2 * detail::weighted_sum(g, w2.validated(g), h.values);
  if (n43 > 0.0) {
    auto gr = twisted_gradient(h);
    for (int a = 0; a < 3; ++a) {
      ModeField da(g, h.k, h.twist);
      da.values = std::move(gr[a]);
      d += n43 * std::pow(dissipation_norm(da, w2, cf), 2);
    }
  }
  return d * p.phi_factor();
}

/**
 * @brief Validate energy parameters for mode k on grid g. The form is positive
 * definite exactly when A0 > 1/4 (discriminant of the cross term against the
 * A0 |k|^2 and gradient terms); `probes` random fields confirm it on the grid.
 */
inline EnergyParams validate_energy_params(const EnergyParams& in, const VelocityGrid& g, const Mode& k,
                                           std::uint64_t seed = 1, int probes = 1000) {
  EnergyParams p = in;
  if (!(p.A0 > 0.25))
    throw ConfigError("energy parameter A0 = " + std::to_string(p.A0) + " must exceed 1/4 for a positive definite form");
  if (!(p.nu >= 0.0)) throw ConfigError("energy parameter nu must be non-negative");
  if (p.n_max < 0) throw ConfigError("energy parameter n_max must be non-negative");
  WeightSpec w = p.weight(p.ell_star).validated(g);
  p.q = w.q;
  for (int i = 0; i < probes; ++i) {
    auto f = random_smooth_field(g, seed, std::uint64_t(i), true, k);
    auto e = detail::energy_parts(f, k, p);
    if (!(e.coercive + e.cross + e.gradient > 0.0))
      throw ConfigError("energy parameter A0 = " + std::to_string(p.A0) + " fails the positivity probe " +
                        std::to_string(i));
  }
  return p;
}

/** @brief Energy/dissipation pair for evolve_mode's per-step functionals. */
inline FunctionalPair energy_functionals(const Mode& k, const EnergyParams& p, const CollisionFields& cf) {
  return [k, p, &cf](const ModeField& h) { return std::pair{mode_energy(h, k, p), mode_dissipation(h, k, p, cf)}; };
}

// ---------------------------------------------------------------------------
// Combined norms
// ---------------------------------------------------------------------------

/** @brief Index ranges of the combined norm (lower bound on |alpha|, upper bounds on the rest). */
struct NormSelector {
  int n_alpha_low = 0;
  int n_alpha_beta = 0;
  int n_beta = 0;
  int n_omega = 0;
};

/** @brief One (alpha, beta, omega) contribution to a combined norm. */
struct CombinedTerm {
  int alpha = 0, beta = 0, omega = 0;  // orders
  double prefactor = 1.0;              // |(ik)^alpha|^2 nu^{2|beta|/3}
  double energy = 0.0;                 // mode_energy of the unscaled derivative field
  double value() const { return prefactor * energy; }
};

namespace detail {

/** @brief All multi-indices of order d over three axes as non-decreasing axis lists. */
inline std::vector<std::vector<int>> multi_indices(int d) {
  std::vector<std::vector<int>> out{{}};
  for (int level = 0; level < d; ++level) {
    std::vector<std::vector<int>> next;
    for (const auto& m : out)
      for (int a = m.empty() ? 0 : m.back(); a < 3; ++a) {
        auto mm = m;
        mm.push_back(a);
        next.push_back(std::move(mm));
      }
    out = std::move(next);
  }
  return out;
}

/** @brief sum over |alpha| = m of prod_a k_a^{2 alpha_a}. */
inline double mode_power_sum(const Mode& k, int m) {
  double s = 0.0;
  for (const auto& idx : multi_indices(m)) {
    double p = 1.0;
    for (int a : idx) p *= double(k[a]) * double(k[a]);
    s += p;
  }
  return s;
}

inline ModeField derivative_along(const ModeField& h, int axis) {
  auto gr = twisted_gradient(h);
  ModeField out(h.grid, h.k, h.twist);
  out.values = std::move(gr[axis]);
  return out;
}

/** @brief Fields d_v^beta Y^omega h for all multi-indices with |beta| = b and |omega| = w. */
inline std::vector<ModeField> derivative_family(const ModeField& h, const Mode& k, const std::array<double, 3>& eta,
                                                double t, int b, int w) {
  std::vector<ModeField> out;
  for (const auto& om : multi_indices(w)) {
    ModeField f = h;
    for (int a : om) f = std::move(apply_Y(f, k, eta, t)[a]);
    for (const auto& be : multi_indices(b)) {
      ModeField fb = f;
      for (int a : be) fb = derivative_along(fb, a);
      out.push_back(std::move(fb));
    }
  }
  return out;
}

}  // namespace detail

/**
 * @brief Terms of the combined energy: sum over |alpha| >= n_alpha_low,
 * |beta| <= n_beta, |alpha| + |beta| <= n_alpha_beta and |omega| <= n_omega of
 * E_{alpha,beta,omega}(nu^{|beta|/3} d_x^alpha d_v^beta Y^omega h), with
 * d_x^alpha -> (ik)^alpha, weight index 2M - 2(|alpha| + |beta| + |omega|) and
 * the Gaussian factor only when omega = 0. Y is taken at time t with shift eta.
 * Throws ConfigError when more than three velocity derivatives would be needed.
 */
inline std::vector<CombinedTerm> combined_energy_terms(const ModeField& h, const Mode& k, const EnergyParams& p,
                                                       const NormSelector& s, double t,
                                                       const std::array<double, 3>& eta = {0, 0, 0}) {
  if (s.n_alpha_low < 0 || s.n_alpha_beta < 0 || s.n_beta < 0 || s.n_omega < 0)
    throw ConfigError("combined_energy_norm: selector entries must be non-negative");
  if (s.n_alpha_beta + s.n_omega > p.n_max)
    throw ConfigError("combined_energy_norm: n_alpha_beta + n_omega exceeds n_max");
  if (s.n_alpha_low > s.n_alpha_beta || s.n_beta > s.n_alpha_beta)
    throw ConfigError("combined_energy_norm: n_alpha_low and n_beta must not exceed n_alpha_beta");
  const int beta_max = std::min(s.n_beta, s.n_alpha_beta - s.n_alpha_low);
  if (beta_max + s.n_omega + 1 > 3)
    throw ConfigError("combined_energy_norm: derivative budget exceeded (" + std::to_string(beta_max + s.n_omega + 1) +
                      " velocity derivatives, stencil depth allows 3)");
  std::vector<CombinedTerm> terms;
  for (int w = 0; w <= s.n_omega; ++w)
    for (int b = 0; b <= beta_max; ++b) {
      auto fields = detail::derivative_family(h, k, eta, t, b, w);
      for (int a = s.n_alpha_low; a + b <= s.n_alpha_beta; ++a) {
        const double kp = detail::mode_power_sum(k, a);
        if (kp == 0.0) continue;
        EnergyParams pp = p;
        pp.ell_star = p.slot_ell(a, b, w);
        if (w > 0) pp.theta = 0, pp.q = 0.0;
        CombinedTerm term{a, b, w, kp * std::pow(p.nu, 2.0 * b / 3.0), 0.0};
        for (const auto& f : fields) term.energy += mode_energy(f, k, pp);
        terms.push_back(term);
      }
    }
  return terms;
}

/** @brief Squared combined energy norm (sum of combined_energy_terms). */
inline double combined_energy_norm(const ModeField& h, const Mode& k, const EnergyParams& p, const NormSelector& s,
                                   double t, const std::array<double, 3>& eta = {0, 0, 0}) {
  double sum = 0.0;
  for (const auto& term : combined_energy_terms(h, k, p, s, t, eta)) sum += term.value();
  return sum;
}

/**
 * @brief G-norm sum_{|alpha| + |omega| <= N, 1 <= |beta| <= 2}
 * nu^{(|beta| - 1)/3} ||<v>^{10} d_x^alpha d_v^beta Y^omega h|| (a sum of
 * norms over multi-indices). Needs |beta| + |omega| <= 3, so N <= 1.
 */
inline double g_norm(const ModeField& h, const Mode& k, double nu, int N, double t,
                     const std::array<double, 3>& eta = {0, 0, 0}) {
  if (N < 0) throw ConfigError("g_norm: N must be non-negative");
  if (N + 2 > 3) throw ConfigError("g_norm: derivative budget exceeded (N <= 1 with stencil depth 3)");
  const WeightSpec w{10.0, 0, 0.0};
  double sum = 0.0;
  for (int om = 0; om <= N; ++om)
    for (int b = 1; b <= 2; ++b) {
      auto fields = detail::derivative_family(h, k, eta, t, b, om);
      double fam = 0.0;
      for (const auto& f : fields) fam += weighted_norm(f, w);
      for (int a = 0; a + om <= N; ++a)
        for (const auto& idx : detail::multi_indices(a)) {
          double kp = 1.0;
          for (int ax : idx) kp *= std::abs(double(k[ax]));
          sum += std::pow(nu, (b - 1) / 3.0) * kp * fam;
        }
    }
  return sum;
}

// ---------------------------------------------------------------------------
// Energy-inequality monitor
// ---------------------------------------------------------------------------

/** @brief Result of the hypocoercivity monitor. */
struct HypocoercivityReport {
  double theta_hat = 0.0;
  double binding_time = 0.0;
  bool unconstrained = false;  // nu = 0 or no dissipation: no theta is demanded
  double nu = 0.0;
  Mode k{0, 0, 0};
  double A0 = 0.0;
  std::size_t samples = 0;
};

/**
 * @brief Largest theta >= 0 with dE/dt + theta nu^{1/3} D <= tol at every
 * interior sample, dE/dt by second-order centered differences (endpoints
 * excluded) and tol = 1e-6 max_i max(|dE_i/dt|, nu^{1/3} D_i).
 */
inline HypocoercivityReport hypocoercivity_monitor(const std::vector<double>& t, const std::vector<double>& energy,
                                                   const std::vector<double>& dissipation, double nu) {
  if (t.size() != energy.size() || t.size() != dissipation.size())
    throw ConfigError("hypocoercivity_monitor: series lengths differ");
  if (t.size() < 3) throw ConfigError("hypocoercivity_monitor: need at least three samples for centered differences");
  HypocoercivityReport r;
  r.nu = nu;
  r.samples = t.size() - 2;
  const double n13 = std::cbrt(nu);
  std::vector<double> dE(t.size(), 0.0);
  double scale = 0.0, dmax = 0.0;
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    dE[i] = (energy[i + 1] - energy[i - 1]) / (t[i + 1] - t[i - 1]);
    scale = std::max({scale, std::abs(dE[i]), n13 * dissipation[i]});
    dmax = std::max(dmax, n13 * dissipation[i]);
  }
  if (nu == 0.0 || dmax == 0.0) {
    r.unconstrained = true;
    r.theta_hat = std::numeric_limits<double>::infinity();
    return r;
  }
  const double tol = 1e-6 * scale;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    const double d = n13 * dissipation[i];
    double th = d > 0.0 ? (tol - dE[i]) / d : (dE[i] <= tol ? std::numeric_limits<double>::infinity() : 0.0);
    if (th < best) {
      best = th;
      r.binding_time = t[i];
    }
  }
  r.theta_hat = std::max(best, 0.0);
  return r;
}

/** @brief Monitor over a trajectory whose energy/dissipation functionals were recorded. */
inline HypocoercivityReport hypocoercivity_monitor(const Trajectory& tr, const EnergyParams& p) {
  if (tr.energy.size() != tr.times.size())
    throw ConfigError("hypocoercivity_monitor: trajectory has no recorded energy functionals");
  auto r = hypocoercivity_monitor(tr.times, tr.energy, tr.dissipation, p.nu);
  r.k = tr.k;
  r.A0 = p.A0;
  return r;
}

// ---------------------------------------------------------------------------
// Strain-Guo decay lemmas
// ---------------------------------------------------------------------------

/**
 * @brief Series and constants for the Strain-Guo lemmas. G = int g^2,
 * Gw = int <v>^{-m} g^2, H = int h^2, F the forcing; gaussian_moment is
 * int e^{q|v|^2} g^2 and poly_moment int <v>^{4m} g^2 (either may be empty when
 * the corresponding lemma is not checked).
 */
struct StrainGuoInput {
  double c = 1.0, b = 1.0, m = 1.0, q = 1.0, p = 0.25;
  std::vector<double> t, g2, g2_weighted, h2, forcing, gaussian_moment, poly_moment;
  double moment_bound = 1.0;  // the constant bounding the moments and the weighted forcing integral
  double tolerance = 1e-3;    // relative slack for the hypothesis inequalities (trapezoid bias is O(dt^2))
};

/** @brief Outcome of a lemma check; `evaluated` is false when a hypothesis fails. */
struct StrainGuoReport {
  bool evaluated = false;
  std::string refusal;
  double hypothesis_residual = 0.0;  // worst relative violation of the differential inequality
  double C = 0.0;                    // smallest admissible constant (conclusion / moment bound)
  double C_bound = 0.0;              // the lemma's constant 2 + e^q (2 + m)/q, or 3^5 pi/2 + 1
  double binding_time = 0.0;
  bool holds = false;                // C <= C_bound (poly variant: at every sample)
};

namespace detail {

inline void check_series(const StrainGuoInput& in, bool need_h) {
  const std::size_t n = in.t.size();
  if (n < 3) throw ConfigError("strain_guo_check: need at least three samples");
  if (in.g2.size() != n || in.g2_weighted.size() != n) throw ConfigError("strain_guo_check: series lengths differ");
  if (need_h && ((!in.h2.empty() && in.h2.size() != n) || (!in.forcing.empty() && in.forcing.size() != n)))
    throw ConfigError("strain_guo_check: series lengths differ");
  for (std::size_t i = 1; i < n; ++i)
    if (!(in.t[i] > in.t[i - 1])) throw ConfigError("strain_guo_check: times must increase");
}

/**
 * @brief Worst relative violation of G' + c Gw + b H <= F, checked in
 * integrated form over each sample interval with the trapezoid rule.
 */
inline std::pair<double, double> differential_residual(const StrainGuoInput& in, bool with_h_and_f) {
  double worst = 0.0, when = 0.0, scale = 0.0;
  const std::size_t n = in.t.size();
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, in.g2[i]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dt = in.t[i + 1] - in.t[i];
    auto rate = [&](std::size_t j) {
      double r = in.c * in.g2_weighted[j];
      if (with_h_and_f) {
        if (!in.h2.empty()) r += in.b * in.h2[j];
        if (!in.forcing.empty()) r -= in.forcing[j];
      }
      return r;
    };
    const double res = (in.g2[i + 1] - in.g2[i] + 0.5 * dt * (rate(i) + rate(i + 1))) / (scale * dt * in.c + 1e-300);
    if (res > worst) {
      worst = res;
      when = in.t[i];
    }
  }
  return {worst, when};
}

inline double stretched(const StrainGuoInput& in, double t) {
  return std::exp(in.p * std::pow(in.c * t, 2.0 / (2.0 + in.m)));
}

}  // namespace detail

/**
 * @brief Stretched-exponential Strain-Guo lemma: with sup int e^{q|v|^2} g^2
 * <= C0, G' + c Gw + b H <= F and int e^{p (c t)^{2/(2+m)}} F <= C0, checks
 * sup e^{p (c t)^{2/(2+m)}} G + b int e^{p (c t)^{2/(2+m)}} H <= C C0 and
 * reports the smallest C. Refuses (evaluated = false) on any hypothesis failure.
 */
inline StrainGuoReport strain_guo_check(const StrainGuoInput& in) {
  detail::check_series(in, true);
  StrainGuoReport r;
  if (!(in.c > 0.0 && in.b > 0.0 && in.m >= 0.0 && in.q > 0.0 && in.q < 2.0 && in.p > 0.0 && in.p < in.q / 2.0)) {
    r.refusal = "constants outside the lemma's range (c, b > 0, m >= 0, 0 < q < 2, 0 < p < q/2)";
    return r;
  }
  if (in.gaussian_moment.size() != in.t.size()) {
    r.refusal = "Gaussian moment series missing";
    return r;
  }
  const double C0 = in.moment_bound;
  for (double g : in.gaussian_moment)
    if (g > C0 * (1.0 + in.tolerance)) {
      r.refusal = "Gaussian moment exceeds the moment bound";
      return r;
    }
  auto [res, when] = detail::differential_residual(in, true);
  r.hypothesis_residual = res;
  if (res > in.tolerance) {
    r.refusal = "differential inequality violated at t = " + std::to_string(when);
    r.binding_time = when;
    return r;
  }
  const std::size_t n = in.t.size();
  if (!in.forcing.empty()) {
    double fi = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i)
      fi += 0.5 * (in.t[i + 1] - in.t[i]) *
            (detail::stretched(in, in.t[i]) * in.forcing[i] + detail::stretched(in, in.t[i + 1]) * in.forcing[i + 1]);
    if (fi > C0 * (1.0 + in.tolerance)) {
      r.refusal = "weighted forcing integral exceeds the moment bound";
      return r;
    }
  }
  double sup = 0.0, hint = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double v = detail::stretched(in, in.t[i]) * in.g2[i];
    if (v > sup) {
      sup = v;
      r.binding_time = in.t[i];
    }
  }
  if (!in.h2.empty())
    for (std::size_t i = 0; i + 1 < n; ++i)
      hint += 0.5 * (in.t[i + 1] - in.t[i]) *
              (detail::stretched(in, in.t[i]) * in.h2[i] + detail::stretched(in, in.t[i + 1]) * in.h2[i + 1]);
  r.evaluated = true;
  r.C = (sup + in.b * hint) / C0;
  r.C_bound = 2.0 + std::exp(in.q) * (2.0 + in.m) / in.q;
  r.holds = std::isfinite(r.C) && r.C <= r.C_bound;
  return r;
}

/**
 * @brief Polynomial Strain-Guo lemma: with sup int <v>^{4m} g^2 <= C0 and
 * G' + c Gw <= 0, checks G(t) <= (3^5 pi/2 + 1) C0 <c t>^{-3} at every sample;
 * C is the largest ratio G(t) <c t>^3 / C0.
 */
inline StrainGuoReport strain_guo_poly_check(const StrainGuoInput& in) {
  detail::check_series(in, false);
  StrainGuoReport r;
  if (!(in.c > 0.0 && in.m >= 0.0)) {
    r.refusal = "constants outside the lemma's range (c > 0, m >= 0)";
    return r;
  }
  if (in.poly_moment.size() != in.t.size()) {
    r.refusal = "polynomial moment series missing";
    return r;
  }
  const double C0 = in.moment_bound;
  for (double g : in.poly_moment)
    if (g > C0 * (1.0 + in.tolerance)) {
      r.refusal = "polynomial moment exceeds the moment bound";
      return r;
    }
  auto [res, when] = detail::differential_residual(in, false);
  r.hypothesis_residual = res;
  if (res > in.tolerance) {
    r.refusal = "differential inequality violated at t = " + std::to_string(when);
    r.binding_time = when;
    return r;
  }
  r.evaluated = true;
  r.C_bound = std::pow(3.0, 5) * pi / 2.0 + 1.0;
  for (std::size_t i = 0; i < in.t.size(); ++i) {
    double ratio = in.g2[i] * std::pow(1.0 + std::pow(in.c * in.t[i], 2), 1.5) / C0;
    if (ratio > r.C) {
      r.C = ratio;
      r.binding_time = in.t[i];
    }
  }
  r.holds = r.C <= r.C_bound;
  return r;
}

/**
 * @brief Closed-form construct g(t, v) = e^{-c t <v>^{-m} / 2} g0(v) with the
 * radial g0 = e^{-a|v|^2}, h = 0, F = 0: G' = -c Gw holds exactly. Series are
 * radial quadratures; the moment bound is the t = 0 Gaussian moment (stretched
 * lemma, needs 2a > q) and the t = 0 polynomial moment is stored separately.
 */
inline StrainGuoInput strain_guo_construct(double c, double m, double q, double p, double a,
                                           const std::vector<double>& times, double b = 1.0) {
  if (!(a > 0.0)) throw ConfigError("strain_guo_construct: a must be positive");
  using boost::math::quadrature::gauss_kronrod;
  auto radial = [](auto&& f) {
    return 4.0 * pi * gauss_kronrod<double, 61>::integrate(f, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-13);
  };
  auto bracket = [](double r) { return std::sqrt(1.0 + r * r); };
  StrainGuoInput in;
  in.c = c;
  in.b = b;
  in.m = m;
  in.q = q;
  in.p = p;
  in.t = times;
  for (double t : times) {
    auto log_g2 = [&](double r) { return -c * t * std::pow(bracket(r), -m) - 2.0 * a * r * r; };
    auto g2 = [&](double r) { return std::exp(log_g2(r)); };
    in.g2.push_back(radial([&](double r) { return r * r * g2(r); }));
    in.g2_weighted.push_back(radial([&](double r) { return r * r * std::pow(bracket(r), -m) * g2(r); }));
    in.gaussian_moment.push_back(
        2.0 * a > q ? radial([&](double r) { return r * r * std::exp(q * r * r + log_g2(r)); })
                    : std::numeric_limits<double>::infinity());
    in.poly_moment.push_back(radial([&](double r) { return r * r * std::pow(bracket(r), 4.0 * m) * g2(r); }));
  }
  in.moment_bound = in.gaussian_moment.front();
  return in;
}

/**
 * @brief Strain-Guo input from trajectory snapshots: g = |h|, with c measured
 * as the largest constant for which G' + c Gw <= 0 holds on the samples
 * (centered differences; one-sided at the ends) and the moment bound the
 * largest observed moment (Gaussian rate q, polynomial order 4m).
 */
inline StrainGuoInput strain_guo_from_snapshots(const std::vector<double>& times, const std::vector<ModeField>& snaps,
                                                double m, double q, double p, double b = 1.0) {
  if (times.size() != snaps.size() || times.size() < 3)
    throw ConfigError("strain_guo_from_snapshots: need at least three snapshots with times");
  StrainGuoInput in;
  in.m = m;
  in.q = q;
  in.p = p;
  in.b = b;
  in.t = times;
  const WeightSpec ww{-m / 2.0, 0, 0.0}, wg{0.0, 2, q}, wp{2.0 * m, 0, 0.0};
  for (const auto& h : snaps) {
    in.g2.push_back(std::pow(norm(h), 2));
    in.g2_weighted.push_back(std::pow(weighted_norm(h, ww), 2));
    in.gaussian_moment.push_back(std::pow(weighted_norm(h, wg), 2));
    in.poly_moment.push_back(std::pow(weighted_norm(h, wp), 2));
  }
  double c = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double dG = (in.g2[i + 1] - in.g2[i]) / (times[i + 1] - times[i]);
    const double gw = 0.5 * (in.g2_weighted[i] + in.g2_weighted[i + 1]);
    c = std::min(c, -dG / gw);
  }
  in.c = std::max(c, 0.0);
  in.moment_bound = *std::max_element(in.gaussian_moment.begin(), in.gaussian_moment.end());
  return in;
}

}  // namespace vpl
