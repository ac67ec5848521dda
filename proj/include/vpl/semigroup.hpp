#pragma once

// Fixed-mode linear Landau evolution d_t h + i k.v h + nu L h = 0.
//
// Fields are carried in the transport frame: h = e^{-i k.v tau} H with the
// twist tau equal to the current time, so the free-transport half steps of the
// Strang splitting are exact and only move the twist. The collision substep
// is Crank-Nicolson with the operator taken in the midpoint frame,
//   (I + nu dt/2 L_m) H+ = (I - nu dt/2 L_m) H,
// solved matrix-free by Jacobi-preconditioned conjugate gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vpl/collision.hpp"
#include "vpl/grid.hpp"
#include "vpl/series.hpp"

namespace vpl {

enum class CollisionModel { landau, fokker_planck };

inline std::string to_string(CollisionModel m) { return m == CollisionModel::landau ? "landau" : "fokker-planck"; }

inline CollisionModel parse_collision_model(const std::string& s) {
  if (s == "landau") return CollisionModel::landau;
  if (s == "fokker-planck") return CollisionModel::fokker_planck;
  throw ConfigError("unknown collision operator '" + s + "' (expected landau or fokker-planck)");
}

/** @brief Scalar functionals (energy, dissipation) evaluated along a run. */
using FunctionalPair = std::function<std::pair<double, double>(const ModeField&)>;

/** @brief Parameters of one fixed-mode run. */
struct EvolutionConfig {
  Mode k{0, 0, 0};
  double nu = 0.0;
  double T = 1.0;
  double dt = 0.1;
  CollisionModel model = CollisionModel::landau;
  std::string scheme = "strang-cn";
  int snapshot_stride = 10;       // 0 disables snapshots
  std::size_t max_snapshots = 400;
  double stop_norm_ratio = 0.0;   // stop once ||h|| <= ratio ||h0|| (0: never)
  double solver_tolerance = 1e-10;
  int max_iterations = 500;
  FunctionalPair functionals;     // optional energy / dissipation per step

  /** @brief Validate and return the number of steps. */
  std::size_t steps() const {
    if (!(dt > 0.0)) throw ConfigError("time step must be positive");
    if (!(T >= 0.0)) throw ConfigError("final time must be non-negative");
    if (!(nu >= 0.0)) throw ConfigError("collisionality must be non-negative");
    double r = T / dt;
    auto n = std::llround(r);
    if (std::abs(r - double(n)) > 1e-8 * std::max(1.0, r))
      throw ConfigError("T/dt must be an integer (T = " + std::to_string(T) + ", dt = " + std::to_string(dt) + ")");
    return std::size_t(n);
  }
};

/** @brief Sampled output of a run. */
struct Trajectory {
  Mode k{0, 0, 0};
  double nu = 0.0;
  std::vector<double> times;          // every step
  std::vector<double> norm_l2;
  std::vector<cplx> rho;              // velocity average
  std::vector<double> energy;         // filled when functionals are supplied
  std::vector<double> dissipation;
  std::vector<double> snapshot_times;
  std::vector<ModeField> snapshots;
  ModeField final_state;
  std::size_t solver_iterations = 0;
  bool stopped_early = false;

  /** @brief The velocity-average series as a TimeSeries (uniform sampling). */
  TimeSeries rho_series() const {
    TimeSeries s;
    s.t0 = times.empty() ? 0.0 : times.front();
    s.dt = times.size() > 1 ? times[1] - times[0] : 1.0;
    s.values = rho;
    return s;
  }
};

/** @brief S_k(t) h = e^{-i k.v t} h, kept in the transport frame (values unchanged, twist advanced). */
inline ModeField exact_free_semigroup(const ModeField& h0, const Mode& k, double t) {
  if (h0.k != k && h0.twist != 0.0) throw ConfigError("exact_free_semigroup: mode does not match the field's frame");
  ModeField out = h0;
  out.k = k;
  out.twist = h0.twist + t;
  return out;
}

/** @brief L in the frame of h (Landau or Fokker-Planck). */
inline ModeField apply_collision(const ModeField& h, const CollisionFields& cf, CollisionModel model) {
  return model == CollisionModel::landau ? apply_L(h, cf) : apply_fokker_planck(h, cf);
}

/** @brief Result of one implicit solve. */
struct SolveReport {
  int iterations = 0;
  double residual = 0.0;
};

/**
 * @brief Solve (I + alpha L) x = b by preconditioned conjugate gradients,
 * L in the frame of b. x holds the initial guess on entry.
 */
inline SolveReport solve_shifted(const ModeField& b, ModeField& x, double alpha, const CollisionFields& cf,
                                 CollisionModel model, double tol, int max_iter) {
  const std::size_t N3 = b.values.size();
  auto diag = operator_diagonal(cf, b.k, b.twist, model == CollisionModel::landau);
  std::vector<double> inv_m(N3);
  for (std::size_t n = 0; n < N3; ++n) inv_m[n] = 1.0 / (1.0 + alpha * diag[n]);
  auto op = [&](const ModeField& y) {
    ModeField ly = apply_collision(y, cf, model);
    for (std::size_t n = 0; n < N3; ++n) ly.values[n] = y.values[n] + alpha * ly.values[n];
    return ly;
  };
  const double bnorm = norm(b);
  SolveReport rep;
  if (bnorm == 0.0) {
    x.values.assign(N3, cplx(0.0));
    return rep;
  }
  ModeField r = op(x);
  for (std::size_t n = 0; n < N3; ++n) r.values[n] = b.values[n] - r.values[n];
  ModeField z = r, p = r;
  for (std::size_t n = 0; n < N3; ++n) z.values[n] = inv_m[n] * r.values[n];
  p = z;
  double rz = inner(z, r).real();
  rep.residual = norm(r) / bnorm;
  while (rep.residual > tol) {
    if (rep.iterations >= max_iter)
      throw NumericalError("implicit collision solve did not converge in " + std::to_string(max_iter) +
                           " iterations (relative residual " + std::to_string(rep.residual) + ")");
    ModeField ap = op(p);
    double pap = inner(p, ap).real();
    if (!(pap > 0.0)) throw NumericalError("implicit collision solve: operator not positive definite");
    double a = rz / pap;
    for (std::size_t n = 0; n < N3; ++n) {
      x.values[n] += a * p.values[n];
      r.values[n] -= a * ap.values[n];
      z.values[n] = inv_m[n] * r.values[n];
    }
    double rz_new = inner(z, r).real();
    double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t n = 0; n < N3; ++n) p.values[n] = z.values[n] + beta * p.values[n];
    ++rep.iterations;
    rep.residual = norm(r) / bnorm;
  }
  return rep;
}

/**
 * @brief One collision substep of length dt in the frame of h
 * (Crank-Nicolson). Returns the number of solver iterations.
 */
inline int collision_step(ModeField& h, double nu, double dt, const CollisionFields& cf, CollisionModel model,
                          double tol = 1e-10, int max_iter = 500) {
  if (nu == 0.0) return 0;
  const double alpha = 0.5 * nu * dt;
  ModeField lh = apply_collision(h, cf, model);
  ModeField b = h;
  for (std::size_t n = 0; n < b.values.size(); ++n) b.values[n] -= alpha * lh.values[n];
  ModeField x = h;
  for (std::size_t n = 0; n < x.values.size(); ++n) x.values[n] = 2.0 * b.values[n] - h.values[n];
  auto rep = solve_shifted(b, x, alpha, cf, model, tol, max_iter);
  h.values = std::move(x.values);
  return rep.iterations;
}

/** @brief Strang-split evolution of one Fourier mode. */
inline Trajectory evolve_mode(const ModeField& h0, const EvolutionConfig& cfg, const CollisionFields& cf) {
  check_same_grid(h0.grid, cf.grid, "evolve_mode");
  const std::size_t nsteps = cfg.steps();
  check_tail(h0, "evolve_mode initial data");
  // Bring the data into the frame of mode cfg.k with twist 0.
  ModeField h = materialize(h0);
  h.k = cfg.k;
  h.twist = 0.0;

  Trajectory tr;
  tr.k = cfg.k;
  tr.nu = cfg.nu;
  int stride = cfg.snapshot_stride;
  const double n0 = norm(h);
  auto record = [&](std::size_t step) {
    const double t = double(step) * cfg.dt;
    tr.times.push_back(t);
    tr.norm_l2.push_back(norm(h));
    tr.rho.push_back(velocity_average(h));
    if (cfg.functionals) {
      auto [e, d] = cfg.functionals(h);
      tr.energy.push_back(e);
      tr.dissipation.push_back(d);
    }
    if (stride > 0 && step % std::size_t(stride) == 0) {
      if (tr.snapshots.size() >= cfg.max_snapshots) {
        // Memory guard: keep every other snapshot and double the stride.
        std::vector<ModeField> kept;
        std::vector<double> kept_t;
        for (std::size_t i = 0; i < tr.snapshots.size(); i += 2) {
          kept.push_back(std::move(tr.snapshots[i]));
          kept_t.push_back(tr.snapshot_times[i]);
        }
        tr.snapshots = std::move(kept);
        tr.snapshot_times = std::move(kept_t);
        stride *= 2;
        warn("snapshot limit reached; snapshot stride increased to " + std::to_string(stride));
        if (step % std::size_t(stride) != 0) return;
      }
      tr.snapshot_times.push_back(t);
      tr.snapshots.push_back(h);
    }
  };
  record(0);
  bool warned = false;
  for (std::size_t s = 1; s <= nsteps; ++s) {
    const double t_prev = double(s - 1) * cfg.dt;
    ModeField before = h;
    h.twist = t_prev + 0.5 * cfg.dt;
    tr.solver_iterations += std::size_t(collision_step(h, cfg.nu, cfg.dt, cf, cfg.model, cfg.solver_tolerance,
                                                       cfg.max_iterations));
    h.twist = double(s) * cfg.dt;
    check_finite(h, "evolve_mode");
    if (!warned && cfg.nu > 0.0) {
      double change = 0.0, scale = norm(before);
      for (std::size_t n = 0; n < h.values.size(); ++n) change += std::norm(h.values[n] - before.values[n]);
      if (scale > 0.0 && std::sqrt(change * h.grid.cell_volume()) > 0.2 * scale) {
        warn("evolve_mode: collision step changes the solution by more than 20%; dt may be too large");
        warned = true;
      }
    }
    record(s);
    if (cfg.stop_norm_ratio > 0.0 && tr.norm_l2.back() <= cfg.stop_norm_ratio * n0) {
      tr.stopped_early = true;
      break;
    }
  }
  tr.final_state = h;
  return tr;
}

// ---------------------------------------------------------------------------
// Vector field Y and the averaging bound
// ---------------------------------------------------------------------------

/** @brief Y_{k,eta} h = grad_v h + i (eta + k t) h, componentwise, in the frame of h. */
inline std::array<ModeField, 3> apply_Y(const ModeField& h, const Mode& k, const std::array<double, 3>& eta,
                                        double t) {
  auto g = twisted_gradient(h);
  std::array<ModeField, 3> out;
  for (int a = 0; a < 3; ++a) {
    out[a] = ModeField(h.grid, h.k, h.twist);
    const cplx c(0.0, eta[a] + k[a] * t);
    for (std::size_t n = 0; n < h.values.size(); ++n) out[a].values[n] = g[a][n] + c * h.values[n];
  }
  return out;
}

/** @brief Both sides of the averaging bound and the implied constant. */
struct YDecayReport {
  double lhs = 0.0;          // |int h sqrt(mu)|
  double y_sum = 0.0;        // sum_{|omega| <= N} ||<v>^{-ell'} Y^omega h||
  double bracket = 1.0;      // <k t + eta>^{-N}
  double constant = 0.0;     // lhs / (bracket * y_sum)
};

/**
 * @brief |int h sqrt(mu) dv| <= C <k t + eta>^{-N} sum_{|omega| <= N} ||<v>^{-ell'} Y^omega h||;
 * returns C(t). N <= 3 (stencil depth).
 */
inline YDecayReport y_decay_bound_check(const ModeField& h, const Mode& k, const std::array<double, 3>& eta, double t,
                                        int order, double ell_prime) {
  if (order < 0 || order > 3) throw ConfigError("y_decay_bound_check: order must lie in [0, 3]");
  YDecayReport rep;
  rep.lhs = std::abs(velocity_average(h));
  double b2 = 1.0;
  for (int a = 0; a < 3; ++a) b2 += std::pow(k[a] * t + eta[a], 2);
  rep.bracket = std::pow(b2, -0.5 * order);
  const WeightSpec w{-ell_prime, 0, 0.0};
  // Breadth-first over multi-indices omega with non-decreasing component order.
  struct Node {
    ModeField f;
    int last;
  };
  std::vector<Node> level{{h, 0}};
  rep.y_sum = weighted_norm(h, w);
  for (int d = 1; d <= order; ++d) {
    std::vector<Node> next;
    for (const auto& node : level) {
      auto y = apply_Y(node.f, k, eta, t);
      for (int a = node.last; a < 3; ++a) {
        rep.y_sum += weighted_norm(y[a], w);
        next.push_back({y[a], a});
      }
    }
    level = std::move(next);
  }
  rep.constant = rep.y_sum > 0.0 ? rep.lhs / (rep.bracket * rep.y_sum) : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Decay-rate fitting
// ---------------------------------------------------------------------------

enum class DecayModel { power, stretched, mixed };

/** @brief Model selection: stretched uses exp(-delta (scale t)^exponent). */
struct DecayModelSpec {
  DecayModel model = DecayModel::power;
  double exponent = 1.0;  // stretched only
  double scale = 1.0;     // stretched only
  double nu = 0.0;        // mixed only
};

struct DecayFit {
  double amplitude = 0.0;
  double rate = 0.0;      // power exponent p or delta
  double residual = 0.0;  // rms residual of the log fit
  std::size_t samples = 0;
};

/**
 * @brief Least squares of log|y| = log A - rate * phi(t) over t >= t_min, with
 * phi = log<t> (power), (scale t)^a (stretched), or
 * max{(nu^{1/3} t)^{1/3}, (nu t)^{2/3}} (mixed envelope).
 */
inline DecayFit decay_fit(const std::vector<double>& t, const std::vector<double>& y, const DecayModelSpec& spec,
                          double t_min = 0.0, double floor = 1e-14) {
  if (t.size() != y.size()) throw ConfigError("decay_fit: time and value lengths differ");
  std::vector<double> xs, ls;
  bool any_above = false;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(y[i]) > floor) any_above = true;
    if (t[i] < t_min || !(std::abs(y[i]) > floor)) continue;
    double phi = 0.0;
    switch (spec.model) {
      case DecayModel::power: phi = 0.5 * std::log1p(t[i] * t[i]); break;
      case DecayModel::stretched: phi = std::pow(spec.scale * t[i], spec.exponent); break;
      case DecayModel::mixed:
        phi = std::max(std::pow(std::cbrt(spec.nu) * t[i], 1.0 / 3.0), std::pow(spec.nu * t[i], 2.0 / 3.0));
        break;
    }
    xs.push_back(phi);
    ls.push_back(std::log(std::abs(y[i])));
  }
  if (!any_above) throw NumericalError("decay_fit: degenerate series (all values below the floor)");
  if (xs.size() < 2) throw NumericalError("decay_fit: fewer than two samples past the transient window");
  const double n = double(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ls[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ls[i];
  }
  const double den = n * sxx - sx * sx;
  DecayFit f;
  f.samples = xs.size();
  double slope = den > 0.0 ? (n * sxy - sx * sy) / den : 0.0;
  double icept = (sy - slope * sx) / n;
  f.rate = -slope;
  f.amplitude = std::exp(icept);
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) ss += std::pow(ls[i] - (icept + slope * xs[i]), 2);
  f.residual = std::sqrt(ss / n);
  return f;
}

/** @brief Time at which a non-increasing sampled series first reaches `level` (log-linear interpolation). */
inline double crossing_time(const std::vector<double>& t, const std::vector<double>& y, double level) {
  for (std::size_t i = 1; i < y.size(); ++i)
    if (y[i] <= level) {
      double a = std::log(y[i - 1]), b = std::log(y[i]), c = std::log(level);
      double w = (a == b) ? 1.0 : (a - c) / (a - b);
      return t[i - 1] + w * (t[i] - t[i - 1]);
    }
  throw NumericalError("series never reaches the requested level");
}

/** @brief Least-squares slope of log y against log x. */
inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double n = double(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace vpl
