#pragma once

// Named experiment pipelines. Each fills an ExperimentResult with tables
// (written as CSV), a JSON report and named checks; the CLI and the acceptance
// driver share these pipelines.

#include <atomic>
#include <chrono>
#include <ctime>
#include <iomanip>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "vpl/collision.hpp"
#include "vpl/config.hpp"
#include "vpl/density.hpp"
#include "vpl/energy.hpp"
#include "vpl/random.hpp"
#include "vpl/semigroup.hpp"

namespace vpl {

using json = nlohmann::ordered_json;

/** @brief A numeric table with documented columns. */
struct Table {
  std::string name;                                         // file stem
  std::vector<std::pair<std::string, std::string>> columns; // (column, description)
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) {
    if (row.size() != columns.size()) throw std::logic_error("table " + name + ": row width mismatch");
    rows.push_back(std::move(row));
  }
};

/** @brief One named pass/fail check with its measured value and threshold. */
struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

/** @brief Everything an experiment produces. */
struct ExperimentResult {
  std::string experiment;
  std::string stage = "setup";  // last stage entered (names the failing stage on errors)
  std::vector<Table> tables;
  std::vector<Check> checks;
  json report = json::object();

  void check(std::string name, bool pass, std::string detail) {
    checks.push_back({std::move(name), pass, std::move(detail)});
  }
  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
};

namespace detail {

inline std::string sci(double x, int digits = 3) {
  std::ostringstream ss;
  ss << std::scientific << std::setprecision(digits) << x;
  return ss.str();
}

/** @brief Six significant digits, for messages. */
inline std::string num(double x) {
  std::ostringstream ss;
  ss << std::setprecision(6) << x;
  return ss.str();
}

inline json mode_json(const Mode& k) { return json::array({k[0], k[1], k[2]}); }

/** @brief Run task(i) for i < n on a pool of `threads` workers; the first exception is rethrown. */
template <class F>
void parallel_for(std::size_t n, int threads, F&& task) {
  const std::size_t workers = std::min<std::size_t>(std::size_t(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/** @brief sqrt(mu) (1 + v1) on mode k. */
inline ModeField tilted_maxwellian(const VelocityGrid& g, const Mode& k) {
  ModeField h(g, k);
  for (std::size_t n = 0; n < g.size(); ++n) h.values[n] = std::exp(-0.5 * speed2(g, n)) * (1.0 + g.velocity(n)[0]);
  return h;
}

/** @brief sqrt(mu) v1 v2 (orthogonal to the collision invariants). */
inline ModeField shear_maxwellian(const VelocityGrid& g, const Mode& k) {
  ModeField h(g, k);
  for (std::size_t n = 0; n < g.size(); ++n) {
    auto v = g.velocity(n);
    h.values[n] = std::exp(-0.5 * speed2(g, n)) * v[0] * v[1];
  }
  return h;
}

inline double relative_linf_window(const TimeSeries& a, const std::function<double(double)>& ref, double t_end) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size() && a.time(i) <= t_end + 1e-12; ++i) {
    num = std::max(num, std::abs(a.values[i] - ref(a.time(i))));
    den = std::max(den, std::abs(ref(a.time(i))));
  }
  return den > 0.0 ? num / den : num;
}

/** @brief Every r-th sample. */
inline TimeSeries subsample(const TimeSeries& f, int r) {
  TimeSeries o;
  o.t0 = f.t0;
  o.dt = f.dt * r;
  for (std::size_t i = 0; i < f.size(); i += std::size_t(r)) o.values.push_back(f.values[i]);
  return o;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operator self-test
// ---------------------------------------------------------------------------

/** @brief Symmetry, positivity and null-space floors of L on random probes. */
inline void run_operator_checks(const ExperimentConfig& cfg, ExperimentResult& res) {
  res.stage = "collision fields";
  const auto g = cfg.grid();
  auto cf = compute_sigma(g);

  res.stage = "symmetry and positivity";
  Table probes{"operator_probes",
               {{"probe", "random probe index"},
                {"symmetry", "|<Lf,g> - <f,Lg>| / (||Lf|| ||g||)"},
                {"positivity", "<Lg,g> / ||g||^2"}},
               {}};
  double worst_sym = 0.0, worst_pos = std::numeric_limits<double>::infinity();
  for (int i = 0; i < cfg.probes; ++i) {
    auto f = random_smooth_field(g, cfg.seed, std::uint64_t(2 * i), true);
    auto h = random_smooth_field(g, cfg.seed, std::uint64_t(2 * i + 1), true);
    auto Lf = apply_L(f, cf), Lh = apply_L(h, cf);
    const double sym = std::abs(inner(Lf, h) - inner(f, Lh)) / (norm(Lf) * norm(h));
    const double pos = inner(Lh, h).real() / std::pow(norm(h), 2);
    worst_sym = std::max(worst_sym, sym);
    worst_pos = std::min(worst_pos, pos);
    probes.add({double(i), sym, pos});
  }
  res.tables.push_back(std::move(probes));
  res.check("L symmetry", worst_sym <= 1e-8, "max relative asymmetry " + detail::sci(worst_sym) + " (limit 1e-8)");
  res.check("L positivity", worst_pos >= -1e-8, "min <Lg,g>/||g||^2 = " + detail::sci(worst_pos) + " (limit -1e-8)");

  res.stage = "null-space floors";
  Table floors{"null_space_floors",
               {{"n", "points per axis"},
                {"invariant", "collision invariant index (1, v1, v2, v3, |v|^2)"},
                {"residual", "||L b|| / ||b||"},
                {"floor", "max over the invariants"}},
               {}};
  std::vector<double> floor_values;
  json floor_report = json::array();
  for (int m : cfg.floor_grids) {
    auto cfm = m == cfg.n ? cf : compute_sigma(build_grid(cfg.half_width, m));
    auto inv = collision_invariants(cfm.grid);
    std::vector<double> r;
    for (const auto& b : inv) r.push_back(norm(apply_L(b, cfm)) / norm(b));
    const double fl = *std::max_element(r.begin(), r.end());
    for (std::size_t b = 0; b < r.size(); ++b) floors.add({double(m), double(b), r[b], fl});
    floor_values.push_back(fl);
    floor_report.push_back({{"n", m}, {"floor", fl}, {"residuals", r}});
  }
  res.tables.push_back(std::move(floors));
  res.report["floors"] = floor_report;
  bool monotone = true;
  std::string trail;
  for (std::size_t i = 0; i < floor_values.size(); ++i) {
    trail += (i ? ", " : "") + std::to_string(cfg.floor_grids[i]) + ": " + detail::sci(floor_values[i]);
    if (i > 0 && cfg.floor_grids[i] > cfg.floor_grids[i - 1] && !(floor_values[i] < floor_values[i - 1]))
      monotone = false;
  }
  res.check("null-space floor decreases under refinement", monotone, trail);
  res.report["symmetry_max"] = worst_sym;
  res.report["positivity_min"] = worst_pos;
}

/** @brief sigma(0) = (4 pi/3) I and the lambda_1 |v|^3, lambda_2 |v| plateaus along e1. */
inline void run_sigma_checks(const ExperimentConfig& cfg, ExperimentResult& res) {
  res.stage = "sigma structure";
  const auto g = cfg.grid();
  auto s0 = sigma_at(g, {0, 0, 0});
  double s0_err = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      s0_err = std::max(s0_err, std::abs(s0[a][b] - (a == b ? 4.0 * pi / 3.0 : 0.0)) / (4.0 * pi / 3.0));
  res.check("sigma(0) = (4 pi/3) I", s0_err <= 1e-3, "relative error " + detail::sci(s0_err) + " (limit 1e-3)");
  Table plateau{"sigma_plateaus",
                {{"r", "speed along e1"},
                 {"lambda1_r3", "lambda_1(v) |v|^3"},
                 {"lambda2_r", "lambda_2(v) |v|"}},
                {}};
  double l1min = 1e300, l1max = 0, l2min = 1e300, l2max = 0;
  for (double r = 4.0; r <= 5.5 + 1e-9; r += 0.1) {
    auto s = sigma_at(g, {r, 0, 0});
    const double a = s[0][0] * r * r * r, b = s[1][1] * r;
    l1min = std::min(l1min, a), l1max = std::max(l1max, a);
    l2min = std::min(l2min, b), l2max = std::max(l2max, b);
    plateau.add({r, a, b});
  }
  res.tables.push_back(std::move(plateau));
  const double f1 = (l1max - l1min) / l1max, f2 = (l2max - l2min) / l2max;
  res.check("lambda1 |v|^3 plateau", f1 <= 0.03, "relative spread " + detail::sci(f1) + " over |v| in [4, 5.5] (limit 3%)");
  res.check("lambda2 |v| plateau", f2 <= 0.03, "relative spread " + detail::sci(f2) + " over |v| in [4, 5.5] (limit 3%)");
  res.report["sigma0_error"] = s0_err;
  res.report["plateau_spread"] = {{"lambda1", f1}, {"lambda2", f2}};
}

// ---------------------------------------------------------------------------
// Kernel convergence (nu = 0 oracle and nu-continuity)
// ---------------------------------------------------------------------------

inline void run_kernel_convergence(const ExperimentConfig& cfg, ExperimentResult& res) {
  res.stage = "collision fields";
  auto cf = compute_sigma(cfg.grid());
  PropagationOptions opt = cfg.propagation;
  opt.model = cfg.model;

  res.stage = "nu = 0 kernels";
  Table oracle{"kernel_oracle",
               {{"k1", "mode component 1"}, {"k2", "mode component 2"}, {"k3", "mode component 3"},
                {"t", "time"}, {"K", "computed kernel K_k(t) at nu = 0"},
                {"K_exact", "pi^{3/2} t exp(-|k|^2 t^2 / 4)"}},
               {}};
  std::vector<KernelSeries> k0(cfg.modes.size());
  detail::parallel_for(cfg.modes.size(), cfg.threads,
                       [&](std::size_t i) { k0[i] = compute_kernel(cfg.modes[i], 0.0, cfg.T, cfg.dt, cf, opt); });
  json oracle_report = json::array();
  for (std::size_t i = 0; i < cfg.modes.size(); ++i) {
    const auto& k = cfg.modes[i];
    const auto& s = k0[i].series;
    for (std::size_t j = 0; j < s.size(); ++j)
      oracle.add({double(k[0]), double(k[1]), double(k[2]), s.time(j), s.values[j].real(),
                  analytic_kernel_vp(k, s.time(j))});
    const double err = detail::relative_linf_window(s, [&](double t) { return analytic_kernel_vp(k, t); }, cfg.T);
    oracle_report.push_back({{"k", detail::mode_json(k)}, {"relative_linf", err}});
    res.check("nu = 0 kernel oracle k = " + detail::format_modes({k}), err <= 1e-3,
              "relative Linf " + detail::sci(err) + " on [0, " + detail::num(cfg.T) + "] (limit 1e-3)");
  }
  res.tables.push_back(std::move(oracle));
  res.report["oracle"] = oracle_report;

  res.stage = "nu sweep";
  const Mode k = cfg.modes.front();
  const double window = std::min(cfg.window, cfg.T);
  std::vector<KernelSeries> kn(cfg.nus.size());
  detail::parallel_for(cfg.nus.size(), cfg.threads,
                       [&](std::size_t i) { kn[i] = compute_kernel(k, cfg.nus[i], window, cfg.dt, cf, opt); });
  Table sweep{"kernel_nu_continuity",
              {{"nu", "collisionality"}, {"sup_diff", "sup_{[0, window]} |K^(nu) - K^(0)|"}},
              {}};
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < cfg.nus.size(); ++i) {
    double d = 0.0;
    const auto& a = kn[i].series;
    for (std::size_t j = 0; j < a.size(); ++j) d = std::max(d, std::abs(a.values[j] - k0[0].series.values[j]));
    sweep.add({cfg.nus[i], d});
    if (cfg.nus[i] > 0.0) xs.push_back(cfg.nus[i]), ys.push_back(d);
  }
  res.tables.push_back(std::move(sweep));
  if (xs.size() >= 2) {
    const double slope = log_log_slope(xs, ys);
    res.report["nu_slope"] = slope;
    res.check("kernel nu-continuity slope", slope >= 0.8 && slope <= 1.2,
              "fitted slope " + detail::num(slope) + " (range [0.8, 1.2])");
  }
}

// ---------------------------------------------------------------------------
// Penrose scan (Laplace anchor and margins)
// ---------------------------------------------------------------------------

inline void run_penrose_scan(const ExperimentConfig& cfg, ExperimentResult& res) {
  res.stage = "collision fields";
  auto cf = compute_sigma(cfg.grid());
  PropagationOptions opt = cfg.propagation;
  opt.model = cfg.model;

  struct Point {
    Mode k;
    double nu;
    KernelSeries K;
    PenroseReport coarse, fine;
    LaplaceValue at_zero;
  };
  std::vector<Point> pts;
  for (const auto& k : cfg.modes)
    for (double nu : cfg.nus) pts.push_back({k, nu, {}, {}, {}, {}});

  res.stage = "kernels and margins";
  detail::parallel_for(pts.size(), cfg.threads, [&](std::size_t i) {
    auto& p = pts[i];
    p.K = compute_kernel(p.k, p.nu, cfg.T, cfg.dt, cf, opt);
    p.coarse = penrose_margin(p.K, tau_grid(0.0, cfg.tau_max, cfg.tau_spacing));
    p.fine = penrose_margin(p.K, tau_grid(0.0, cfg.tau_max, 0.5 * cfg.tau_spacing));
    p.at_zero = laplace_transform(p.K, cplx(0.0));
  });

  Table margins{"penrose_margins",
                {{"k1", "mode component 1"}, {"k2", "mode component 2"}, {"k3", "mode component 3"},
                 {"nu", "collisionality"},
                 {"kappa", "min_tau |1 + L[K](i tau)| on the configured tau grid"},
                 {"kappa_fine", "same on the halved tau grid"},
                 {"argmin_tau", "minimizing frequency (fine grid)"},
                 {"laplace0_re", "Re L[K](0)"}, {"laplace0_im", "Im L[K](0)"}},
                {}};
  json list = json::array();
  for (const auto& p : pts) {
    margins.add({double(p.k[0]), double(p.k[1]), double(p.k[2]), p.nu, p.coarse.kappa, p.fine.kappa,
                 p.fine.argmin_tau, p.at_zero.value.real(), p.at_zero.value.imag()});
    const double drift = std::abs(p.fine.kappa - p.coarse.kappa) / std::abs(p.fine.kappa);
    list.push_back({{"k", detail::mode_json(p.k)}, {"nu", p.nu}, {"kappa", p.fine.kappa},
                    {"kappa_coarse", p.coarse.kappa}, {"argmin_tau", p.fine.argmin_tau},
                    {"tail_flagged", p.fine.tail_flagged}, {"grid_drift", drift}});
    const std::string tag = "k = " + detail::format_modes({p.k}) + ", nu = " + detail::num(p.nu);
    res.check("Penrose margin " + tag, p.fine.kappa > 0.0 && drift <= 0.01,
              "kappa " + detail::num(p.fine.kappa) + ", tau-grid halving drift " + detail::sci(drift) + " (limit 1%)");
    if (p.nu == 0.0 && p.k == Mode{1, 0, 0}) {
      const double err = std::abs(p.at_zero.value - 2.0 * std::pow(pi, 1.5)) / (2.0 * std::pow(pi, 1.5));
      res.report["laplace_anchor_error"] = err;
      res.check("Laplace anchor L[K_e1](0) = 2 pi^{3/2}", err <= 1e-3,
                "relative error " + detail::sci(err) + " (limit 1e-3)");
    }
  }
  res.tables.push_back(std::move(margins));
  res.report["margins"] = list;
}

// ---------------------------------------------------------------------------
// Landau damping
// ---------------------------------------------------------------------------

/** @brief Local maxima of |rho| with t >= t_min and |rho| above `floor` times the peak. */
inline std::pair<std::vector<double>, std::vector<double>> envelope_peaks(const TimeSeries& rho, double t_min,
                                                                          double floor) {
  double mx = 0.0;
  for (const auto& v : rho.values) mx = std::max(mx, std::abs(v));
  std::vector<double> t, y;
  for (std::size_t i = 1; i + 1 < rho.size(); ++i) {
    const double a = std::abs(rho.values[i]);
    if (rho.time(i) >= t_min && a >= std::abs(rho.values[i - 1]) && a >= std::abs(rho.values[i + 1]) && a > floor * mx)
      t.push_back(rho.time(i)), y.push_back(a);
  }
  return {t, y};
}

inline void run_landau_damping(const ExperimentConfig& cfg, ExperimentResult& res) {
  res.stage = "collision fields";
  auto cf = compute_sigma(cfg.grid());
  DirectOptions opt;
  opt.propagation = cfg.propagation;
  opt.propagation.model = cfg.model;

  struct Point {
    Mode k;
    double nu;
    DensitySolution sol;
  };
  std::vector<Point> pts;
  for (const auto& k : cfg.modes)
    for (double nu : cfg.nus) pts.push_back({k, nu, {}});
  res.stage = "direct coupled solve";
  detail::parallel_for(pts.size(), cfg.threads, [&](std::size_t i) {
    pts[i].sol = linear_vpl_mode(sqrt_maxwellian(cf.grid, pts[i].k), pts[i].k, pts[i].nu, cfg.T, cfg.dt, cf, opt);
  });

  res.stage = "envelope";
  Table series{"density",
               {{"k1", "mode component 1"}, {"k2", "mode component 2"}, {"k3", "mode component 3"},
                {"nu", "collisionality"}, {"t", "time"}, {"rho_re", "Re rho_k(t)"}, {"rho_im", "Im rho_k(t)"}},
               {}};
  json list = json::array();
  const double t_check = std::min(12.0, cfg.T);
  for (const auto& p : pts) {
    const auto& r = p.sol.rho;
    double mx = 0.0, late = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      series.add({double(p.k[0]), double(p.k[1]), double(p.k[2]), p.nu, r.time(i), r.values[i].real(),
                  r.values[i].imag()});
      mx = std::max(mx, std::abs(r.values[i]));
      if (r.time(i) >= t_check - 1e-12) late = std::max(late, std::abs(r.values[i]));
    }
    auto [pt, py] = envelope_peaks(r, 1.0, 1e-10);
    const double exponent = pt.size() >= 2 ? -log_log_slope(pt, py) : 0.0;
    const std::string tag = "k = " + detail::format_modes({p.k}) + ", nu = " + detail::num(p.nu);
    list.push_back({{"k", detail::mode_json(p.k)}, {"nu", p.nu}, {"max_abs_rho", mx},
                    {"late_ratio", late / mx}, {"envelope_exponent", exponent}, {"peaks", pt.size()}});
    res.check("damping below 1e-3 of max by t = " + detail::num(t_check) + ", " + tag, late <= 1e-3 * mx,
              "sup_{t >= " + detail::num(t_check) + "} |rho| / max |rho| = " + detail::sci(late / mx));
    res.check("envelope power-law exponent >= 3, " + tag, pt.size() >= 2 && exponent >= 3.0,
              "fitted exponent " + detail::num(exponent) + " over " + std::to_string(pt.size()) + " peaks");
  }
  res.tables.push_back(std::move(series));
  res.report["runs"] = list;
}

// ---------------------------------------------------------------------------
// Enhanced dissipation
// ---------------------------------------------------------------------------

inline void run_enhanced_dissipation(const ExperimentConfig& cfg, ExperimentResult& res) {
  res.stage = "collision fields";
  auto cf = compute_sigma(cfg.grid());
  struct Point {
    Mode k;
    double nu;
    double dt, T;
    Trajectory tr;
    double efold = 0.0;
  };
  std::vector<Point> pts;
  for (const auto& k : cfg.modes)
    for (double nu : cfg.nus) {
      if (nu <= 0.0) throw ConfigError("enhanced-dissipation needs nu > 0");
      const bool homogeneous = mode_norm2(k) == 0.0;
      double dt = homogeneous ? cfg.nu_dt / nu : cfg.dt;
      double T = homogeneous ? cfg.horizon / nu : cfg.horizon * std::pow(nu, -1.0 / 3.0);
      T = std::ceil(T / dt - 1e-9) * dt;
      pts.push_back({k, nu, dt, T, {}, 0.0});
    }
  res.stage = "evolution";
  detail::parallel_for(pts.size(), cfg.threads, [&](std::size_t i) {
    auto& p = pts[i];
    const bool homogeneous = mode_norm2(p.k) == 0.0;
    auto h0 = homogeneous ? detail::shear_maxwellian(cf.grid, p.k) : detail::tilted_maxwellian(cf.grid, p.k);
    EvolutionConfig c;
    c.k = p.k;
    c.nu = p.nu;
    c.T = p.T;
    c.dt = p.dt;
    c.model = cfg.model;
    c.snapshot_stride = 0;
    c.stop_norm_ratio = cfg.stop_ratio;
    p.tr = evolve_mode(h0, c, cf);
    std::vector<double> y(p.tr.norm_l2);
    for (auto& v : y) v /= p.tr.norm_l2.front();
    p.efold = crossing_time(p.tr.times, y, std::exp(-1.0));
  });

  res.stage = "scaling fits";
  Table norms{"norm_decay",
              {{"k1", "mode component 1"}, {"k2", "mode component 2"}, {"k3", "mode component 3"},
               {"nu", "collisionality"}, {"t", "time"}, {"norm_ratio", "||h(t)|| / ||h(0)||"}},
              {}};
  Table efold{"efold_times",
              {{"k1", "mode component 1"}, {"k2", "mode component 2"}, {"k3", "mode component 3"},
               {"nu", "collisionality"}, {"efold", "first time with ||h|| <= e^{-1} ||h(0)||"}},
              {}};
  for (const auto& p : pts) {
    for (std::size_t i = 0; i < p.tr.times.size(); ++i)
      norms.add({double(p.k[0]), double(p.k[1]), double(p.k[2]), p.nu, p.tr.times[i],
                 p.tr.norm_l2[i] / p.tr.norm_l2.front()});
    efold.add({double(p.k[0]), double(p.k[1]), double(p.k[2]), p.nu, p.efold});
  }
  res.tables.push_back(std::move(norms));
  res.tables.push_back(std::move(efold));
  json fits = json::array();
  for (const auto& k : cfg.modes) {
    std::vector<double> xs, ys;
    for (const auto& p : pts)
      if (p.k == k) xs.push_back(p.nu), ys.push_back(p.efold);
    if (xs.size() < 2) continue;
    const double a = -log_log_slope(xs, ys);
    const bool homogeneous = mode_norm2(k) == 0.0;
    const double lo = homogeneous ? 0.9 : 0.28, hi = homogeneous ? 1.1 : 0.38;
    fits.push_back({{"k", detail::mode_json(k)}, {"exponent", a}, {"efold", ys}, {"nu", xs}});
    res.check("e-folding time ~ nu^{-a}, k = " + detail::format_modes({k}), a >= lo && a <= hi,
              "a = " + detail::num(a) + " (range [" + detail::num(lo) + ", " + detail::num(hi) + "])");
  }
  res.report["fits"] = fits;
}

// ---------------------------------------------------------------------------
// Hypocoercivity monitor
// ---------------------------------------------------------------------------

inline EnergyParams energy_params_from(const ExperimentConfig& cfg, double nu) {
  EnergyParams p;
  p.A0 = cfg.A0;
  p.nu = nu;
  p.ell_star = cfg.weight.ell;
  p.theta = cfg.weight.theta;
  p.q = cfg.weight.q;
  p.n_max = cfg.n_max;
  p.phi = cfg.phi;
  return p;
}

inline void run_hypocoercivity(const ExperimentConfig& cfg, ExperimentResult& res) {
  res.stage = "collision fields";
  auto cf = compute_sigma(cfg.grid());
  struct Point {
    Mode k;
    double nu;
    Trajectory tr;
    HypocoercivityReport rep;
  };
  std::vector<Point> pts;
  for (const auto& k : cfg.modes)
    for (double nu : cfg.nus) pts.push_back({k, nu, {}, {}});

  res.stage = "energy parameter probes";
  for (const auto& k : cfg.modes)
    (void)validate_energy_params(energy_params_from(cfg, cfg.nus.front()), cf.grid, k, cfg.seed, cfg.probes);

  res.stage = "evolution";
  detail::parallel_for(pts.size(), cfg.threads, [&](std::size_t i) {
    auto& p = pts[i];
    const auto params = energy_params_from(cfg, p.nu);
    EvolutionConfig c;
    c.k = p.k;
    c.nu = p.nu;
    c.T = cfg.T;
    c.dt = cfg.dt;
    c.model = cfg.model;
    c.snapshot_stride = 0;
    c.functionals = energy_functionals(p.k, params, cf);
    p.tr = evolve_mode(detail::tilted_maxwellian(cf.grid, p.k), c, cf);
    p.rep = hypocoercivity_monitor(p.tr, params);
  });

  res.stage = "monitor";
  Table series{"energy_dissipation",
               {{"k1", "mode component 1"}, {"k2", "mode component 2"}, {"k3", "mode component 3"},
                {"nu", "collisionality"}, {"t", "time"}, {"energy", "hypocoercive energy E(h(t))"},
                {"dissipation", "hypocoercive dissipation D(h(t))"}},
               {}};
  Table theta{"theta_hat",
              {{"k1", "mode component 1"}, {"k2", "mode component 2"}, {"k3", "mode component 3"},
               {"nu", "collisionality"}, {"theta_hat", "largest theta with dE/dt + theta nu^{1/3} D <= tol"},
               {"binding_time", "sample time where theta_hat binds"}},
              {}};
  json list = json::array();
  double tmin = std::numeric_limits<double>::infinity(), tmax = 0.0;
  bool all_positive = true;
  for (const auto& p : pts) {
    for (std::size_t i = 0; i < p.tr.times.size(); ++i)
      series.add({double(p.k[0]), double(p.k[1]), double(p.k[2]), p.nu, p.tr.times[i], p.tr.energy[i],
                  p.tr.dissipation[i]});
    theta.add({double(p.k[0]), double(p.k[1]), double(p.k[2]), p.nu, p.rep.theta_hat, p.rep.binding_time});
    json item = {{"theta_hat", p.rep.unconstrained ? json("no dissipation demanded") : json(p.rep.theta_hat)},
                 {"binding_time", p.rep.binding_time},
                 {"A0", cfg.A0},
                 {"nu", p.nu},
                 {"k", detail::mode_json(p.k)},
                 {"selector", {{"ell_star", cfg.weight.ell}, {"theta", cfg.weight.theta}, {"q", cfg.weight.q}}}};
    list.push_back(item);
    if (!p.rep.unconstrained) {
      all_positive = all_positive && p.rep.theta_hat > 0.0;
      tmin = std::min(tmin, p.rep.theta_hat);
      tmax = std::max(tmax, p.rep.theta_hat);
    }
  }
  res.tables.push_back(std::move(series));
  res.tables.push_back(std::move(theta));
  res.report["runs"] = list;
  std::string values;
  for (const auto& p : pts) values += (values.empty() ? "" : ", ") + detail::num(p.rep.theta_hat);
  res.check("theta_hat > 0 on every run", all_positive, "theta_hat = " + values);
  const double spread = tmax > 0.0 ? (tmax - tmin) / tmax : 1.0;
  res.report["theta_spread"] = spread;
  res.check("theta_hat varies by < 50% across the sweep", spread < 0.5,
            "(max - min) / max = " + detail::num(spread));
}

// ---------------------------------------------------------------------------
// Strain-Guo lemmas
// ---------------------------------------------------------------------------

inline json strain_guo_json(const StrainGuoReport& r) {
  return {{"evaluated", r.evaluated}, {"refusal", r.refusal}, {"C", r.C},
          {"hypothesis_residual", r.hypothesis_residual}, {"C_bound", r.C_bound},
          {"binding_time", r.binding_time}, {"holds", r.holds}};
}

inline void run_strain_guo(const ExperimentConfig& cfg, ExperimentResult& res) {
  res.stage = "closed-form construct";
  std::vector<double> times;
  const double dts = 0.05;
  for (int i = 0; i * dts <= 20.0 / cfg.sg_c + 1e-12; ++i) times.push_back(i * dts);
  auto in = strain_guo_construct(cfg.sg_c, cfg.sg_m, cfg.sg_q, cfg.sg_p, cfg.sg_a, times, cfg.sg_b);
  auto sg = strain_guo_check(in);
  auto poly_in = in;
  poly_in.moment_bound = in.poly_moment.front();
  auto poly = strain_guo_poly_check(poly_in);
  Table construct{"strain_guo_construct",
                  {{"t", "time"}, {"g2", "int g^2"}, {"g2_weighted", "int <v>^{-m} g^2"},
                   {"gaussian_moment", "int e^{q|v|^2} g^2"}, {"poly_moment", "int <v>^{4m} g^2"},
                   {"poly_bound", "(3^5 pi/2 + 1) C0 <c t>^{-3}"}},
                  {}};
  const double pb = std::pow(3.0, 5) * pi / 2.0 + 1.0;
  bool poly_every = true;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double bound = pb * poly_in.moment_bound * std::pow(1.0 + std::pow(cfg.sg_c * times[i], 2), -1.5);
    poly_every = poly_every && in.g2[i] <= bound;
    construct.add({times[i], in.g2[i], in.g2_weighted[i], in.gaussian_moment[i], in.poly_moment[i], bound});
  }
  res.tables.push_back(std::move(construct));
  res.report["construct"] = strain_guo_json(sg);
  res.report["construct_poly"] = strain_guo_json(poly);
  res.check("Strain-Guo construct: hypotheses hold and C is finite", sg.evaluated && std::isfinite(sg.C),
            sg.evaluated ? "C = " + detail::num(sg.C) + " (lemma constant " + detail::num(sg.C_bound) +
                               "), residual " + detail::sci(sg.hypothesis_residual)
                         : "refused: " + sg.refusal);
  res.check("Strain-Guo poly bound at every sample", poly.evaluated && poly_every,
            poly.evaluated ? "max int g^2 <ct>^3 / C0 = " + detail::num(poly.C) + " (bound " + detail::num(pb) + ")"
                           : "refused: " + poly.refusal);

  res.stage = "trajectory check";
  auto cf = compute_sigma(cfg.grid());
  const Mode k = cfg.modes.front();
  const double nu = cfg.nus.front();
  EvolutionConfig c;
  c.k = k;
  c.nu = nu;
  c.T = cfg.T;
  c.dt = cfg.dt;
  c.model = cfg.model;
  c.snapshot_stride = 2;
  c.max_snapshots = 100000;
  auto tr = evolve_mode(random_smooth_field(cf.grid, cfg.seed, 0, true, k), c, cf);
  Table traj{"strain_guo_trajectory",
             {{"m", "weight loss exponent"}, {"stride", "snapshot subsampling"}, {"c", "measured decay constant"},
              {"C", "conclusion constant"}, {"residual", "hypothesis residual"}},
             {}};
  json tlist = json::array();
  for (double m : {1.0, 4.0}) {
    std::vector<double> C;
    for (int stride : {1, 2}) {
      std::vector<double> t;
      std::vector<ModeField> s;
      for (std::size_t i = 0; i < tr.snapshots.size(); i += std::size_t(stride))
        t.push_back(tr.snapshot_times[i]), s.push_back(tr.snapshots[i]);
      auto tin = strain_guo_from_snapshots(t, s, m, cfg.sg_q, cfg.sg_p, cfg.sg_b);
      auto r = strain_guo_check(tin);
      traj.add({m, double(stride), tin.c, r.evaluated ? r.C : std::nan(""), r.hypothesis_residual});
      tlist.push_back({{"m", m}, {"stride", stride}, {"c", tin.c}, {"report", strain_guo_json(r)}});
      C.push_back(r.evaluated ? r.C : std::nan(""));
    }
    const double drift = std::abs(C[0] - C[1]) / std::abs(C[0]);
    res.check("Strain-Guo on a collisional trajectory, m = " + detail::num(m),
              std::isfinite(C[0]) && std::isfinite(C[1]) && drift <= 0.05,
              "C = " + detail::num(C[0]) + ", snapshot-halving drift " + detail::sci(drift) + " (limit 5%)");
  }
  res.tables.push_back(std::move(traj));
  res.report["trajectory"] = tlist;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/** @brief Run the configured experiment; `res.stage` names the stage on failure. */
inline void run_experiment(const ExperimentConfig& cfg, ExperimentResult& res) {
  res.experiment = cfg.experiment;
  const auto& e = cfg.experiment;
  if (e == "operator-selftest") {
    run_operator_checks(cfg, res);
    return run_sigma_checks(cfg, res);
  }
  if (e == "kernel-convergence") return run_kernel_convergence(cfg, res);
  if (e == "penrose-scan") return run_penrose_scan(cfg, res);
  if (e == "landau-damping") return run_landau_damping(cfg, res);
  if (e == "enhanced-dissipation") return run_enhanced_dissipation(cfg, res);
  if (e == "hypocoercivity") return run_hypocoercivity(cfg, res);
  if (e == "strain-guo") return run_strain_guo(cfg, res);
  throw ConfigError("unknown experiment '" + e + "'");
}

// ---------------------------------------------------------------------------
// Cross-route and manufactured checks used by the acceptance driver
// ---------------------------------------------------------------------------

/** @brief Density from the three routes on a common grid, with pairwise errors. */
struct ThreeWayReport {
  TimeSeries volterra, resolvent, direct;
  double volterra_resolvent = 0.0, volterra_direct = 0.0, resolvent_direct = 0.0;
  double min_denominator = 0.0;
  double max() const { return std::max({volterra_resolvent, volterra_direct, resolvent_direct}); }
};

/**
 * @brief Direct coupled solve vs the Volterra and resolvent routes for data
 * f0 on mode k. Kernel and source are spline-refined by `refine` before the
 * integral-equation solves; comparison is on the coarse grid.
 */
inline ThreeWayReport three_way_density(const ModeField& f0, const Mode& k, double nu, double T, double dt,
                                        const CollisionFields& cf, int refine, double dtau, double guard,
                                        const PropagationOptions& opt = {}) {
  auto K = compute_kernel(k, nu, T, dt, cf, opt);
  auto N = source_from_data(f0, nullptr, k, nu, T, dt, cf, opt);
  KernelSeries Kf = K;
  Kf.series = resample(K.series, refine);
  auto Nf = resample(N, refine);
  ThreeWayReport r;
  r.volterra = detail::subsample(solve_volterra(Kf, Nf).rho, refine);
  auto G = resolvent_kernel(Kf, pi / Kf.series.dt, dtau, guard);
  r.min_denominator = G.min_denominator;
  r.resolvent = detail::subsample(resolvent_solution(G.G, Nf).rho, refine);
  DirectOptions d;
  d.propagation = opt;
  r.direct = linear_vpl_mode(f0, k, nu, T, dt, cf, d).rho;
  r.volterra_resolvent = relative_linf(r.volterra, r.resolvent);
  r.volterra_direct = relative_linf(r.volterra, r.direct);
  r.resolvent_direct = relative_linf(r.resolvent, r.direct);
  return r;
}

/** @brief Manufactured-solution check of the Volterra solver. */
struct ManufacturedReport {
  double discrete_error = 0.0;       // rho* recovered from N := rho* + K * rho* (same quadrature)
  std::vector<double> dts, errors;   // continuous N: error against rho* at each dt
  double order = 0.0;                // Richardson order from the successive differences
};

/**
 * @brief Kernel K(t) = pi^{3/2} t e^{-t^2/4}, solution rho*(t) = e^{-t} cos t.
 * The discrete test builds N by the solver's trapezoid convolution; the order
 * test uses N from the exact convolution (Gauss-Kronrod) and estimates the order
 * from solutions at dt, dt/2, dt/4.
 */
inline ManufacturedReport manufactured_volterra(double T = 10.0, double dt = 0.02) {
  const Mode k{1, 0, 0};
  auto Kf = [&](double t) { return analytic_kernel_vp(k, t); };
  auto rho = [](double t) { return std::exp(-t) * std::cos(t); };
  ManufacturedReport r;
  {
    auto K = sample_series(Kf, T, dt);
    auto R = sample_series(rho, T, dt);
    auto conv = trapezoid_convolution(K, R);
    TimeSeries N = R;
    for (std::size_t i = 0; i < N.size(); ++i) N.values[i] += conv.values[i];
    auto sol = solve_volterra(K, N);
    r.discrete_error = relative_linf(sol.rho, R);
  }
  using boost::math::quadrature::gauss_kronrod;
  auto Nexact = [&](double t) {
    if (t == 0.0) return rho(0.0);
    return rho(t) + gauss_kronrod<double, 61>::integrate([&](double s) { return Kf(t - s) * rho(s); }, 0.0, t, 15,
                                                         1e-14);
  };
  std::vector<TimeSeries> sols;
  for (int level = 0; level < 3; ++level) {
    const double h = dt * std::pow(0.5, level) * 5.0;
    auto K = sample_series(Kf, T, h);
    auto N = sample_series(Nexact, T, h);
    sols.push_back(solve_volterra(K, N).rho);
    r.dts.push_back(h);
    r.errors.push_back(relative_linf(sols.back(), sample_series(rho, T, h)));
  }
  const double d1 = relative_linf(detail::subsample(sols[1], 2), detail::subsample(sols[2], 4));
  const double d0 = relative_linf(sols[0], detail::subsample(sols[1], 2));
  r.order = std::log2(d0 / d1);
  return r;
}

}  // namespace vpl
