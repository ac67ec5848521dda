#pragma once

// Experiment configuration: an INI-style text format ("[section]" headers and
// "key = value" lines, '#' or ';' comments) with per-experiment defaults,
// strict key validation and a --set override channel.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vpl/density.hpp"
#include "vpl/grid.hpp"

namespace vpl {

/** @brief The named experiments. */
inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"penrose-scan",         "kernel-convergence", "landau-damping",
                                              "enhanced-dissipation", "hypocoercivity",     "strain-guo",
                                              "operator-selftest"};
  return names;
}

/** @brief All parameters of one experiment run. */
struct ExperimentConfig {
  std::string experiment;

  // [grid]
  double half_width = 6.0;
  int n = 32;
  std::vector<int> floor_grids{24, 32, 48};  // operator-selftest: null-space floor refinement

  // [physics]
  std::vector<Mode> modes{{1, 0, 0}};
  std::vector<double> nus{1e-3};
  CollisionModel model = CollisionModel::landau;

  // [time]
  double T = 20.0;
  double dt = 0.05;

  // [weight]
  WeightSpec weight{};

  // [energy]
  double A0 = 16.0;
  int n_max = 9;
  double phi = 0.0;
  int probes = 1000;

  // [density]
  PropagationOptions propagation{};
  int refine = 20;
  double dtau = 0.01;
  double guard = 0.02;

  // [penrose]
  double tau_max = 10.0;
  double tau_spacing = 0.02;

  // [kernel]
  double window = 5.0;  // sup-window of the nu-continuity difference

  // [enhanced]
  double horizon = 12.0;     // k != 0 runs end at horizon * nu^{-1/3}; k = 0 runs at horizon / nu
  double nu_dt = 0.01;       // k = 0 runs use dt = nu_dt / nu
  double stop_ratio = 0.3;   // runs stop once ||h|| falls below this fraction

  // [strain_guo]
  double sg_c = 1.0, sg_m = 1.0, sg_q = 0.5, sg_p = 0.2, sg_a = 1.0, sg_b = 1.0;

  // [run]
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = "out";

  VelocityGrid grid() const { return build_grid(half_width, n); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + s + "'");
  }
  if (pos != s.size()) throw ConfigError("expected a number, got '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError("expected an integer, got '" + s + "'");
  }
  if (pos != s.size()) throw ConfigError("expected an integer, got '" + s + "'");
  return v;
}

inline std::string join_doubles(const std::vector<double>& v) {
  std::ostringstream ss;
  ss << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) ss << (i ? ", " : "") << v[i];
  return ss.str();
}

inline std::string fmt(double x) {
  std::ostringstream ss;
  ss << std::setprecision(17) << x;
  return ss.str();
}

/** @brief Mode list "1,0,0; 2,0,0". */
inline std::vector<Mode> parse_modes(const std::string& s) {
  std::vector<Mode> out;
  for (const auto& m : split(s, ';')) {
    auto c = split(m, ',');
    if (c.size() != 3) throw ConfigError("a mode needs three integer components, got '" + m + "'");
    out.push_back({int(parse_int(c[0])), int(parse_int(c[1])), int(parse_int(c[2]))});
  }
  if (out.empty()) throw ConfigError("mode list is empty");
  return out;
}

inline std::string format_modes(const std::vector<Mode>& ms) {
  std::string s;
  for (std::size_t i = 0; i < ms.size(); ++i)
    s += (i ? "; " : "") + std::to_string(ms[i][0]) + "," + std::to_string(ms[i][1]) + "," + std::to_string(ms[i][2]);
  return s;
}

/** @brief One documented configuration key. */
struct KeyDef {
  std::string name;  // section.key
  std::string doc;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

inline KeyDef real_key(std::string name, std::string doc, double ExperimentConfig::*m) {
  return {std::move(name), std::move(doc), [m](ExperimentConfig& c, const std::string& v) { c.*m = parse_double(v); },
          [m](const ExperimentConfig& c) { return fmt(c.*m); }};
}

inline KeyDef int_key(std::string name, std::string doc, int ExperimentConfig::*m) {
  return {std::move(name), std::move(doc), [m](ExperimentConfig& c, const std::string& v) { c.*m = int(parse_int(v)); },
          [m](const ExperimentConfig& c) { return std::to_string(c.*m); }};
}

}  // namespace detail

/** @brief The documented keys, in canonical order. */
inline const std::vector<detail::KeyDef>& config_keys() {
  using namespace detail;
  using C = ExperimentConfig;
  static const std::vector<KeyDef> keys{
      {"experiment.name", "experiment to run",
       [](C& c, const std::string& v) { c.experiment = v; }, [](const C& c) { return c.experiment; }},
      real_key("grid.half_width", "velocity box half-width L_v", &C::half_width),
      int_key("grid.n", "points per velocity axis", &C::n),
      {"grid.floor_grids", "grid sizes of the null-space floor refinement (operator-selftest)",
       [](C& c, const std::string& v) {
         c.floor_grids.clear();
         for (const auto& s : split(v, ',')) c.floor_grids.push_back(int(parse_int(s)));
       },
       [](const C& c) {
         std::string s;
         for (std::size_t i = 0; i < c.floor_grids.size(); ++i) s += (i ? ", " : "") + std::to_string(c.floor_grids[i]);
         return s;
       }},
      {"physics.modes", "spatial modes, ';'-separated integer triples",
       [](C& c, const std::string& v) { c.modes = parse_modes(v); }, [](const C& c) { return format_modes(c.modes); }},
      {"physics.nu", "collisionalities, ','-separated",
       [](C& c, const std::string& v) {
         c.nus.clear();
         for (const auto& s : split(v, ',')) c.nus.push_back(parse_double(s));
       },
       [](const C& c) { return join_doubles(c.nus); }},
      {"physics.model", "collision operator: landau or fokker-planck",
       [](C& c, const std::string& v) { c.model = parse_collision_model(v); },
       [](const C& c) { return to_string(c.model); }},
      real_key("time.T", "final time", &C::T),
      real_key("time.dt", "time step", &C::dt),
      {"weight.ell", "polynomial weight index", [](C& c, const std::string& v) { c.weight.ell = parse_double(v); },
       [](const C& c) { return fmt(c.weight.ell); }},
      {"weight.theta", "Gaussian weight exponent (0 or 2)",
       [](C& c, const std::string& v) { c.weight.theta = int(parse_int(v)); },
       [](const C& c) { return std::to_string(c.weight.theta); }},
      {"weight.q", "Gaussian weight rate", [](C& c, const std::string& v) { c.weight.q = parse_double(v); },
       [](const C& c) { return fmt(c.weight.q); }},
      real_key("energy.A0", "cross-term dominance constant", &C::A0),
      int_key("energy.n_max", "derivative budget (M = n_max + 30)", &C::n_max),
      real_key("energy.phi", "frozen scalar potential in the weight factor", &C::phi),
      int_key("energy.probes", "random probes of the positivity / operator checks", &C::probes),
      {"density.frame", "density propagation frame: folded or twisted",
       [](C& c, const std::string& v) { c.propagation.frame = parse_density_frame(v); },
       [](const C& c) { return to_string(c.propagation.frame); }},
      {"density.substeps", "kick/transport substeps per half step",
       [](C& c, const std::string& v) { c.propagation.substeps = int(parse_int(v)); },
       [](const C& c) { return std::to_string(c.propagation.substeps); }},
      {"density.cut_fraction", "velocity-Fourier cut as a fraction of pi/h",
       [](C& c, const std::string& v) { c.propagation.cut_fraction = parse_double(v); },
       [](const C& c) { return fmt(c.propagation.cut_fraction); }},
      int_key("density.refine", "spline refinement of kernel and source before the Volterra solve", &C::refine),
      real_key("density.dtau", "frequency spacing of the resolvent transform", &C::dtau),
      real_key("density.guard", "minimum |1 + L[K]| accepted by the resolvent", &C::guard),
      real_key("penrose.tau_max", "upper end of the Penrose frequency scan", &C::tau_max),
      real_key("penrose.tau_spacing", "Penrose frequency grid spacing", &C::tau_spacing),
      real_key("kernel.window", "sup-window of the kernel nu-continuity difference", &C::window),
      real_key("enhanced.horizon", "run length in units of nu^{-1/3} (k != 0) or 1/nu (k = 0)", &C::horizon),
      real_key("enhanced.nu_dt", "nu * dt for k = 0 runs", &C::nu_dt),
      real_key("enhanced.stop_ratio", "stop once ||h|| falls below this fraction of ||h0||", &C::stop_ratio),
      real_key("strain_guo.c", "decay constant c", &C::sg_c),
      real_key("strain_guo.m", "weight loss exponent m", &C::sg_m),
      real_key("strain_guo.q", "Gaussian moment rate q", &C::sg_q),
      real_key("strain_guo.p", "stretched-exponential rate p", &C::sg_p),
      real_key("strain_guo.a", "initial datum e^{-a|v|^2}", &C::sg_a),
      real_key("strain_guo.b", "dissipation constant b", &C::sg_b),
      {"run.seed", "seed of the random probes",
       [](C& c, const std::string& v) {
         auto s = parse_int(v);
         if (s < 0) throw ConfigError("seed must be non-negative");
         c.seed = std::uint64_t(s);
       },
       [](const C& c) { return std::to_string(c.seed); }},
      int_key("run.threads", "worker threads for sweep points", &C::threads),
      {"run.out", "output directory", [](C& c, const std::string& v) { c.out_dir = v; },
       [](const C& c) { return c.out_dir; }},
  };
  return keys;
}

/** @brief Documented defaults of the named experiment. */
inline ExperimentConfig experiment_defaults(const std::string& name) {
  if (std::find(experiment_names().begin(), experiment_names().end(), name) == experiment_names().end())
    throw ConfigError("unknown experiment '" + name + "'");
  ExperimentConfig c;
  c.experiment = name;
  if (name == "operator-selftest") {
    c.probes = 100;
  } else if (name == "kernel-convergence") {
    c.modes = {{1, 0, 0}, {2, 0, 0}};
    c.nus = {1e-2, 1e-3, 1e-4};
    c.T = 10.0;
  } else if (name == "penrose-scan") {
    c.modes = {{1, 0, 0}, {2, 0, 0}};
    c.nus = {0.0, 1e-3};
  } else if (name == "landau-damping") {
    c.modes = {{2, 0, 0}};
    c.nus = {0.0};
    c.T = 15.0;
  } else if (name == "enhanced-dissipation") {
    c.modes = {{1, 0, 0}, {0, 0, 0}};
    c.nus = {3e-3, 1e-3, 3e-4, 1e-4};
    c.dt = 0.1;
  } else if (name == "hypocoercivity") {
    c.nus = {3e-3, 1e-3, 3e-4};
    c.T = 12.0;
    c.dt = 0.1;
  } else if (name == "strain-guo") {
    c.T = 12.0;
    c.dt = 0.1;
  }
  return c;
}

/** @brief Cross-field validation; throws ConfigError naming the offending key. */
inline void check_config(const ExperimentConfig& c) {
  if (std::find(experiment_names().begin(), experiment_names().end(), c.experiment) == experiment_names().end())
    throw ConfigError("experiment.name: unknown experiment '" + c.experiment + "'");
  if (!(c.half_width > 0.0)) throw ConfigError("grid.half_width must be positive");
  if (c.n < 8 || c.n % 2) throw ConfigError("grid.n must be an even number >= 8");
  for (int m : c.floor_grids)
    if (m < 8 || m % 2) throw ConfigError("grid.floor_grids entries must be even numbers >= 8");
  for (double nu : c.nus)
    if (!(nu >= 0.0)) throw ConfigError("physics.nu entries must be non-negative");
  if (c.nus.empty()) throw ConfigError("physics.nu must list at least one value");
  if (!(c.dt > 0.0) || !(c.T > 0.0)) throw ConfigError("time.T and time.dt must be positive");
  try {
    (void)c.weight.validated(c.grid());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("weight: ") + e.what());
  }
  if (!(c.A0 > 0.25)) throw ConfigError("energy.A0 must exceed 1/4");
  if (c.n_max < 0) throw ConfigError("energy.n_max must be non-negative");
  if (c.probes < 1) throw ConfigError("energy.probes must be positive");
  if (c.propagation.substeps < 1) throw ConfigError("density.substeps must be positive");
  if (!(c.propagation.cut_fraction > 0.0 && c.propagation.cut_fraction <= 1.0))
    throw ConfigError("density.cut_fraction must lie in (0, 1]");
  if (c.refine < 1) throw ConfigError("density.refine must be positive");
  if (!(c.dtau > 0.0) || !(c.guard > 0.0)) throw ConfigError("density.dtau and density.guard must be positive");
  if (!(c.tau_max > 0.0) || !(c.tau_spacing > 0.0) || c.tau_spacing >= c.tau_max)
    throw ConfigError("penrose.tau_max and penrose.tau_spacing must be positive with spacing < tau_max");
  if (!(c.window > 0.0)) throw ConfigError("kernel.window must be positive");
  if (!(c.horizon > 0.0) || !(c.nu_dt > 0.0) || !(c.stop_ratio > 0.0 && c.stop_ratio < 1.0))
    throw ConfigError("enhanced.horizon and enhanced.nu_dt must be positive, enhanced.stop_ratio in (0, 1)");
  if (c.threads < 1) throw ConfigError("run.threads must be positive");
  if (c.out_dir.empty()) throw ConfigError("run.out must not be empty");
}

/** @brief Apply one "section.key = value" assignment; `where` prefixes diagnostics. */
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value,
                          const std::string& where) {
  const auto& keys = config_keys();
  auto it = std::find_if(keys.begin(), keys.end(), [&](const detail::KeyDef& k) { return k.name == key; });
  if (it == keys.end()) throw ConfigError(where + "unknown key '" + key + "'");
  try {
    it->set(c, value);
  } catch (const ConfigError& e) {
    throw ConfigError(where + key + ": " + e.what());
  }
}

namespace detail {

/** @brief Parse the text into ordered (key, value, line) triples. */
struct Assignment {
  std::string key, value;
  int line = 0;
};

inline std::vector<Assignment> parse_ini(const std::string& text) {
  std::vector<Assignment> out;
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    // '#' starts a comment anywhere; ';' only at the start of a line (it separates modes).
    auto s = trim(raw.substr(0, raw.find('#')));
    if (s.empty() || s.front() == ';') continue;
    const std::string where = "line " + std::to_string(line) + ": ";
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + "malformed section header '" + s + "'");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) throw ConfigError(where + "empty section name");
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value', got '" + s + "'");
    auto key = trim(s.substr(0, eq)), value = trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "missing key");
    if (section.empty()) throw ConfigError(where + "key '" + key + "' appears before any [section]");
    out.push_back({section + "." + key, value, line});
  }
  return out;
}

}  // namespace detail

/**
 * @brief Parse and validate configuration text. The experiment name comes from
 * [experiment] name, or from `experiment` when the text omits it (the CLI
 * subcommand); a mismatch between the two is an error. Unset keys take the
 * experiment's documented defaults.
 */
inline ExperimentConfig validate_config(const std::string& text, const std::string& experiment = "",
                                        const std::vector<std::string>& overrides = {}) {
  auto assignments = detail::parse_ini(text);
  std::string name = experiment;
  for (const auto& a : assignments)
    if (a.key == "experiment.name") {
      if (!experiment.empty() && a.value != experiment)
        throw ConfigError("line " + std::to_string(a.line) + ": experiment.name '" + a.value +
                          "' does not match the requested experiment '" + experiment + "'");
      name = a.value;
    }
  if (name.empty()) throw ConfigError("no experiment named (set [experiment] name)");
  ExperimentConfig c;
  try {
    c = experiment_defaults(name);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("experiment.name: ") + e.what());
  }
  for (const auto& a : assignments)
    apply_setting(c, a.key, a.value, "line " + std::to_string(a.line) + ": ");
  for (const auto& o : overrides) {
    auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set " + o + ": expected KEY=VALUE");
    auto key = detail::trim(o.substr(0, eq));
    if (key == "experiment.name") throw ConfigError("--set cannot change the experiment");
    apply_setting(c, key, detail::trim(o.substr(eq + 1)), "--set " + o + ": ");
  }
  check_config(c);
  return c;
}

/** @brief Canonical "key = value" text of every setting (input to the manifest hash). */
inline std::string canonical_config(const ExperimentConfig& c) {
  std::string s;
  for (const auto& k : config_keys()) s += k.name + " = " + k.get(c) + "\n";
  return s;
}

}  // namespace vpl
