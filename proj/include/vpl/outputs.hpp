#pragma once

// Experiment artifacts: one CSV per table, report.json, schema.json (every CSV
// column documented) and manifest.json (written last), plus re-validation of
// stored outputs against a fresh run.

#include <boost/version.hpp>
#include <filesystem>
#include <fftw3.h>

#include "vpl/experiments.hpp"
#include "vpl/io.hpp"

namespace vpl {

inline constexpr const char* artifact_version = "1.0.0";
/** @brief Relative tolerance of --check (per column, scaled by the column's max magnitude). */
inline constexpr double check_tolerance = 1e-6;

/** @brief CSV text of a table (header line, then one row per record). */
inline std::string table_csv(const Table& t) {
  std::string s;
  for (std::size_t c = 0; c < t.columns.size(); ++c) s += (c ? "," : "") + t.columns[c].first;
  s += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) s += (c ? "," : "") + format_double(row[c]);
    s += "\n";
  }
  return s;
}

/** @brief Parse CSV text produced by table_csv. */
inline Table parse_table_csv(const std::string& name, const std::string& text) {
  Table t;
  t.name = name;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(name + ".csv: empty file");
  for (const auto& c : detail::split(line, ',')) t.columns.push_back({c, ""});
  int ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(cell == "nan" || cell == "-nan" ? std::nan("") : detail::parse_double(cell));
      } catch (const ConfigError& e) {
        throw ConfigError(name + ".csv line " + std::to_string(ln) + ": " + e.what());
      }
    }
    if (row.size() != t.columns.size())
      throw ConfigError(name + ".csv line " + std::to_string(ln) + ": expected " + std::to_string(t.columns.size()) +
                        " fields");
    t.rows.push_back(std::move(row));
  }
  return t;
}

/** @brief FNV-1a hash of the canonical configuration, as 16 hex digits. */
inline std::string inputs_hash(const ExperimentConfig& cfg) {
  const auto text = canonical_config(cfg);
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << fnv1a(text.data(), text.size());
  return ss.str();
}

inline json versions_json() {
  return {{"vpl", artifact_version},
          {"fftw", std::string(fftw_version)},
          {"boost", BOOST_LIB_VERSION},
          {"compiler", __VERSION__}};
}

inline json schema_json(const ExperimentResult& res) {
  json s = {{"experiment", res.experiment}, {"check_tolerance", check_tolerance}, {"tables", json::object()}};
  for (const auto& t : res.tables) {
    json cols = json::array();
    for (const auto& [name, doc] : t.columns) cols.push_back({{"name", name}, {"description", doc}});
    s["tables"][t.name + ".csv"] = cols;
  }
  return s;
}

/** @brief Outcome status of a run as recorded in the manifest. */
enum class RunStatus { pass, invariant_failure, config_error, numerical_failure };

inline int exit_code(RunStatus s) {
  switch (s) {
    case RunStatus::pass: return 0;
    case RunStatus::invariant_failure: return 1;
    case RunStatus::config_error: return 2;
    case RunStatus::numerical_failure: return 3;
  }
  return 3;
}

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::pass: return "pass";
    case RunStatus::invariant_failure: return "invariant-failure";
    case RunStatus::config_error: return "config-error";
    case RunStatus::numerical_failure: return "numerical-failure";
  }
  return "unknown";
}

/**
 * @brief Write tables, report and schema atomically, then the manifest. With
 * `error` non-empty the run is flagged partial and the failing stage named.
 */
inline json write_outputs(const ExperimentConfig& cfg, const ExperimentResult& res, const std::filesystem::path& dir,
                          double wall_seconds, RunStatus status, const std::string& error = "") {
  std::filesystem::create_directories(dir);
  json files = json::array();
  for (const auto& t : res.tables) {
    write_file_atomic(dir / (t.name + ".csv"), table_csv(t));
    files.push_back(t.name + ".csv");
  }
  json report = res.report;
  json checks = json::array();
  for (const auto& c : res.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  report["checks"] = checks;
  write_file_atomic(dir / "report.json", report.dump(2) + "\n");
  write_file_atomic(dir / "schema.json", schema_json(res).dump(2) + "\n");
  files.push_back("report.json");
  files.push_back("schema.json");

  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ostringstream ts;
  ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
  json manifest = {{"experiment", cfg.experiment},
                   {"status", to_string(status)},
                   {"partial", !error.empty()},
                   {"inputs_hash", inputs_hash(cfg)},
                   {"config", canonical_config(cfg)},
                   {"versions", versions_json()},
                   {"finished_utc", ts.str()},
                   {"wall_time_s", wall_seconds},
                   {"outputs", files},
                   {"checks", checks}};
  if (!error.empty()) {
    manifest["failed_stage"] = res.stage;
    manifest["error"] = error;
  }
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

/** @brief Differences between stored CSVs in `dir` and a fresh result (empty when consistent). */
inline std::vector<std::string> compare_outputs(const ExperimentResult& fresh, const std::filesystem::path& dir) {
  std::vector<std::string> issues;
  for (const auto& t : fresh.tables) {
    const auto path = dir / (t.name + ".csv");
    if (!std::filesystem::exists(path)) {
      issues.push_back(t.name + ".csv: missing");
      continue;
    }
    Table stored = parse_table_csv(t.name, read_file(path));
    if (stored.columns.size() != t.columns.size()) {
      issues.push_back(t.name + ".csv: column count differs");
      continue;
    }
    for (std::size_t c = 0; c < t.columns.size(); ++c)
      if (stored.columns[c].first != t.columns[c].first) issues.push_back(t.name + ".csv: column " + t.columns[c].first + " renamed");
    if (stored.rows.size() != t.rows.size()) {
      issues.push_back(t.name + ".csv: row count " + std::to_string(stored.rows.size()) + " vs " +
                       std::to_string(t.rows.size()));
      continue;
    }
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      double scale = 0.0, worst = 0.0;
      for (const auto& row : t.rows) scale = std::max(scale, std::abs(row[c]));
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const double a = t.rows[r][c], b = stored.rows[r][c];
        if (std::isnan(a) && std::isnan(b)) continue;
        worst = std::max(worst, std::isnan(a) != std::isnan(b) ? INFINITY : std::abs(a - b));
      }
      if (worst > check_tolerance * std::max(scale, 1e-300))
        issues.push_back(t.name + ".csv: column " + t.columns[c].first + " differs by " + detail::sci(worst) +
                         " (scale " + detail::sci(scale) + ")");
    }
  }
  return issues;
}

}  // namespace vpl
