#include <gtest/gtest.h>

#include <sys/wait.h>

#include "vpl/outputs.hpp"

using namespace vpl;

namespace {

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr
};

/** @brief Run the vpl binary with arguments (shell-quoted by the caller). */
Run vpl_cli(const std::string& args) {
  const std::string cmd = std::string(VPL_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) r.output.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("vpl_cli_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

const std::string small = " --set grid.n=16";

}  // namespace

TEST(Config, MinimalFileTakesDefaults) {
  auto c = validate_config("[experiment]\nname = landau-damping\n");
  auto d = experiment_defaults("landau-damping");
  EXPECT_EQ(canonical_config(c), canonical_config(d));
  EXPECT_EQ(c.modes.size(), 1u);
  EXPECT_EQ(c.modes[0], (Mode{2, 0, 0}));
  EXPECT_EQ(validate_config("", "landau-damping").experiment, "landau-damping");
}

TEST(Config, SettingsAndComments) {
  auto c = validate_config(
      "# comment\n[experiment]\nname = hypocoercivity\n\n[physics]\n; full-line comment\nnu = 1e-2, 1e-3 # trailing\nmodes = 1,0,0; 0,1,0\n"
      "[time]\nT = 4\ndt = 0.1\n");
  ASSERT_EQ(c.nus.size(), 2u);
  EXPECT_EQ(c.nus[1], 1e-3);
  ASSERT_EQ(c.modes.size(), 2u);
  EXPECT_EQ(c.modes[1], (Mode{0, 1, 0}));
  EXPECT_EQ(c.T, 4.0);
}

TEST(Config, UnknownKeyNamesKeyAndLine) {
  try {
    (void)validate_config("[experiment]\nname = penrose-scan\n[grid]\nbogus = 3\n");
    FAIL() << "expected a configuration error";
  } catch (const ConfigError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("line 4"), std::string::npos) << m;
    EXPECT_NE(m.find("grid.bogus"), std::string::npos) << m;
  }
}

TEST(Config, MalformedInputIsRejected) {
  EXPECT_THROW(validate_config("[grid\n", "penrose-scan"), ConfigError);
  EXPECT_THROW(validate_config("n = 3\n", "penrose-scan"), ConfigError);
  EXPECT_THROW(validate_config("[grid]\nn\n", "penrose-scan"), ConfigError);
  EXPECT_THROW(validate_config("[grid]\nn = abc\n", "penrose-scan"), ConfigError);
  EXPECT_THROW(validate_config("[grid]\nn = 31\n", "penrose-scan"), ConfigError);
  EXPECT_THROW(validate_config(""), ConfigError);
  EXPECT_THROW(validate_config("[experiment]\nname = nonsense\n"), ConfigError);
  EXPECT_THROW(validate_config("[experiment]\nname = strain-guo\n", "penrose-scan"), ConfigError);
  EXPECT_THROW(validate_config("", "penrose-scan", {"experiment.name=strain-guo"}), ConfigError);
  EXPECT_THROW(validate_config("", "penrose-scan", {"grid.n"}), ConfigError);
}

TEST(Config, OverflowGuardPropagates) {
  try {
    (void)validate_config("[grid]\nhalf_width = 10\n[weight]\ntheta = 2\nq = 0.9\n", "hypocoercivity");
    FAIL() << "expected the overflow guard";
  } catch (const ConfigError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("weight"), std::string::npos) << m;
    EXPECT_NE(m.find("overflow guard"), std::string::npos) << m;
  }
}

TEST(Config, OverridesAndHash) {
  auto a = validate_config("", "landau-damping");
  auto b = validate_config("", "landau-damping", {"time.T = 15", "grid.n=32"});
  EXPECT_EQ(inputs_hash(a), inputs_hash(b));  // the same values as the defaults
  auto c = validate_config("", "landau-damping", {"time.T=10"});
  EXPECT_EQ(c.T, 10.0);
  EXPECT_NE(inputs_hash(a), inputs_hash(c));
  EXPECT_EQ(inputs_hash(a).size(), 16u);
  // Every key round-trips through its canonical text.
  auto text = canonical_config(c);
  std::vector<std::string> sets;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (line.rfind("experiment.name", 0) != 0) sets.push_back(line);
  EXPECT_EQ(canonical_config(validate_config("", "landau-damping", sets)), text);
}

TEST(Cli, RunWritesArtifactsAndChecks) {
  auto dir = scratch("run");
  auto r = vpl_cli("landau-damping --out " + dir.string() + small);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("PASS"), std::string::npos);
  auto m = json::parse(read_file(dir / "manifest.json"));
  EXPECT_EQ(m["experiment"], "landau-damping");
  EXPECT_EQ(m["status"], "pass");

  auto chk = vpl_cli("landau-damping --check --out " + dir.string() + small);
  EXPECT_EQ(chk.code, 0) << chk.output;
  EXPECT_NE(chk.output.find("stored outputs match"), std::string::npos);

  // Tamper with one stored value.
  auto csv = read_file(dir / "density.csv");
  auto line2 = csv.find('\n', csv.find('\n') + 1);
  auto comma = csv.rfind(',', line2);
  csv.replace(comma + 1, line2 - comma - 1, "123.5");
  write_file_atomic(dir / "density.csv", csv);
  auto bad = vpl_cli("landau-damping --check --out " + dir.string() + small);
  EXPECT_EQ(bad.code, 1) << bad.output;
  EXPECT_NE(bad.output.find("MISMATCH"), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(Cli, RunsAreDeterministic) {
  auto a = scratch("det_a"), b = scratch("det_b");
  ASSERT_EQ(vpl_cli("landau-damping --out " + a.string() + small).code, 0);
  ASSERT_EQ(vpl_cli("landau-damping --out " + b.string() + small).code, 0);
  EXPECT_EQ(read_file(a / "density.csv"), read_file(b / "density.csv"));
  EXPECT_EQ(read_file(a / "report.json"), read_file(b / "report.json"));
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  auto dir = scratch("cfg");
  write_file_atomic(dir / "bad.ini", "[experiment]\nname = landau-damping\n[grid]\nbogus = 1\n");
  auto r = vpl_cli("landau-damping --config " + (dir / "bad.ini").string() + " --out " + (dir / "o").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("line 4"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("grid.bogus"), std::string::npos) << r.output;
  EXPECT_FALSE(std::filesystem::exists(dir / "o" / "manifest.json"));

  auto g = vpl_cli("hypocoercivity --set grid.half_width=10 --set weight.theta=2 --set weight.q=0.9 --out " +
                   (dir / "o").string());
  EXPECT_EQ(g.code, 2);
  EXPECT_NE(g.output.find("overflow guard"), std::string::npos) << g.output;

  EXPECT_EQ(vpl_cli("no-such-experiment").code, 2);
  EXPECT_EQ(vpl_cli("landau-damping --config /nonexistent.ini").code, 2);
  std::filesystem::remove_all(dir);
}

TEST(Cli, NumericalFailureIsRecorded) {
  // An extremely stiff collision step defeats the implicit solve: exit 3 with a partial manifest.
  auto dir = scratch("num");
  auto r = vpl_cli("landau-damping --out " + dir.string() +
                   small + " --set physics.nu=1e6 --set physics.model=fokker-planck");
  EXPECT_EQ(r.code, 3) << r.output;
  auto m = json::parse(read_file(dir / "manifest.json"));
  EXPECT_EQ(m["status"], "numerical-failure");
  EXPECT_EQ(m["partial"], true);
  EXPECT_FALSE(m["failed_stage"].get<std::string>().empty());
  EXPECT_NE(m["error"].get<std::string>().find("did not converge"), std::string::npos);
  std::filesystem::remove_all(dir);
}
