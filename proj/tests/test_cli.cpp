#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

// Runs the lab binary through the shell and captures combined output.
// `prefix` lets tests set environment variables for the child only.
CliResult run_cli(const std::string& args, const std::string& prefix = "") {
  const std::string cmd = prefix + std::string(EMERGENCE_CLI_BIN) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult res;
  std::array<char, 4096> buf;
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0)
    res.output.append(buf.data(), n);
  const int status = pclose(pipe);
  if (WIFEXITED(status)) res.exit_code = WEXITSTATUS(status);
  return res;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "emergence_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out.good());
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string shipped_config(const std::string& name) {
  return (fs::path(EMERGENCE_CONFIG_DIR) / name).string();
}

int count_occurrences(const std::string& text, const std::string& needle) {
  int count = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size()))
    ++count;
  return count;
}

// Free-fall drop of a small thermal chain: every md check on this path is
// exact up to roundoff, so the run is fast and robustly green.
std::string md_smoke_config(double dt = 1e-3, long n_steps = 500) {
  std::ostringstream ss;
  ss << R"({
  "body": {"n_atoms": 8, "atom_mass": 1.0, "dim": 1, "lattice_spacing": 0.5},
  "pair": {"type": "harmonic_spring", "stiffness": 5.0, "rest_length": 0.5},
  "external": {"type": "gravity", "g": 2.0},
  "scenario": {"type": "gravity_floor_drop", "temperature": 0.01,
               "cm_offset": [5.0], "cm_velocity": [0.0]},
  "integrator": {"dt": )"
     << dt << R"(, "n_steps": )" << n_steps << R"(, "record_stride": 10},
  "seed": 7,
  "output_dir": "out/md_smoke"
})";
  return ss.str();
}

// Small trapped chain ensemble, sized so a full run takes well under a
// second even with one worker.
std::string ensemble_smoke_config() {
  return R"({
  "body": {"n_atoms": 8, "atom_mass": 1.0, "dim": 1, "lattice_spacing": 0.3},
  "pair": {"type": "harmonic_spring", "stiffness": 5.0, "rest_length": 0.0},
  "external": {"type": "harmonic", "omega": 0.5},
  "scenario": {"type": "harmonic_trap", "temperature": 0.05,
               "cm_offset": [0.4], "cm_velocity": [0.1]},
  "integrator": {"dt": 1e-3, "n_steps": 400, "record_stride": 4},
  "ensemble": {"n_members": 16, "base_seed": 40, "sample_times": [0.2, 0.4],
               "n_blocks": 4},
  "seed": 9,
  "output_dir": "out/ensemble_smoke"
})";
}

}  // namespace

TEST_CASE("help exits zero and parse errors exit two") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("--help").output.find("check-coords") != std::string::npos);
  CHECK(run_cli("md --help").exit_code == 0);

  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("frobnicate").exit_code == 2);
  CHECK(run_cli("md").exit_code == 2);  // --config is required
  const fs::path dir = fresh_dir("parse_errors");
  write_file(dir / "ok.json", md_smoke_config());
  CHECK(run_cli("md --config " + (dir / "ok.json").string() + " --bogus").exit_code == 2);
  // --workers belongs to the ensemble subcommand only.
  CHECK(run_cli("md --config " + (dir / "ok.json").string() + " --workers 2").exit_code ==
        2);
}

TEST_CASE("broken configs exit two with a config error message") {
  const fs::path dir = fresh_dir("bad_configs");

  CliResult res = run_cli("md --config " + (dir / "missing.json").string());
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("config error") != std::string::npos);

  write_file(dir / "mangled.json", "{ this is not json");
  CHECK(run_cli("md --config " + (dir / "mangled.json").string()).exit_code == 2);

  std::string cfg = md_smoke_config();
  write_file(dir / "extra_key.json",
             "{\"surprise\": 1," + cfg.substr(cfg.find('{') + 1));
  res = run_cli("md --config " + (dir / "extra_key.json").string());
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("surprise") != std::string::npos);

  std::string one_atom = md_smoke_config();
  one_atom.replace(one_atom.find("\"n_atoms\": 8"), 12, "\"n_atoms\": 1");
  write_file(dir / "one_atom.json", one_atom);
  CHECK(run_cli("md --config " + (dir / "one_atom.json").string()).exit_code == 2);
}

TEST_CASE("check-coords passes and writes full-precision csv") {
  const fs::path dir = fresh_dir("coords");
  const CliResult res = run_cli("check-coords --config " +
                                shipped_config("coords_check.json") + " --out " +
                                (dir / "run").string());
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("[PASS] coefficient_row_sums") != std::string::npos);
  CHECK(res.output.find("[PASS] canonical_brackets") != std::string::npos);
  REQUIRE(fs::exists(dir / "run" / "coords_check.csv"));
  REQUIRE(fs::exists(dir / "run" / "summary.json"));

  const nlohmann::json summary =
      nlohmann::json::parse(read_file(dir / "run" / "summary.json"));
  CHECK(summary.at("command") == "check-coords");
  CHECK(summary.at("all_passed") == true);
  CHECK(summary.at("checks").size() == 5);
  const std::string hash = summary.at("config_hash");
  CHECK(hash.size() == 16);
  CHECK(hash.find_first_not_of("0123456789abcdef") == std::string::npos);

  // Every numeric cell must survive a parse/re-print round trip at 17
  // significant digits, i.e. values are written at full double precision.
  std::istringstream csv(read_file(dir / "run" / "coords_check.csv"));
  std::string line;
  std::getline(csv, line);  // header
  int cells = 0;
  while (std::getline(csv, line)) {
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) {
      const double v = std::strtod(cell.c_str(), nullptr);
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      CHECK(cell == buf);
      ++cells;
    }
  }
  CHECK(cells >= 30);
}

TEST_CASE("md run exits zero, reruns byte-identically, and honours --seed") {
  const fs::path dir = fresh_dir("md_smoke");
  write_file(dir / "cfg.json", md_smoke_config());
  const std::string base = "md --config " + (dir / "cfg.json").string() + " --out ";

  const CliResult first = run_cli(base + (dir / "a").string());
  CHECK(first.exit_code == 0);
  const nlohmann::json summary = nlohmann::json::parse(read_file(dir / "a" / "summary.json"));
  // stdout carries exactly one status line per recorded check.
  CHECK(count_occurrences(first.output, "[PASS]") ==
        static_cast<int>(summary.at("checks").size()));

  CHECK(run_cli(base + (dir / "b").string()).exit_code == 0);
  CHECK(read_file(dir / "a" / "trajectory.csv") == read_file(dir / "b" / "trajectory.csv"));
  CHECK(read_file(dir / "a" / "summary.json") == read_file(dir / "b" / "summary.json"));

  CHECK(run_cli(base + (dir / "s11").string() + " --seed 11").exit_code == 0);
  CHECK(run_cli(base + (dir / "s11b").string() + " --seed 11").exit_code == 0);
  CHECK(run_cli(base + (dir / "s12").string() + " --seed 12").exit_code == 0);
  CHECK(read_file(dir / "s11" / "trajectory.csv") ==
        read_file(dir / "s11b" / "trajectory.csv"));
  CHECK(read_file(dir / "s11" / "trajectory.csv") !=
        read_file(dir / "s12" / "trajectory.csv"));
}

TEST_CASE("md exit codes separate failed checks from numerical blow-ups") {
  const fs::path dir = fresh_dir("md_exit_codes");

  // Stable but sloppy step: integrates fine, energy drift check fails.
  std::string drifty = R"({
  "body": {"n_atoms": 8, "atom_mass": 1.0, "dim": 1, "lattice_spacing": 0.3},
  "pair": {"type": "harmonic_spring", "stiffness": 5.0, "rest_length": 0.0},
  "external": {"type": "harmonic", "omega": 0.5},
  "scenario": {"type": "harmonic_trap", "temperature": 0.05,
               "cm_offset": [0.4], "cm_velocity": [0.0]},
  "integrator": {"dt": 0.05, "n_steps": 4000, "record_stride": 10},
  "seed": 3,
  "output_dir": "out/drifty"
})";
  write_file(dir / "drifty.json", drifty);
  CliResult res =
      run_cli("md --config " + (dir / "drifty.json").string() + " --out " +
              (dir / "drifty").string());
  CHECK(res.exit_code == 4);
  CHECK(res.output.find("check failed: e_total_drift") != std::string::npos);
  CHECK(res.output.find("[FAIL] e_total_drift") != std::string::npos);

  // Unstable step: the integrator must report a numerical error instead.
  std::string unstable = drifty;
  unstable.replace(unstable.find("\"dt\": 0.05"), 10, "\"dt\": 1.0");
  write_file(dir / "unstable.json", unstable);
  res = run_cli("md --config " + (dir / "unstable.json").string() + " --out " +
                (dir / "unstable").string());
  CHECK(res.exit_code == 3);
  CHECK(res.output.find("numerical error") != std::string::npos);
}

TEST_CASE("quantum guard violations exit four and bad grids exit two") {
  const fs::path dir = fresh_dir("quantum_errors");

  std::string cfg = read_file(shipped_config("quantum_smoke.json"));
  // Park the packet against the box wall: the edge-amplitude guard fires.
  std::string walled = cfg;
  walled.replace(walled.find("\"x0\": 1.0"), 9, "\"x0\": 7.5");
  write_file(dir / "walled.json", walled);
  CliResult res = run_cli("quantum --config " + (dir / "walled.json").string() +
                          " --out " + (dir / "walled").string());
  CHECK(res.exit_code == 4);
  CHECK(res.output.find("guard") != std::string::npos);
  CHECK(res.output.find("along X") != std::string::npos);

  std::string bad_grid = cfg;
  bad_grid.replace(bad_grid.find("[64, 64]"), 8, "[100, 64]");
  write_file(dir / "bad_grid.json", bad_grid);
  CHECK(run_cli("quantum --config " + (dir / "bad_grid.json").string()).exit_code == 2);

  nlohmann::json lj = nlohmann::json::parse(cfg);
  lj["pair"] = {{"type", "lennard_jones_truncated"},
                {"epsilon", 0.1},
                {"sigma", 0.5},
                {"cutoff", 1.5}};
  write_file(dir / "lj.json", lj.dump(2));
  CHECK(run_cli("quantum --config " + (dir / "lj.json").string()).exit_code == 2);
}

TEST_CASE("quantum smoke config runs clean and writes the observable table") {
  const fs::path dir = fresh_dir("quantum_smoke");
  const CliResult res = run_cli("quantum --config " + shipped_config("quantum_smoke.json") +
                                " --out " + (dir / "run").string());
  CHECK(res.exit_code == 0);
  REQUIRE(fs::exists(dir / "run" / "quantum.csv"));
  std::istringstream csv(read_file(dir / "run" / "quantum.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header.find("purity") != std::string::npos);
  CHECK(header.find("expectation_gap") != std::string::npos);
  CHECK(res.output.find("[PASS] purity_stays_one") != std::string::npos);
}

TEST_CASE("ensemble outputs are identical across reruns and worker counts") {
  const fs::path dir = fresh_dir("ensemble_workers");
  write_file(dir / "cfg.json", ensemble_smoke_config());
  const std::string base = "ensemble --config " + (dir / "cfg.json").string();

  CHECK(run_cli(base + " --out " + (dir / "w1").string() + " --workers 1").exit_code == 0);
  CHECK(run_cli(base + " --out " + (dir / "w1b").string() + " --workers 1").exit_code == 0);
  CHECK(run_cli(base + " --out " + (dir / "w3").string() + " --workers 3").exit_code == 0);
  // No flag: worker count comes from EMERGENCE_LAB_WORKERS when set.
  CHECK(run_cli(base + " --out " + (dir / "wenv").string(),
                "EMERGENCE_LAB_WORKERS=3 ")
            .exit_code == 0);

  for (const std::string file :
       {"ensemble.csv", "blocks.csv", "report.csv", "independence.csv", "summary.json"}) {
    const std::string ref = read_file(dir / "w1" / file);
    CHECK(ref == read_file(dir / "w1b" / file));
    CHECK(ref == read_file(dir / "w3" / file));
    CHECK(ref == read_file(dir / "wenv" / file));
  }
}
