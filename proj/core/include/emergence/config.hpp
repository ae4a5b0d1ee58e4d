#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "emergence/ensemble.hpp"
#include "emergence/mdsim.hpp"
#include "emergence/qsim.hpp"

// JSON experiment configuration. Parsing is strict: unknown keys anywhere
// in the document are rejected, as are missing required keys and
// out-of-range values, all with ConfigError naming the offending path.

namespace emergence {

struct EnsembleSection {
  EnsembleSpec spec;
  std::vector<int> n_list;  // non-empty selects the scaling study
};

struct QuantumSection {
  QuantumParams params;
  WavepacketSpec packet;
  // Optional packet-width sweep: rerun with sigma_x from the list and
  // report the expectation gap at sweep_time.
  std::vector<double> sigma_sweep;
  double sweep_time = 0.0;
};

struct CoordsCheckSection {
  std::vector<int> n_list{2, 3, 64, 512, 4096};
};

struct ExperimentConfig {
  BodyConfig body;
  PairPotential pair;
  ExternalPotential external;
  ScenarioSpec scenario;
  IntegratorParams integrator;
  bool has_scenario = false;    // md/ensemble commands require these sections
  bool has_integrator = false;
  std::optional<EnsembleSection> ensemble;
  std::optional<QuantumSection> quantum;
  CoordsCheckSection coords_check;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  std::string config_hash;  // FNV-1a over the raw config bytes, hex
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

// FNV-1a 64-bit, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace emergence
