#include "emergence/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace emergence {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config error at '" + path + "': " + what);
}

// Strict-schema helper: every present key must be known, every required
// key must be present.
void expect_keys(const json& j, const std::string& path,
                 std::initializer_list<const char*> required,
                 std::initializer_list<const char*> optional) {
  if (!j.is_object()) fail(path, "expected an object");
  std::set<std::string> known;
  for (const char* k : required) known.insert(k);
  for (const char* k : optional) known.insert(k);
  for (const auto& item : j.items())
    if (!known.count(item.key())) fail(path + "." + item.key(), "unknown key");
  for (const char* k : required)
    if (!j.contains(k)) fail(path + "." + k, "missing required key");
}

double get_num(const json& j, const std::string& path, const char* key) {
  if (!j.at(key).is_number()) fail(path + "." + key, "expected a number");
  return j.at(key).get<double>();
}

long get_int(const json& j, const std::string& path, const char* key) {
  if (!j.at(key).is_number_integer()) fail(path + "." + key, "expected an integer");
  return j.at(key).get<long>();
}

std::vector<double> get_vec(const json& j, const std::string& path, const char* key,
                            int expect_len = -1) {
  if (!j.at(key).is_array()) fail(path + "." + key, "expected an array");
  std::vector<double> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) fail(path + "." + key, "expected numeric entries");
    out.push_back(v.get<double>());
  }
  if (expect_len >= 0 && static_cast<int>(out.size()) != expect_len)
    fail(path + "." + key, "expected " + std::to_string(expect_len) + " entries");
  return out;
}

BodyConfig parse_body(const json& j) {
  expect_keys(j, "body", {"n_atoms", "atom_mass", "dim", "lattice_spacing"}, {});
  BodyConfig body;
  body.n_atoms = static_cast<int>(get_int(j, "body", "n_atoms"));
  body.atom_mass = get_num(j, "body", "atom_mass");
  body.dim = static_cast<int>(get_int(j, "body", "dim"));
  body.lattice_spacing = get_num(j, "body", "lattice_spacing");
  body.validate();
  return body;
}

ExternalPotential parse_external(const json& j, const BodyConfig& body) {
  if (!j.is_object() || !j.contains("type")) fail("external", "missing 'type'");
  const std::string type = j.at("type").get<std::string>();
  if (type == "gravity") {
    expect_keys(j, "external", {"type", "g"}, {});
    const double g = get_num(j, "external", "g");
    if (!(g > 0.0)) fail("external.g", "must be > 0");
    return Gravity{g};
  }
  if (type == "harmonic") {
    expect_keys(j, "external", {"type", "omega"}, {});
    const double w = get_num(j, "external", "omega");
    if (!(w > 0.0)) fail("external.omega", "must be > 0");
    return Harmonic{w};
  }
  if (type == "quartic") {
    expect_keys(j, "external", {"type", "omega", "lambda"}, {});
    const double w = get_num(j, "external", "omega");
    const double l = get_num(j, "external", "lambda");
    if (!(w > 0.0)) fail("external.omega", "must be > 0");
    if (l < 0.0) fail("external.lambda", "must be >= 0");
    return Quartic{w, l};
  }
  if (type == "polynomial") {
    expect_keys(j, "external", {"type", "coeffs"}, {"domain"});
    Polynomial p;
    const json& cj = j.at("coeffs");
    if (!cj.is_array()) fail("external.coeffs", "expected an array of arrays");
    for (std::size_t axis = 0; axis < cj.size(); ++axis) {
      if (!cj[axis].is_array()) fail("external.coeffs", "expected an array per axis");
      std::vector<double> coeffs;
      for (const auto& v : cj[axis]) coeffs.push_back(v.get<double>());
      p.axis_coeffs.push_back(std::move(coeffs));
    }
    if (static_cast<int>(p.axis_coeffs.size()) != body.dim)
      fail("external.coeffs", "need one coefficient list per axis (dim = " +
                                  std::to_string(body.dim) + ")");
    if (j.contains("domain")) {
      const json& dj = j.at("domain");
      if (!dj.is_array() || dj.size() != p.axis_coeffs.size())
        fail("external.domain", "need one [lo, hi] (or null) per axis");
      for (const auto& d : dj) {
        if (d.is_null()) {
          p.domain.push_back(std::nullopt);
        } else {
          if (!d.is_array() || d.size() != 2) fail("external.domain", "entries are [lo, hi]");
          const double lo = d[0].get<double>(), hi = d[1].get<double>();
          if (!(lo < hi)) fail("external.domain", "lo must be < hi");
          p.domain.push_back(std::array<double, 2>{lo, hi});
        }
      }
    }
    return p;
  }
  if (type == "gravity_floor") {
    expect_keys(j, "external", {"type", "g", "wall_coeff"}, {});
    const double g = get_num(j, "external", "g");
    const double a = get_num(j, "external", "wall_coeff");
    if (!(g > 0.0)) fail("external.g", "must be > 0");
    if (!(a > 0.0)) fail("external.wall_coeff", "must be > 0");
    return GravityFloor{g, a};
  }
  fail("external.type", "unknown potential '" + type + "'");
}

PairPotential parse_pair(const json& j) {
  if (!j.is_object() || !j.contains("type")) fail("pair", "missing 'type'");
  const std::string type = j.at("type").get<std::string>();
  if (type == "harmonic_spring") {
    expect_keys(j, "pair", {"type", "stiffness", "rest_length"}, {});
    const double k = get_num(j, "pair", "stiffness");
    const double r0 = get_num(j, "pair", "rest_length");
    if (k < 0.0) fail("pair.stiffness", "must be >= 0");
    if (r0 < 0.0) fail("pair.rest_length", "must be >= 0");
    return HarmonicSpring{k, r0};
  }
  if (type == "lennard_jones") {
    expect_keys(j, "pair", {"type", "epsilon", "sigma", "cutoff"}, {});
    const double eps = get_num(j, "pair", "epsilon");
    const double sig = get_num(j, "pair", "sigma");
    const double rc = get_num(j, "pair", "cutoff");
    if (!(eps > 0.0)) fail("pair.epsilon", "must be > 0");
    if (!(sig > 0.0)) fail("pair.sigma", "must be > 0");
    if (!(rc > sig)) fail("pair.cutoff", "must be > sigma");
    return LennardJonesTruncated{eps, sig, rc};
  }
  fail("pair.type", "unknown potential '" + type + "'");
}

ScenarioSpec parse_scenario(const json& j, const BodyConfig& body) {
  expect_keys(j, "scenario", {"type", "cm_offset", "cm_velocity", "temperature"}, {});
  ScenarioSpec s;
  const std::string type = j.at("type").get<std::string>();
  if (type == "harmonic_trap")
    s.kind = ScenarioKind::HarmonicTrap;
  else if (type == "quartic_trap")
    s.kind = ScenarioKind::QuarticTrap;
  else if (type == "gravity_floor_drop")
    s.kind = ScenarioKind::GravityFloorDrop;
  else
    fail("scenario.type", "unknown scenario '" + type + "'");

  const std::vector<double> off = get_vec(j, "scenario", "cm_offset", body.dim);
  const std::vector<double> vel = get_vec(j, "scenario", "cm_velocity", body.dim);
  s.cm_offset = Eigen::Map<const Eigen::VectorXd>(off.data(), body.dim);
  s.cm_velocity = Eigen::Map<const Eigen::VectorXd>(vel.data(), body.dim);
  s.temperature = get_num(j, "scenario", "temperature");
  if (s.temperature < 0.0) fail("scenario.temperature", "must be >= 0");
  return s;
}

IntegratorParams parse_integrator(const json& j) {
  expect_keys(j, "integrator", {"dt", "n_steps"}, {"record_stride"});
  IntegratorParams p;
  p.dt = get_num(j, "integrator", "dt");
  p.n_steps = get_int(j, "integrator", "n_steps");
  p.record_stride = j.contains("record_stride")
                        ? get_int(j, "integrator", "record_stride")
                        : 1;
  p.validate();
  return p;
}

EnsembleSection parse_ensemble(const json& j) {
  expect_keys(j, "ensemble", {"n_members", "base_seed", "sample_times"},
              {"n_blocks", "n_list"});
  EnsembleSection sec;
  sec.spec.n_members = static_cast<int>(get_int(j, "ensemble", "n_members"));
  sec.spec.base_seed = static_cast<std::uint64_t>(get_int(j, "ensemble", "base_seed"));
  sec.spec.sample_times = get_vec(j, "ensemble", "sample_times");
  if (j.contains("n_blocks"))
    sec.spec.n_blocks = static_cast<int>(get_int(j, "ensemble", "n_blocks"));
  if (j.contains("n_list")) {
    for (const auto& v : j.at("n_list")) {
      if (!v.is_number_integer()) fail("ensemble.n_list", "expected integers");
      sec.n_list.push_back(v.get<int>());
    }
  }
  sec.spec.validate();
  return sec;
}

QuantumSection parse_quantum(const json& j) {
  expect_keys(j, "quantum",
              {"dt", "n_steps", "grid_points", "extent", "packet"},
              {"hbar", "record_stride", "sigma_sweep", "sweep_time"});
  QuantumSection q;
  q.params.dt = get_num(j, "quantum", "dt");
  q.params.n_steps = get_int(j, "quantum", "n_steps");
  if (j.contains("hbar")) q.params.hbar = get_num(j, "quantum", "hbar");
  const std::vector<double> gp = get_vec(j, "quantum", "grid_points", 2);
  q.params.nx = static_cast<int>(gp[0]);
  q.params.nxi = static_cast<int>(gp[1]);
  const std::vector<double> ext = get_vec(j, "quantum", "extent", 2);
  q.params.extent_x = ext[0];
  q.params.extent_xi = ext[1];
  if (j.contains("record_stride"))
    q.params.record_stride = get_int(j, "quantum", "record_stride");
  q.params.validate();

  const json& pj = j.at("packet");
  expect_keys(pj, "quantum.packet", {"x0", "sigma_x", "xi0", "sigma_xi"},
              {"k_x", "k_xi"});
  q.packet.x0 = get_num(pj, "quantum.packet", "x0");
  q.packet.sigma_x = get_num(pj, "quantum.packet", "sigma_x");
  q.packet.xi0 = get_num(pj, "quantum.packet", "xi0");
  q.packet.sigma_xi = get_num(pj, "quantum.packet", "sigma_xi");
  if (pj.contains("k_x")) q.packet.k_x = get_num(pj, "quantum.packet", "k_x");
  if (pj.contains("k_xi")) q.packet.k_xi = get_num(pj, "quantum.packet", "k_xi");
  if (!(q.packet.sigma_x > 0.0) || !(q.packet.sigma_xi > 0.0))
    fail("quantum.packet", "widths must be > 0");

  if (j.contains("sigma_sweep")) {
    q.sigma_sweep = get_vec(j, "quantum", "sigma_sweep");
    if (q.sigma_sweep.size() < 2) fail("quantum.sigma_sweep", "need at least 2 widths");
    for (std::size_t i = 0; i < q.sigma_sweep.size(); ++i) {
      if (!(q.sigma_sweep[i] > 0.0)) fail("quantum.sigma_sweep", "widths must be > 0");
      if (i > 0 && q.sigma_sweep[i] <= q.sigma_sweep[i - 1])
        fail("quantum.sigma_sweep", "widths must be strictly increasing");
    }
    if (!j.contains("sweep_time"))
      fail("quantum.sweep_time", "required when sigma_sweep is present");
    q.sweep_time = get_num(j, "quantum", "sweep_time");
    if (!(q.sweep_time > 0.0)) fail("quantum.sweep_time", "must be > 0");
  }
  return q;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  try {
    expect_keys(root, "(root)", {"body", "pair", "external"},
                {"scenario", "integrator", "ensemble", "quantum", "coords_check", "seed",
                 "output_dir"});

    ExperimentConfig cfg;
    cfg.body = parse_body(root.at("body"));
    cfg.pair = parse_pair(root.at("pair"));
    cfg.external = parse_external(root.at("external"), cfg.body);

    if (root.contains("scenario")) {
      cfg.scenario = parse_scenario(root.at("scenario"), cfg.body);
      cfg.has_scenario = true;
    } else {
      cfg.scenario.cm_offset = cfg.scenario.cm_velocity = Eigen::VectorXd::Zero(cfg.body.dim);
    }

    if (root.contains("integrator")) {
      cfg.integrator = parse_integrator(root.at("integrator"));
      cfg.has_integrator = true;
    }
    if (root.contains("ensemble")) cfg.ensemble = parse_ensemble(root.at("ensemble"));
    if (root.contains("quantum")) cfg.quantum = parse_quantum(root.at("quantum"));

    if (root.contains("coords_check")) {
      const json& cj = root.at("coords_check");
      expect_keys(cj, "coords_check", {"n_list"}, {});
      cfg.coords_check.n_list.clear();
      for (const auto& v : cj.at("n_list")) {
        if (!v.is_number_integer() || v.get<long>() < 2)
          fail("coords_check.n_list", "expected integers >= 2");
        cfg.coords_check.n_list.push_back(v.get<int>());
      }
      if (cfg.coords_check.n_list.empty()) fail("coords_check.n_list", "must be non-empty");
    }

    if (root.contains("seed")) {
      if (!root.at("seed").is_number_integer() || root.at("seed").get<long>() < 0)
        fail("seed", "expected a non-negative integer");
      cfg.seed = root.at("seed").get<std::uint64_t>();
    }
    if (root.contains("output_dir")) {
      if (!root.at("output_dir").is_string()) fail("output_dir", "expected a string");
      cfg.output_dir = root.at("output_dir").get<std::string>();
    }

    cfg.config_hash = fnv1a_hex(json_text);
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config structure error: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace emergence
