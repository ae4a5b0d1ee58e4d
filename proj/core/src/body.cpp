#include "emergence/body.hpp"

#include <string>

namespace emergence {

void BodyConfig::validate() const {
  if (n_atoms < 2)
    throw ConfigError("body.n_atoms must be >= 2, got " + std::to_string(n_atoms));
  if (!(atom_mass > 0.0))
    throw ConfigError("body.atom_mass must be > 0");
  if (dim != 1 && dim != 3)
    throw ConfigError("body.dim must be 1 or 3, got " + std::to_string(dim));
  if (!(lattice_spacing > 0.0))
    throw ConfigError("body.lattice_spacing must be > 0");
}

void check_shapes(const PhaseState& state, const BodyConfig& cfg) {
  if (state.positions.rows() != cfg.n_atoms || state.positions.cols() != cfg.dim ||
      state.momenta.rows() != cfg.n_atoms || state.momenta.cols() != cfg.dim) {
    throw ConfigError("phase state shape does not match body config (want " +
                      std::to_string(cfg.n_atoms) + "x" + std::to_string(cfg.dim) +
                      ")");
  }
}

}  // namespace emergence
