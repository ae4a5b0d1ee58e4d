#pragma once

#include <stdexcept>
#include <string>

namespace emergence {

// Invalid configuration, schema violation, or estimator precondition
// failure. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical blow-up or singular geometry: non-finite forces, coincident
// atoms inside a divergent pair potential, and the like. Exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A runtime guard tripped: the computation itself kept going but its
// output can no longer be trusted (for example, wavepacket amplitude
// reaching the grid boundary). Exit code 4.
struct GuardError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace emergence
