#pragma once

#include <stdexcept>
#include <string>

namespace mfc {

/// Numerical failure (blow-up, CFL violation, non-finite slice). The CLI maps
/// these to exit code 3, distinct from config (1) and assumption (2) errors.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

struct CflError : NumericalError {
  explicit CflError(const std::string& what) : NumericalError(what) {}
};

}  // namespace mfc
