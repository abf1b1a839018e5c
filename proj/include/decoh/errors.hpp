#pragma once

#include <stdexcept>
#include <string>

namespace decoh {

// Error taxonomy shared by all modules. The CLI maps kinds to exit codes:
// validation problems exit 2, numerical failures exit 3.
enum class ErrorKind {
  Validation,      // bad config or parameters rejected before computation
  Domain,          // argument outside the mathematical domain of an operation
  UnstableModel,   // stiffness matrix not positive definite
  Heisenberg,      // uncertainty bound violated beyond tolerance
  Numerical,       // quadrature/ODE/stepper failure or invariant drift
  WindowTooShort,  // memory kernel has not decayed at t_mem
  GridTooCoarse,   // quasiparticle peak under-resolved on the frequency grid
  FitFailed,       // rate fit could not produce a monotone log-linear window
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

  bool is_validation() const {
    return kind_ == ErrorKind::Validation || kind_ == ErrorKind::Domain ||
           kind_ == ErrorKind::UnstableModel || kind_ == ErrorKind::GridTooCoarse;
  }

 private:
  ErrorKind kind_;
};

}  // namespace decoh
