#include "decoh/gaussian.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace decoh {

PhaseSpaceArea phase_space_area(const CorrelatorTriple& c, double tol) {
  if (!(c.phi2 >= 0.0) || !(c.pi2 >= 0.0) || !std::isfinite(c.cross)) {
    throw Error(ErrorKind::Domain, "correlator triple has negative or non-finite entries");
  }
  const double radicand = 4.0 * (c.phi2 * c.pi2 - c.cross * c.cross);
  if (radicand < 1.0 - tol) {
    std::ostringstream msg;
    msg << "Heisenberg bound violated: 4(phi2*pi2 - cross^2) = " << radicand
        << " < 1 - " << tol;
    throw Error(ErrorKind::Heisenberg, msg.str());
  }
  if (radicand < 1.0) return PhaseSpaceArea{1.0};
  return PhaseSpaceArea{std::sqrt(radicand)};
}

EntropyValue entropy_from_area(const PhaseSpaceArea& d, double tol) {
  if (d.delta < 1.0 - tol || !std::isfinite(d.delta)) {
    throw Error(ErrorKind::Domain, "phase-space area below 1");
  }
  return EntropyValue{entropy_of_delta(d.delta)};
}

double entropy_of_delta(double delta) {
  if (delta <= 1.0) return 0.0;
  const double a = 0.5 * (delta + 1.0);
  const double b = 0.5 * (delta - 1.0);
  // a ln a - b ln b rewritten with a = b + 1: the direct difference cancels
  // catastrophically once delta is large, this form is stable for all b >= 0
  // (and b log1p(1/b) -> 0 as b -> 0).
  const double sb = (b > 0.0) ? b * std::log1p(1.0 / b) : 0.0;
  return std::log(a) + sb;
}

PhaseSpaceArea free_thermal_area(double beta, double omega) {
  if (!(beta > 0.0) || !(omega > 0.0) || !std::isfinite(beta) || !std::isfinite(omega)) {
    throw Error(ErrorKind::Domain, "free_thermal_area requires finite beta, omega > 0");
  }
  const double x = 0.5 * beta * omega;
  // tanh saturates to 1 well before overflow; coth(x>~19) == 1 in double.
  return PhaseSpaceArea{1.0 / std::tanh(x)};
}

CorrelatorTriple triple_from_statistical(double F_equal, double dF_equal,
                                         double ddF_equal) {
  return CorrelatorTriple{F_equal, ddF_equal, dF_equal};
}

}  // namespace decoh
