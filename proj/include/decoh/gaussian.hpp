#pragma once

#include "decoh/errors.hpp"

namespace decoh {

// Equal-time second moments of one bosonic mode, hbar = 1.
// cross is the symmetrised mixed moment <{phi,pi}>/2.
struct CorrelatorTriple {
  double phi2 = 0.0;
  double pi2 = 0.0;
  double cross = 0.0;
};

// Invariant phase-space area of a Gaussian state. delta = 1 is pure,
// delta = coth(beta*omega/2) is free thermal.
struct PhaseSpaceArea {
  double delta = 1.0;
};

// Gaussian von Neumann entropy in nats, k_B = 1.
struct EntropyValue {
  double s = 0.0;
};

inline constexpr double kAreaTol = 1e-9;

// delta^2 = 4(phi2*pi2 - cross^2). A radicand in [1-tol, 1) is clamped to 1
// so integrator round-off cannot produce NaN entropies; below 1-tol the
// upstream integrator is broken and HeisenbergViolation is raised.
PhaseSpaceArea phase_space_area(const CorrelatorTriple& c, double tol = kAreaTol);

// S = ((d+1)/2)ln((d+1)/2) - ((d-1)/2)ln((d-1)/2), with the second term 0 at
// d = 1 (limit value).
EntropyValue entropy_from_area(const PhaseSpaceArea& d, double tol = kAreaTol);

// coth(beta*omega/2).
PhaseSpaceArea free_thermal_area(double beta, double omega);

// Equal-time triple from the statistical propagator of one mode:
// phi2 = F(t,t), cross = d_{t'}F|_{t=t'}, pi2 = d_t d_{t'}F|_{t=t'}.
CorrelatorTriple triple_from_statistical(double F_equal, double dF_equal,
                                         double ddF_equal);

// Convenience: entropy directly from a delta value (clamped at 1).
double entropy_of_delta(double delta);

}  // namespace decoh
