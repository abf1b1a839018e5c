#pragma once

#include <functional>
#include <string>
#include <vector>

#include "decoh/gaussian.hpp"

namespace decoh {

// Scalar phi of mass m_phi coupled as (h/2) phi chi^2 to a massless chi kept
// exactly thermal at 1/beta; one spatial momentum mode k.
struct QftParams {
  double m_phi = 1.0;
  double h = 0.0;
  double beta = 1.0;
  double k = 1.0;
  double omega() const;
};

void validate(const QftParams& p);
// Non-fatal advisory, empty when h/m_phi is comfortably perturbative.
std::string perturbativity_warning(const QftParams& p);

// Retarded self-mass, convention G^r = 1/(omega^2 + M^r - k0^2 - i sgn(k0) 0+),
// so Im M^r(k0 > 0) <= 0 and the spectral function is
// rho = -2 Im M^r / ((k0^2 - omega^2 - Re M^r)^2 + (Im M^r)^2).

// One-loop Im M^r by adaptive radial quadrature over the loop momentum with
// Bose-Einstein weights. Covers the decay cut |k0| > k and the Landau cut
// |k0| < k.
double im_retarded_selfmass(const QftParams& p, double k0);

// Closed forms used internally (dispersion integrals, memory kernels). The
// quadrature route above stays independent so the two can be cross-checked.
double im_selfmass_vacuum(const QftParams& p, double k0);
double im_selfmass_thermal_closed(const QftParams& p, double k0);
double im_selfmass_closed(const QftParams& p, double k0);

// Re M^r = vacuum part in closed form (once-subtracted, pole mass = m_phi)
// plus the thermal part from an unsubtracted principal-value dispersion
// integral (the thermal cut decays exponentially).
double re_selfmass_vacuum(const QftParams& p, double k0);
double re_selfmass_thermal(const QftParams& p, double k0);
double re_retarded_selfmass(const QftParams& p, double k0);

// Single-particle decay rate Gamma_{phi -> chi chi} at k0 = omega, closed form.
double decay_rate_formula(const QftParams& p);

// Generic principal-value dispersion (1/pi) P int_lo^hi g(s)/(s - a) ds with
// g carrying an integrable log singularity at s = s_edge.
double principal_value_dispersion(const std::function<double(double)>& g,
                                  double lo, double hi, double a, double s_edge);

// Tabulated retarded self-mass on a symmetric nonuniform k0 grid densified at
// the Landau edge and the quasiparticle peak. Carries the interpolation
// backbone of the thermal dispersive part so downstream consumers can
// evaluate Re M^r continuously.
struct SelfMassSpectrum {
  QftParams params;
  double lambda_max = 0.0;  // grid half-width
  std::vector<double> k0;
  std::vector<double> re_M;
  std::vector<double> im_M;
  double omega_pole = 0.0;  // quasiparticle root of k0^2 = omega^2 + Re M^r
  double gamma_amp = 0.0;   // amplitude width -Im M^r(omega_pole)/(2 omega_pole)
  std::vector<double> backbone_k0;
  std::vector<double> backbone_re_th;
  std::vector<double> backbone_slope;

  double re_thermal_at(double k0) const;  // monotone-cubic interpolation
  double re_at(double k0) const;
  double im_at(double k0) const;  // closed form, not grid lookup
};

SelfMassSpectrum tabulate_selfmass(const QftParams& p, int n_grid = 4096,
                                   double lambda_factor = 40.0);

struct StationarySolution {
  std::vector<double> k0;
  std::vector<double> rho;
  std::vector<double> F;
  CorrelatorTriple triple;
  double delta_ms = 1.0;
  double s_ms = 0.0;
  double sum_rule = 1.0;
  double omega_pole = 0.0;
  double gamma_amp = 0.0;
  bool free_limit = false;  // analytic h -> 0 path taken
};

// rho on the spectrum grid plus the adaptive sum-rule integral. Refuses with
// GridTooCoarse when fewer than 8 grid points resolve the quasiparticle width.
StationarySolution spectral_function(const QftParams& p, const SelfMassSpectrum& s);

// Completes the KMS statistical part: F = (n_B + 1/2) rho sgn(k0), the
// equal-time triple by frequency integrals, and the mixed-state area/entropy.
StationarySolution stationary_statistical(const QftParams& p, StationarySolution sol,
                                          const SelfMassSpectrum& s);

// Convenience pipeline: tabulate, spectral function, statistical part.
StationarySolution solve_stationary(const QftParams& p, int n_grid = 4096,
                                    double lambda_factor = 40.0);

}  // namespace decoh
