#pragma once

#include <vector>

#include "decoh/selfmass.hpp"

namespace decoh {

// Discretised memory kernels for the single-mode Kadanoff-Baym equations.
// M_rho(s) and M_F(s) are the time-domain transforms of the spectral-function
// and statistical self-energy densities, built from the tabulated self-mass
// with a smooth frequency roll-off so the time kernels are free of cutoff
// ringing. The product-trapezoidal weights KL/KR integrate K(t - t') against
// the linear interpolant of the unknown exactly:
//   int_{tau_m}^{tau_{m+1}} K(tau) interp(f) dtau uses KL[m+1] f_{m+1} + KR[m] f_m.
struct MemoryKernels {
  double dt = 0.0;
  double t_mem = 0.0;
  int n_mem = 0;             // memory window length in steps
  double omega_eff2 = 0.0;   // bare omega^2 plus the cutoff-matching mass shift
  double dm2 = 0.0;          // the mass shift itself
  double omega_pole = 0.0;
  std::vector<double> mr;    // M_rho(j dt), j = 0..n_mem
  std::vector<double> mf;    // M_F(j dt)
  std::vector<double> klr, krr;  // product-trapezoid weights for M_rho
  std::vector<double> klf, krf;  // product-trapezoid weights for M_F
};

MemoryKernels build_kernels(const QftParams& p, const SelfMassSpectrum& s,
                            double dt, double t_mem, double roll_frac = 0.2,
                            double taper_frac = 0.1);

struct KbOptions {
  double dt = 0.05;
  int n_t = 2000;
  double t_mem = -1.0;           // default 10 beta
  double taper_frac = 0.1;       // cosine taper of the kernel tail
  bool preinitial = true;        // attach free pure-state history before t = 0
  double commutator_tol = 1e-3;  // abort threshold on the equal-time commutator
  double area_tol = 1e-5;        // area clamp; stencil bias floor near the pure state
  bool keep_grid = false;        // retain the full two-time grid in the result
};

struct KbResult {
  std::vector<double> t;
  std::vector<double> delta;
  std::vector<double> entropy;
  std::vector<double> commutator;  // equal-time [phi, pi] estimate, exact value 1
  double max_commutator_drift = 0.0;
  CorrelatorTriple final_triple;
  MemoryKernels kernels;
  // Populated when keep_grid is set: F on the full (n_t+1)^2 square, row-major;
  // rho(t, t') depends on t - t' only and is carried as the slice rho(t, 0).
  std::vector<double> f_grid;
  std::vector<double> rho_slice;
};

// Two-time integration of F(t, t') and rho(t, t') for one field mode starting
// from the pure state F(0,0) = 1/(2 omega), with the chi bath entering through
// the memory kernels. Equal-time observables use fourth-order stencils, so the
// first and last two output rows are dropped. The kernel overload requires
// kernels built on the same dt.
KbResult evolve_kb(const QftParams& p, const MemoryKernels& kernels, const KbOptions& opt);
KbResult evolve_kb(const QftParams& p, const SelfMassSpectrum& s, const KbOptions& opt);

}  // namespace decoh
