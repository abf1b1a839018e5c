#pragma once

#include <Eigen/Dense>
#include <vector>

#include "decoh/gaussian.hpp"

namespace decoh {

// One central oscillator bilinearly coupled to N bath oscillators:
// H = (p_x^2 + omega0^2 x^2)/2 + sum_n (p_n^2 + omega_n^2 q_n^2)/2
//   + sum_n lambda_n q_n x.
struct OscillatorModel {
  double omega0 = 1.0;
  double beta = 1.0;
  std::vector<double> omegas;   // bath frequencies omega_n
  std::vector<double> lambdas;  // couplings lambda_n, units [frequency]^2
};

// Full symmetric covariance in ordering (x, q_1..q_N, p_x, p_1..p_N).
struct FullCovariance {
  Eigen::MatrixXd sigma;
};

struct EntropyDecomposition {
  double s_system = 0.0;
  double s_environment = 0.0;
  double s_correlation = 0.0;
  double s_total = 0.0;
};

// Validates positive definiteness of the stiffness matrix
// K = [[omega0^2, lambda^T], [lambda, diag(omega_n^2)]].
// Throws UnstableModel when an eigenfrequency is not positive.
OscillatorModel build_model(double omega0, std::vector<double> omegas,
                            std::vector<double> lambdas, double beta);

// System mode in its ground state, each bath mode free thermal at beta,
// no cross correlations.
FullCovariance initial_covariance(const OscillatorModel& m);

// Exact evolution through the normal-mode symplectic propagator,
// sigma(t) = S(t) sigma0 S(t)^T. No time-stepping error.
std::vector<FullCovariance> evolve_exact(const OscillatorModel& m,
                                         const FullCovariance& sigma0,
                                         const std::vector<double>& times);

// Symplectic spectrum of a covariance block: the values 2*nu_j >= 1,
// computed via Cholesky and the skew-symmetric SVD pairing.
std::vector<double> symplectic_areas(const Eigen::MatrixXd& sigma);

// Gaussian entropies of system, environment block, full state, and the
// correlation remainder s_total - s_system - s_environment.
EntropyDecomposition entropy_decomposition(const FullCovariance& c,
                                           double tol = kAreaTol);

CorrelatorTriple system_triple(const FullCovariance& c);

// Master-equation trajectory. At resonant couplings the time-local frequency
// shift can exceed the bare stiffness, and the moments then run away
// exponentially while the state squeezes onto the unstable direction; the
// invariant area becomes unrecoverable from the triple in double precision.
// The determinant of the reduced covariance is therefore co-integrated (it
// obeys its own well-conditioned linear ODE), and delta/entropy are reported
// from it. While the moments are moderate the two routes agree.
struct MasterEvolution {
  std::vector<CorrelatorTriple> triples;
  std::vector<double> delta;    // 2 sqrt(det sigma_S), from the co-integrated det
  std::vector<double> entropy;  // Gaussian entropy of that area
};

// Second-order time-convolutionless master equation for the reduced system
// moments, with coefficients a(t), g(t), D(t), f(t) built per mode in closed
// form from the noise and dissipation kernels. Returns the triple plus the
// safe area at the requested times (ascending, starting at 0).
MasterEvolution evolve_master(const OscillatorModel& m,
                              const std::vector<double>& times);

// Time-dependent master-equation coefficients, exposed for inspection.
struct MasterCoefficients {
  double a, g, D, f;
};
MasterCoefficients master_coefficients(const OscillatorModel& m, double t);

}  // namespace decoh
