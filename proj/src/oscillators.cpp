#include "decoh/oscillators.hpp"

#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <sstream>

namespace decoh {

namespace {

Eigen::MatrixXd stiffness(const OscillatorModel& m) {
  const int n = static_cast<int>(m.omegas.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + 1, n + 1);
  K(0, 0) = m.omega0 * m.omega0;
  for (int i = 0; i < n; ++i) {
    K(i + 1, i + 1) = m.omegas[i] * m.omegas[i];
    K(0, i + 1) = K(i + 1, 0) = m.lambdas[i];
  }
  return K;
}

}  // namespace

OscillatorModel build_model(double omega0, std::vector<double> omegas,
                            std::vector<double> lambdas, double beta) {
  if (!(omega0 > 0.0) || !(beta > 0.0)) {
    throw Error(ErrorKind::Validation, "omega0 and beta must be positive");
  }
  if (omegas.size() != lambdas.size()) {
    throw Error(ErrorKind::Validation, "omegas and lambdas length mismatch");
  }
  for (double w : omegas) {
    if (!(w > 0.0)) throw Error(ErrorKind::Validation, "bath frequencies must be positive");
  }
  OscillatorModel m{omega0, beta, std::move(omegas), std::move(lambdas)};

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(stiffness(m));
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::Numerical, "stiffness eigendecomposition failed");
  }
  const double lo = es.eigenvalues().minCoeff();
  if (!(lo > 0.0)) {
    std::ostringstream msg;
    msg << "stiffness matrix not positive definite (min eigenvalue " << lo << ")";
    throw Error(ErrorKind::UnstableModel, msg.str());
  }
  return m;
}

FullCovariance initial_covariance(const OscillatorModel& m) {
  const int n = static_cast<int>(m.omegas.size());
  const int d = n + 1;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  s(0, 0) = 0.5 / m.omega0;
  s(d, d) = 0.5 * m.omega0;
  for (int i = 0; i < n; ++i) {
    const double w = m.omegas[i];
    const double c = 1.0 / std::tanh(0.5 * m.beta * w);
    s(1 + i, 1 + i) = 0.5 * c / w;
    s(d + 1 + i, d + 1 + i) = 0.5 * c * w;
  }
  return FullCovariance{std::move(s)};
}

std::vector<FullCovariance> evolve_exact(const OscillatorModel& m,
                                         const FullCovariance& sigma0,
                                         const std::vector<double>& times) {
  const int d = static_cast<int>(m.omegas.size()) + 1;
  if (sigma0.sigma.rows() != 2 * d || sigma0.sigma.cols() != 2 * d) {
    throw Error(ErrorKind::Validation, "covariance dimension does not match model");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(stiffness(m));
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::Numerical, "stiffness eigendecomposition failed");
  }
  const Eigen::VectorXd w2 = es.eigenvalues();
  if (!(w2.minCoeff() > 0.0)) {
    throw Error(ErrorKind::UnstableModel, "stiffness matrix not positive definite");
  }
  const Eigen::MatrixXd& V = es.eigenvectors();
  const Eigen::VectorXd w = w2.array().sqrt();

  std::vector<FullCovariance> out;
  out.reserve(times.size());
  Eigen::MatrixXd S(2 * d, 2 * d);
  for (double t : times) {
    const Eigen::ArrayXd c = (w.array() * t).cos();
    const Eigen::ArrayXd s = (w.array() * t).sin();
    // Normal-mode propagator: Q(t) = A Q0 + B P0, P(t) = -Bp Q0 + A P0.
    const Eigen::MatrixXd A = V * c.matrix().asDiagonal() * V.transpose();
    const Eigen::MatrixXd B = V * (s / w.array()).matrix().asDiagonal() * V.transpose();
    const Eigen::MatrixXd Bp = V * (s * w.array()).matrix().asDiagonal() * V.transpose();
    S.topLeftCorner(d, d) = A;
    S.topRightCorner(d, d) = B;
    S.bottomLeftCorner(d, d) = -Bp;
    S.bottomRightCorner(d, d) = A;
    out.push_back(FullCovariance{S * sigma0.sigma * S.transpose()});
  }
  return out;
}

std::vector<double> symplectic_areas(const Eigen::MatrixXd& sigma) {
  const int d2 = static_cast<int>(sigma.rows());
  const int d = d2 / 2;
  Eigen::MatrixXd sym = 0.5 * (sigma + sigma.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) {
    // A covariance at the uncertainty boundary can fail Cholesky by round-off.
    sym += 1e-14 * sym.trace() / d2 * Eigen::MatrixXd::Identity(d2, d2);
    llt.compute(sym);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorKind::Numerical, "covariance not positive definite");
    }
  }
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd Om = Eigen::MatrixXd::Zero(d2, d2);
  Om.topRightCorner(d, d) = Eigen::MatrixXd::Identity(d, d);
  Om.bottomLeftCorner(d, d) = -Eigen::MatrixXd::Identity(d, d);
  // K = L^T Om L is skew; its singular values come in pairs (nu_j, nu_j).
  const Eigen::MatrixXd K = L.transpose() * Om * L;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(K);
  const Eigen::VectorXd sv = svd.singularValues();  // descending
  std::vector<double> areas(d);
  for (int j = 0; j < d; ++j) areas[j] = 2.0 * 0.5 * (sv(2 * j) + sv(2 * j + 1));
  return areas;
}

EntropyDecomposition entropy_decomposition(const FullCovariance& c, double tol) {
  const int d2 = static_cast<int>(c.sigma.rows());
  const int d = d2 / 2;
  const int n = d - 1;

  auto entropy_sum = [tol](const std::vector<double>& areas) {
    double s = 0.0;
    for (double a : areas) {
      if (a < 1.0 - tol) {
        std::ostringstream msg;
        msg << "symplectic area " << a << " below 1";
        throw Error(ErrorKind::Heisenberg, msg.str());
      }
      s += entropy_of_delta(a);
    }
    return s;
  };

  EntropyDecomposition out;
  out.s_system = entropy_from_area(phase_space_area(system_triple(c), tol), tol).s;

  if (n > 0) {
    Eigen::MatrixXd env(2 * n, 2 * n);
    env.topLeftCorner(n, n) = c.sigma.block(1, 1, n, n);
    env.topRightCorner(n, n) = c.sigma.block(1, d + 1, n, n);
    env.bottomLeftCorner(n, n) = c.sigma.block(d + 1, 1, n, n);
    env.bottomRightCorner(n, n) = c.sigma.block(d + 1, d + 1, n, n);
    out.s_environment = entropy_sum(symplectic_areas(env));
  }

  out.s_total = entropy_sum(symplectic_areas(c.sigma));
  out.s_correlation = out.s_total - out.s_system - out.s_environment;
  return out;
}

CorrelatorTriple system_triple(const FullCovariance& c) {
  const int d = static_cast<int>(c.sigma.rows()) / 2;
  return CorrelatorTriple{c.sigma(0, 0), c.sigma(d, d), c.sigma(0, d)};
}

MasterCoefficients master_coefficients(const OscillatorModel& m, double t) {
  // a = int_0^t eta(s) cos(omega0 s) ds        (frequency shift)
  // g = (1/omega0) int_0^t eta(s) sin(omega0 s) ds   (damping)
  // D = int_0^t nu(s) cos(omega0 s) ds         (diffusion)
  // f = (1/omega0) int_0^t nu(s) sin(omega0 s) ds    (anomalous diffusion)
  // with eta(s) = sum_n lambda_n^2 sin(omega_n s)/(2 omega_n) and
  // nu(s) = sum_n lambda_n^2 coth(beta omega_n/2) cos(omega_n s)/(2 omega_n).
  // All four antiderivatives are elementary; sums are evaluated exactly.
  const double w0 = m.omega0;
  auto one_minus_cos_over = [t](double d) {
    if (std::abs(d) < 1e-8) return 0.5 * d * t * t;  // (1-cos(dt))/d
    return (1.0 - std::cos(d * t)) / d;
  };
  auto sin_over = [t](double d) {
    if (std::abs(d) < 1e-8) return t * (1.0 - d * d * t * t / 6.0);  // sin(dt)/d
    return std::sin(d * t) / d;
  };

  MasterCoefficients c{0.0, 0.0, 0.0, 0.0};
  for (size_t i = 0; i < m.omegas.size(); ++i) {
    const double wn = m.omegas[i];
    const double l2 = m.lambdas[i] * m.lambdas[i];
    const double coth = 1.0 / std::tanh(0.5 * m.beta * wn);
    const double plus = wn + w0;
    const double minus = wn - w0;
    c.a += l2 / (4.0 * wn) * (one_minus_cos_over(plus) + one_minus_cos_over(minus));
    c.g += l2 / (4.0 * wn * w0) * (sin_over(minus) - sin_over(plus));
    c.D += l2 * coth / (4.0 * wn) * (sin_over(minus) + sin_over(plus));
    c.f += l2 * coth / (4.0 * wn * w0) *
           (one_minus_cos_over(plus) - one_minus_cos_over(minus));
  }
  return c;
}

MasterEvolution evolve_master(const OscillatorModel& m,
                              const std::vector<double>& times) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 4>;  // (x2, p2, cross, det)

  if (times.empty() || times.front() != 0.0) {
    throw Error(ErrorKind::Validation, "master evolution times must start at 0");
  }
  for (size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw Error(ErrorKind::Validation, "master evolution times must be strictly increasing");
    }
  }
  const double w0 = m.omega0;

  // sigma' = A sigma + sigma A^T + N with A = [[0,1],[-weff2,-2g]] and
  // N = [[0,f],[f,2D]] gives det' = 2 tr(A) det + tr(adj(sigma) N); carrying
  // det as a fourth component keeps the invariant area well conditioned even
  // when the moments themselves grow exponentially.
  auto rhs = [&m, w0](const State& y, State& dy, double t) {
    const MasterCoefficients c = master_coefficients(m, t);
    const double weff2 = w0 * w0 - 2.0 * c.a;
    dy[0] = 2.0 * y[2];
    dy[1] = -2.0 * weff2 * y[2] - 4.0 * c.g * y[1] + 2.0 * c.D;
    dy[2] = y[1] - weff2 * y[0] - 2.0 * c.g * y[2] + c.f;
    dy[3] = -4.0 * c.g * y[3] + 2.0 * c.D * y[0] - 2.0 * c.f * y[2];
  };

  State y{0.5 / w0, 0.5 * w0, 0.0, 0.25};
  MasterEvolution out;
  out.triples.reserve(times.size());
  out.delta.reserve(times.size());
  out.entropy.reserve(times.size());

  auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<State>>(1e-12, 1e-10);
  try {
    odeint::integrate_times(stepper, rhs, y, times.begin(), times.end(), 1e-3,
                            [&out](const State& s, double) {
                              out.triples.push_back(CorrelatorTriple{s[0], s[1], s[2]});
                              double d = 2.0 * std::sqrt(std::max(s[3], 0.0));
                              out.delta.push_back(d);
                              out.entropy.push_back(entropy_of_delta(d));
                            });
  } catch (const std::exception& e) {
    throw Error(ErrorKind::Numerical, std::string("master ODE integration failed: ") + e.what());
  }
  return out;
}

}  // namespace decoh
