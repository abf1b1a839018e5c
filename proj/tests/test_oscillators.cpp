// Coupled-oscillator model: exact symplectic evolution, its conservation
// laws, the time-convolutionless master equation, and the determinant
// channel that keeps its area finite in the runaway regime.

#include <cmath>
#include <vector>

#include "decoh/oscillators.hpp"
#include "doctest.h"

using namespace decoh;

namespace {

OscillatorModel small_bath() {
  std::vector<double> omegas, lambdas;
  for (int n = 1; n <= 8; ++n) {
    omegas.push_back(1.0 + 0.1 * n);
    lambdas.push_back(0.075);
  }
  return build_model(1.0, omegas, lambdas, 2.0);
}

std::vector<double> ramp(double t_max, int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = t_max * i / double(n - 1);
  return t;
}

// Trapezoid oracle for the coefficient integrals, independent of the closed
// forms used in the library.
MasterCoefficients coefficients_by_quadrature(const OscillatorModel& m, double t) {
  const int n = 200000;
  const double h = t / n;
  auto eta = [&](double s) {
    double v = 0.0;
    for (size_t i = 0; i < m.omegas.size(); ++i)
      v += m.lambdas[i] * m.lambdas[i] * std::sin(m.omegas[i] * s) / (2.0 * m.omegas[i]);
    return v;
  };
  auto nu = [&](double s) {
    double v = 0.0;
    for (size_t i = 0; i < m.omegas.size(); ++i)
      v += m.lambdas[i] * m.lambdas[i] / std::tanh(0.5 * m.beta * m.omegas[i]) *
           std::cos(m.omegas[i] * s) / (2.0 * m.omegas[i]);
    return v;
  };
  MasterCoefficients c{0.0, 0.0, 0.0, 0.0};
  for (int i = 0; i <= n; ++i) {
    double s = i * h;
    double w = (i == 0 || i == n) ? 0.5 : 1.0;
    c.a += w * h * eta(s) * std::cos(m.omega0 * s);
    c.g += w * h * eta(s) * std::sin(m.omega0 * s) / m.omega0;
    c.D += w * h * nu(s) * std::cos(m.omega0 * s);
    c.f += w * h * nu(s) * std::sin(m.omega0 * s) / m.omega0;
  }
  return c;
}

}  // namespace

TEST_CASE("model validation") {
  CHECK_THROWS_AS(build_model(1.0, {1.0, 2.0}, {0.1}, 1.0), Error);
  // lambda^2 above omega0^2 * omega1^2 makes the stiffness matrix indefinite.
  try {
    build_model(1.0, {1.0}, {1.2}, 1.0);
    FAIL("expected UnstableModel");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnstableModel);
    CHECK(e.is_validation());
  }
  CHECK_THROWS_AS(build_model(-1.0, {1.0}, {0.1}, 1.0), Error);
  CHECK_THROWS_AS(build_model(1.0, {1.0}, {0.1}, 0.0), Error);
}

TEST_CASE("initial state is a product of vacuum and free thermal modes") {
  auto m = small_bath();
  auto c0 = initial_covariance(m);
  auto dec = entropy_decomposition(c0);
  CHECK(dec.s_system == 0.0);
  CHECK(dec.s_correlation == doctest::Approx(0.0).epsilon(1e-12));
  double s_env = 0.0;
  for (double w : m.omegas) s_env += entropy_of_delta(free_thermal_area(m.beta, w).delta);
  CHECK(dec.s_environment == doctest::Approx(s_env).epsilon(1e-12));
  CHECK(dec.s_total == doctest::Approx(s_env).epsilon(1e-12));
}

TEST_CASE("uncoupled system stays pure") {
  auto m = build_model(1.0, {1.3, 1.7}, {0.0, 0.0}, 2.0);
  auto covs = evolve_exact(m, initial_covariance(m), ramp(50.0, 26));
  for (const auto& c : covs) {
    CHECK(phase_space_area(system_triple(c)).delta == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(entropy_decomposition(c).s_system == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("exact evolution conserves the symplectic invariants") {
  auto m = small_bath();
  auto times = ramp(500.0, 26);
  auto covs = evolve_exact(m, initial_covariance(m), times);
  auto areas0 = symplectic_areas(covs.front().sigma);

  double s_total0 = entropy_decomposition(covs.front()).s_total;
  bool witnessed = false;
  for (size_t i = 0; i < covs.size(); ++i) {
    auto dec = entropy_decomposition(covs[i]);
    CHECK(std::abs(dec.s_total - s_total0) <= 1e-8 * s_total0);
    // Purity of the global state never changes, so any system entropy is
    // borrowed against negative correlation entropy.
    if (dec.s_system > 0.02) {
      witnessed = true;
      CHECK(dec.s_correlation < 0.0);
    }
    auto areas = symplectic_areas(covs[i].sigma);
    REQUIRE(areas.size() == areas0.size());
    for (size_t j = 0; j < areas.size(); ++j)
      CHECK(std::abs(areas[j] - areas0[j]) <= 1e-8 * areas0[j]);
    // The reduced state satisfies the Heisenberg bound at all times.
    CHECK(phase_space_area(system_triple(covs[i])).delta >= 1.0);
  }
  CHECK(witnessed);
}

TEST_CASE("master coefficients match an independent quadrature") {
  auto m = small_bath();
  for (double t : {0.7, 3.0}) {
    auto closed = master_coefficients(m, t);
    auto quad = coefficients_by_quadrature(m, t);
    CHECK(closed.a == doctest::Approx(quad.a).epsilon(1e-8));
    CHECK(closed.g == doctest::Approx(quad.g).epsilon(1e-8));
    CHECK(closed.D == doctest::Approx(quad.D).epsilon(1e-8));
    CHECK(closed.f == doctest::Approx(quad.f).epsilon(1e-8));
  }
}

TEST_CASE("master coefficients survive an exactly resonant bath mode") {
  auto m = build_model(1.0, {1.0, 1.5}, {0.05, 0.05}, 2.0);
  auto closed = master_coefficients(m, 2.0);
  auto quad = coefficients_by_quadrature(m, 2.0);
  CHECK(closed.a == doctest::Approx(quad.a).epsilon(1e-8));
  CHECK(closed.g == doctest::Approx(quad.g).epsilon(1e-8));
  CHECK(closed.D == doctest::Approx(quad.D).epsilon(1e-8));
  CHECK(closed.f == doctest::Approx(quad.f).epsilon(1e-8));
}

TEST_CASE("master evolution input validation") {
  auto m = small_bath();
  CHECK_THROWS_AS(evolve_master(m, {1.0, 2.0}), Error);       // must start at 0
  CHECK_THROWS_AS(evolve_master(m, {0.0, 2.0, 1.0}), Error);  // must ascend
  CHECK_THROWS_AS(evolve_master(m, {}), Error);
}

TEST_CASE("master evolution tracks the exact one at weak coupling") {
  auto m = small_bath();
  auto times = ramp(5.0, 21);
  auto covs = evolve_exact(m, initial_covariance(m), times);
  auto ms = evolve_master(m, times);
  for (size_t i = 0; i < times.size(); ++i) {
    double s_exact = entropy_decomposition(covs[i]).s_system;
    CHECK(std::abs(ms.entropy[i] - s_exact) <= 0.05);
    CHECK(ms.delta[i] >= 1.0 - 1e-9);
  }
}

TEST_CASE("determinant channel agrees with the direct radicand while moderate") {
  auto m = small_bath();
  auto times = ramp(100.0, 51);
  auto ms = evolve_master(m, times);
  for (size_t i = 0; i < times.size(); ++i) {
    const auto& c = ms.triples[i];
    double direct = std::sqrt(4.0 * (c.phi2 * c.pi2 - c.cross * c.cross));
    CHECK(ms.delta[i] == doctest::Approx(direct).epsilon(1e-8));
  }
}

TEST_CASE("resonant runaway stays finite through the determinant channel") {
  // Mean frequency shift exceeds the bare stiffness: the perturbative moments
  // explode while the exact model stays bounded. The co-integrated
  // determinant keeps the area finite and Heisenberg-consistent throughout.
  std::vector<double> omegas, lambdas;
  for (int n = 1; n <= 10; ++n) {
    omegas.push_back(1.0 + 0.01 * n);
    lambdas.push_back(0.1);
  }
  auto m = build_model(1.0, omegas, lambdas, 2.0);
  auto times = ramp(300.0, 13);
  auto ms = evolve_master(m, times);
  for (size_t i = 0; i < times.size(); ++i) {
    CHECK(std::isfinite(ms.delta[i]));
    CHECK(std::isfinite(ms.entropy[i]));
    CHECK(ms.delta[i] >= 1.0 - 1e-9);
  }
  CHECK(ms.delta.back() > 1e50);
  CHECK(ms.entropy.back() > 100.0);

  auto covs = evolve_exact(m, initial_covariance(m), times);
  for (const auto& c : covs) CHECK(entropy_decomposition(c).s_system < 1.0);
}
