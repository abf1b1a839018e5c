// One-loop thermal self-mass and the stationary spectral/statistical
// solution: quadrature vs closed forms, parity, the decay-rate anchor, the
// spectral sum rule, the free limit, and grid-resolution failures.

#include <cmath>
#include <vector>

#include "decoh/selfmass.hpp"
#include "doctest.h"

using namespace decoh;

namespace {
QftParams make(double m_phi, double h, double beta, double k) {
  QftParams p;
  p.m_phi = m_phi;
  p.h = h;
  p.beta = beta;
  p.k = k;
  return p;
}
}  // namespace

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(validate(make(0.0, 1.0, 1.0, 1.0)), Error);
  CHECK_THROWS_AS(validate(make(1.0, -1.0, 1.0, 1.0)), Error);
  CHECK_THROWS_AS(validate(make(1.0, 1.0, 0.0, 1.0)), Error);
  CHECK_THROWS_AS(validate(make(1.0, 1.0, 1.0, -1.0)), Error);
  CHECK_NOTHROW(validate(make(1.0, 0.0, 1.0, 1.0)));
  CHECK(perturbativity_warning(make(1.0, 3.0, 0.5, 1.0)).empty());
  CHECK_FALSE(perturbativity_warning(make(1.0, 5.0, 0.5, 1.0)).empty());
}

TEST_CASE("decay-rate anchor value") {
  auto p = make(1.0, 3.0, 0.5, 1.0);
  CHECK(decay_rate_formula(p) == doctest::Approx(0.4500708034495698).epsilon(1e-12));
  CHECK(decay_rate_formula(make(1.0, 0.0, 0.5, 1.0)) == 0.0);
  // Gamma scales as h^2.
  CHECK(decay_rate_formula(make(1.0, 1.5, 0.5, 1.0)) ==
        doctest::Approx(0.25 * decay_rate_formula(p)).epsilon(1e-12));
}

TEST_CASE("quadrature matches the closed imaginary part") {
  // A slice of the parameter box; the full sweep runs in the acceptance
  // binary. Sample both cuts and the edge neighbourhood.
  std::vector<QftParams> ps = {make(1.0, 0.5, 0.25, 0.5), make(1.0, 3.0, 0.5, 1.0),
                               make(1.0, 2.0, 1.0, 2.0), make(1.0, 1.0, 1.0, 0.5)};
  for (const auto& p : ps) {
    double w = p.omega();
    for (double k0 : {0.3 * w, w, 1.7 * w, 0.5 * p.k, -w}) {
      double quad = im_retarded_selfmass(p, k0);
      double closed = im_selfmass_closed(p, k0);
      double scale = std::max(std::abs(closed), 1e-12);
      CHECK(std::abs(quad - closed) <= 1e-6 * scale);
    }
  }
}

TEST_CASE("imaginary part is odd, real part even") {
  auto p = make(1.0, 3.0, 0.5, 1.0);
  for (double k0 : {0.4, 1.2, 2.5}) {
    CHECK(im_selfmass_closed(p, -k0) == doctest::Approx(-im_selfmass_closed(p, k0)).epsilon(1e-12));
    CHECK(re_retarded_selfmass(p, -k0) ==
          doctest::Approx(re_retarded_selfmass(p, k0)).epsilon(1e-10));
  }
  // Im M^r(k0 > 0) <= 0 on both cuts.
  CHECK(im_selfmass_closed(p, p.omega()) < 0.0);
  CHECK(im_selfmass_closed(p, 0.5 * p.k) < 0.0);
}

TEST_CASE("vacuum pieces") {
  auto p = make(1.0, 3.0, 0.5, 1.0);
  // No vacuum cut inside the light cone; constant above it.
  CHECK(im_selfmass_vacuum(p, 0.5 * p.k) == 0.0);
  CHECK(im_selfmass_vacuum(p, 2.0) ==
        doctest::Approx(-p.h * p.h / (32.0 * M_PI)).epsilon(1e-12));
  // Once-subtracted: the vacuum real part vanishes on the mass shell.
  CHECK(re_selfmass_vacuum(p, p.omega()) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("tabulated spectrum brackets its own quasiparticle pole") {
  auto p = make(1.0, 3.0, 0.5, 1.0);
  auto s = tabulate_selfmass(p);
  CHECK(s.k0.front() == doctest::Approx(-s.k0.back()).epsilon(1e-12));
  // omega_pole solves k0^2 = omega^2 + Re M^r(k0).
  double res = s.omega_pole * s.omega_pole - p.omega() * p.omega() - s.re_at(s.omega_pole);
  CHECK(std::abs(res) <= 1e-6);
  CHECK(s.gamma_amp > 0.0);
  // Interpolated real part agrees with the direct evaluation off-grid.
  for (double k0 : {0.27, 1.234, 3.21}) {
    CHECK(s.re_at(k0) == doctest::Approx(re_retarded_selfmass(p, k0)).epsilon(5e-4));
  }
}

TEST_CASE("stationary solution at the reference point") {
  auto p = make(1.0, 3.0, 0.5, 1.0);
  auto sol = solve_stationary(p);
  CHECK_FALSE(sol.free_limit);
  CHECK(sol.delta_ms == doctest::Approx(3.9725914880147064).epsilon(1e-10));
  CHECK(sol.s_ms == doctest::Approx(1.6755035188213521).epsilon(1e-10));
  CHECK(std::abs(sol.sum_rule - 1.0) <= 1e-4);
  CHECK(sol.omega_pole == doctest::Approx(1.4623334275732038).epsilon(1e-10));
  // The interacting thermal state is more mixed than the free one.
  CHECK(sol.delta_ms > free_thermal_area(p.beta, p.omega()).delta);
}

TEST_CASE("sum rule holds away from the reference point") {
  for (const auto& p : {make(1.0, 1.0, 0.5, 1.0), make(1.0, 2.0, 1.0, 0.5)}) {
    auto sol = solve_stationary(p);
    CHECK(std::abs(sol.sum_rule - 1.0) <= 1e-4);
  }
}

TEST_CASE("free limit is exact") {
  auto p = make(1.0, 0.0, 0.5, 1.0);
  auto sol = solve_stationary(p);
  CHECK(sol.free_limit);
  CHECK(sol.delta_ms ==
        doctest::Approx(free_thermal_area(p.beta, p.omega()).delta).epsilon(1e-14));
  CHECK(sol.s_ms == doctest::Approx(entropy_of_delta(sol.delta_ms)).epsilon(1e-14));
  CHECK(sol.sum_rule == 1.0);
}

TEST_CASE("coarse grids are rejected, not silently accepted") {
  auto p = make(1.0, 0.5, 0.5, 1.0);
  try {
    solve_stationary(p, 64);
    FAIL("expected GridTooCoarse");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GridTooCoarse);
    CHECK(e.is_validation());
  }
}
