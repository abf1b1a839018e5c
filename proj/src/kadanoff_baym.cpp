#include "decoh/kadanoff_baym.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "decoh/errors.hpp"

namespace decoh {
namespace {

constexpr double kPi = 3.141592653589793238462643383279503;

double bose(double beta, double x) {
  double bx = beta * x;
  if (bx > 700.0) return 0.0;
  return 1.0 / std::expm1(bx);
}

struct UQuad {
  std::vector<double> u, w;
};

// Fixed composite Gauss rule over [0, lambda], shared by every kernel moment.
// Panels refine geometrically into the Landau edge (integrable log) and are
// elsewhere capped so no panel holds more than ~20 radians of the fastest
// oscillation sin(u t_mem).
UQuad build_uquad(const QftParams& p, double lambda, double t_mem) {
  std::vector<double> edges = {0.0, lambda};
  auto add = [&](double x) {
    if (x > 1e-12 * lambda && x < lambda * (1.0 - 1e-12)) edges.push_back(x);
  };
  double k = p.k;
  double sliver = 1e-9 * k;
  if (k < lambda) {
    for (double f : {0.3, 3e-2, 3e-3, 3e-4, 3e-5, 3e-6, 1e-7}) {
      add(k * (1.0 - f));
      add(k * (1.0 + f));
    }
    add(k - sliver);
    add(k + sliver);
  }
  std::sort(edges.begin(), edges.end());
  double du = std::max(20.0 / std::max(t_mem, 1e-6), lambda / 400.0);
  std::vector<double> full;
  for (size_t i = 0; i + 1 < edges.size(); ++i) {
    full.push_back(edges[i]);
    double gap = edges[i + 1] - edges[i];
    int extra = int(gap / du);
    for (int m = 1; m <= extra; ++m) full.push_back(edges[i] + gap * m / double(extra + 1));
  }
  full.push_back(edges.back());

  UQuad q;
  const auto& xs = boost::math::quadrature::gauss<double, 30>::abscissa();
  const auto& ws = boost::math::quadrature::gauss<double, 30>::weights();
  for (size_t i = 0; i + 1 < full.size(); ++i) {
    double a = full[i], b = full[i + 1];
    if (k < lambda && a >= k - 1.5 * sliver && b <= k + 1.5 * sliver) continue;
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    for (size_t m = 0; m < xs.size(); ++m) {
      q.u.push_back(c - h * xs[m]);
      q.w.push_back(h * ws[m]);
      q.u.push_back(c + h * xs[m]);
      q.w.push_back(h * ws[m]);
    }
  }
  return q;
}

// Hat-function moments over one step: I1 = int_0^dt cos(u x) x/dt dx,
// I2 = int_0^dt sin(u x) x/dt dx.
void hat_moments(double u, double dt, double& i1, double& i2) {
  double ud = u * dt;
  if (std::abs(ud) < 1e-3) {
    i1 = dt / 2.0 - u * u * dt * dt * dt / 8.0;
    i2 = u * dt * dt / 3.0 - u * u * u * dt * dt * dt * dt / 30.0;
    return;
  }
  double s = std::sin(ud), c = std::cos(ud);
  i1 = s / u + (c - 1.0) / (u * u * dt);
  i2 = -c / u + s / (u * u * dt);
}

}  // namespace

MemoryKernels build_kernels(const QftParams& p, const SelfMassSpectrum& s,
                            double dt, double t_mem, double roll_frac, double taper_frac) {
  validate(p);
  if (!(dt > 0.0)) throw Error(ErrorKind::Validation, "dt must be positive");
  if (!(roll_frac >= 0.05 && roll_frac <= 0.5))
    throw Error(ErrorKind::Validation, "roll_frac must lie in [0.05, 0.5]");
  if (!(taper_frac >= 0.0 && taper_frac <= 0.45))
    throw Error(ErrorKind::Validation, "taper_frac must lie in [0, 0.45]");
  int n_mem = int(std::lround(t_mem / dt));
  if (n_mem < 4) throw Error(ErrorKind::Validation, "t_mem must span at least 4 steps");

  MemoryKernels kk;
  kk.dt = dt;
  kk.t_mem = n_mem * dt;
  kk.n_mem = n_mem;
  kk.omega_pole = s.omega_pole;
  kk.mr.assign(n_mem + 1, 0.0);
  kk.mf.assign(n_mem + 1, 0.0);
  kk.klr.assign(n_mem + 1, 0.0);
  kk.krr.assign(n_mem + 1, 0.0);
  kk.klf.assign(n_mem + 1, 0.0);
  kk.krf.assign(n_mem + 1, 0.0);

  double w_bare = p.omega();
  if (p.h == 0.0) {
    kk.dm2 = 0.0;
    kk.omega_eff2 = w_bare * w_bare;
    if (w_bare * dt > 1.5)
      throw Error(ErrorKind::Validation, "dt too large for stable stepping at this frequency");
    return kk;
  }

  double lambda = s.lambda_max;
  double u0 = (1.0 - roll_frac) * lambda;
  auto roll = [&](double u) {
    if (u <= u0) return 1.0;
    if (u >= lambda) return 0.0;
    double c = std::cos(0.5 * kPi * (u - u0) / (lambda - u0));
    return c * c;
  };

  UQuad q = build_uquad(p, lambda, kk.t_mem);
  size_t nq = q.u.size();
  std::vector<double> ar(nq), af(nq);
  for (size_t i = 0; i < nq; ++i) {
    double u = q.u[i];
    double a = 2.0 * roll(u) * im_selfmass_closed(p, u);
    ar[i] = a;
    af[i] = (bose(p.beta, u) + 0.5) * a;
  }

  for (int j = 0; j <= n_mem; ++j) {
    double tau = j * dt;
    double sr = 0.0, sf = 0.0;
    for (size_t i = 0; i < nq; ++i) {
      double ph = q.u[i] * tau;
      sr += q.w[i] * ar[i] * std::sin(ph);
      sf += q.w[i] * af[i] * std::cos(ph);
    }
    kk.mr[j] = sr / kPi;
    kk.mf[j] = sf / kPi;
  }

  // Decay refusal. The kernel envelope falls like 1/(beta tau) times an
  // oscillation (soft thermal chi modes), so the check uses the envelope over
  // the last half-beta of the window rather than a single phase-dependent
  // point, and requires a >10x fall from the peak.
  double max_r = 0.0, max_f = 0.0;
  for (int j = 0; j <= n_mem; ++j) {
    max_r = std::max(max_r, std::abs(kk.mr[j]));
    max_f = std::max(max_f, std::abs(kk.mf[j]));
  }
  int j_env = std::min(n_mem - 1, std::max(1, n_mem - int(0.5 * p.beta / dt)));
  double tail_r = 0.0, tail_f = 0.0;
  for (int j = j_env; j <= n_mem; ++j) {
    tail_r = std::max(tail_r, std::abs(kk.mr[j]));
    tail_f = std::max(tail_f, std::abs(kk.mf[j]));
  }
  if (tail_r >= 0.1 * max_r || tail_f >= 0.1 * max_f) {
    std::ostringstream os;
    os << "memory kernel near t_mem = " << kk.t_mem << " is still "
       << tail_r / std::max(max_r, 1e-300) << " (rho) and "
       << tail_f / std::max(max_f, 1e-300)
       << " (F) of its peak; need < 0.1, enlarge t_mem";
    throw Error(ErrorKind::WindowTooShort, os.str());
  }

  // Product-trapezoid weights: KL[m] integrates K against the rising half of
  // the hat on [tau_{m-1}, tau_m], KR[m] against the falling half on
  // [tau_m, tau_{m+1}], both evaluated exactly in frequency space.
  std::vector<double> ca(nq), sa(nq);
  for (size_t i = 0; i < nq; ++i) hat_moments(q.u[i], dt, ca[i], sa[i]);
  for (int m = 0; m <= n_mem; ++m) {
    double klr = 0.0, krr = 0.0, klf = 0.0, krf = 0.0;
    double tl = (m - 1) * dt, tr = (m + 1) * dt;
    for (size_t i = 0; i < nq; ++i) {
      double u = q.u[i];
      double sl = std::sin(u * tl), cl = std::cos(u * tl);
      double sr = std::sin(u * tr), cr = std::cos(u * tr);
      if (m > 0) {
        klr += q.w[i] * ar[i] * (sl * ca[i] + cl * sa[i]);
        klf += q.w[i] * af[i] * (cl * ca[i] - sl * sa[i]);
      }
      if (m < n_mem) {
        krr += q.w[i] * ar[i] * (sr * ca[i] - cr * sa[i]);
        krf += q.w[i] * af[i] * (cr * ca[i] + sr * sa[i]);
      }
    }
    kk.klr[m] = klr / kPi;
    kk.krr[m] = krr / kPi;
    kk.klf[m] = klf / kPi;
    kk.krf[m] = krf / kPi;
  }

  // Cosine taper over the last taper_frac of the window: the truncation edge
  // sits inside a smooth window instead of a hard cut, on the point values and
  // the weights alike.
  if (taper_frac > 0.0) {
    int j0 = int((1.0 - taper_frac) * n_mem);
    for (int j = j0 + 1; j <= n_mem; ++j) {
      double x = double(j - j0) / double(n_mem - j0);
      double f = std::cos(0.5 * kPi * x);
      f *= f;
      kk.mr[j] *= f;
      kk.mf[j] *= f;
      kk.klr[j] *= f;
      kk.krr[j] *= f;
      kk.klf[j] *= f;
      kk.krf[j] *= f;
    }
  }

  // Static correction: the rolled kernel represents a dispersive real part
  // H_W; shift the local mass so the full Re M^r is recovered at the
  // quasiparticle pole. H_W is the infinite-window value on purpose: tying the
  // shift to the finite window would make the mass term inherit the slow
  // (omega_p - k) beat of the kernel tail and amplify window sensitivity.
  double wp = s.omega_pole;
  auto g_w = [&](double sq) {
    double u = std::sqrt(std::max(sq, 0.0));
    return roll(u) * im_selfmass_closed(p, u);
  };
  double hw = principal_value_dispersion(g_w, 0.0, lambda * lambda, wp * wp, p.k * p.k);
  kk.dm2 = s.re_at(wp) - hw;
  kk.omega_eff2 = w_bare * w_bare + kk.dm2;
  if (!(kk.omega_eff2 > 0.0))
    throw Error(ErrorKind::Numerical, "effective frequency squared is not positive");
  if (std::sqrt(kk.omega_eff2) * dt > 1.5)
    throw Error(ErrorKind::Validation, "dt too large for stable stepping at this frequency");
  return kk;
}

KbResult evolve_kb(const QftParams& p, const SelfMassSpectrum& s, const KbOptions& opt) {
  if (!(opt.dt > 0.0)) throw Error(ErrorKind::Validation, "dt must be positive");
  double t_mem = opt.t_mem > 0.0 ? opt.t_mem : 10.0 * p.beta;
  MemoryKernels kk = build_kernels(p, s, opt.dt, t_mem, 0.2, opt.taper_frac);
  return evolve_kb(p, kk, opt);
}

KbResult evolve_kb(const QftParams& p, const MemoryKernels& kernels, const KbOptions& opt) {
  validate(p);
  if (opt.n_t < 8) throw Error(ErrorKind::Validation, "n_t must be at least 8");
  if (!(opt.dt > 0.0)) throw Error(ErrorKind::Validation, "dt must be positive");
  if (std::abs(kernels.dt - opt.dt) > 1e-12 * opt.dt)
    throw Error(ErrorKind::Validation, "kernels were built on a different dt");

  KbResult res;
  res.kernels = kernels;
  MemoryKernels& kk = res.kernels;
  int n_mem = kk.n_mem;
  double dt = kk.dt;
  double w2 = kk.omega_eff2;
  double wb = p.omega();

  int N = opt.n_t;
  size_t W = size_t(N) + 1;
  std::vector<double> F(W * W, 0.0);
  std::vector<double> r(W, 0.0);
  auto Fat = [&](size_t i, size_t j) -> double& { return F[i * W + j]; };

  double f00 = 1.0 / (2.0 * wb);
  Fat(0, 0) = f00;
  Fat(1, 0) = f00 * (1.0 - 0.5 * w2 * dt * dt);
  Fat(0, 1) = Fat(1, 0);
  Fat(1, 1) = f00 + dt * dt * (-w2 * f00 + 0.5 * wb);
  r[0] = 0.0;
  r[1] = dt - w2 * dt * dt * dt / 6.0;

  // rho(t, t') is exactly translation invariant here (stationary kernels, and
  // its window never reaches t' < 0), so a single slice r(tau) carries it.
  auto rho_at = [&](int l, int j) {
    // rho(t_l, t_j) for l <= j
    return -r[j - l];
  };
  auto f_ext = [&](int l, int j) {
    // free vacuum extension of F for l < 0 <= j
    return std::cos(wb * dt * (l - j)) / (2.0 * wb);
  };
  auto rho_ext = [&](int l, int j) {
    // free vacuum extension of rho for l < 0 <= j
    return -std::sin(wb * dt * (j - l)) / wb;
  };

  // Memory sum over window nodes [a, b] at observation row i:
  // w_l = (l < b ? KL[i-l] : 0) + (l > a ? KR[i-l] : 0).
  auto mem_rho_F = [&](int i, int j) {
    int a = opt.preinitial ? i - n_mem : std::max(0, i - n_mem);
    double acc = 0.0;
    for (int l = a; l <= i; ++l) {
      double w = (l < i ? kk.klr[i - l] : 0.0) + (l > a ? kk.krr[i - l] : 0.0);
      double fv = l >= 0 ? Fat(j, l) : f_ext(l, j);
      acc += w * fv;
    }
    return acc;
  };
  auto mem_F_rho = [&](int i, int j) {
    // window [a, min(j, i)]; the b = i + 1 diagonal case handled by caller
    int a = opt.preinitial ? i - n_mem : std::max(0, i - n_mem);
    int b = std::min(j, i);
    if (b < a) return 0.0;
    double acc = 0.0;
    for (int l = a; l <= b; ++l) {
      double w = (l < b ? kk.klf[i - l] : 0.0) + (l > a ? kk.krf[i - l] : 0.0);
      double rv = l >= 0 ? rho_at(l, j) : rho_ext(l, j);
      acc += w * rv;
    }
    return acc;
  };

  double com_check = 0.0;
  for (int i = 1; i < N; ++i) {
    // retarded slice
    {
      int M = std::min(i, n_mem);
      double acc = 0.0;
      for (int m = 0; m <= M; ++m) {
        double w = (m > 0 ? kk.klr[m] : 0.0) + (m < M ? kk.krr[m] : 0.0);
        acc += w * r[i - m];
      }
      r[i + 1] = 2.0 * r[i] - r[i - 1] + dt * dt * (-w2 * r[i] - acc);
    }
    if (i == 1) {
      com_check = (8.0 * r[1] - r[2]) / (6.0 * dt);
    }

    // statistical rows j = 0..i (leapfrog in the first argument)
    for (int j = 0; j <= i; ++j) {
      double rhs = -w2 * Fat(i, j) - mem_rho_F(i, j) + mem_F_rho(i, j);
      double v = 2.0 * Fat(i, j) - Fat(i - 1, j) + dt * dt * rhs;
      Fat(i + 1, j) = v;
      Fat(j, i + 1) = v;
    }

    // diagonal: leapfrog in the second argument centred at (i+1, i), whose
    // right-hand side is the first-argument equation at (i, i+1). The second
    // memory integral there runs one panel past t, where M_F is even; that
    // panel contributes krf[0] rho(t_i, t_{i+1}).
    {
      double mem2 = mem_F_rho(i, i + 1) + kk.krf[0] * rho_at(i, i + 1);
      double rhs = -w2 * Fat(i, i + 1) - mem_rho_F(i, i + 1) + mem2;
      Fat(i + 1, i + 1) = 2.0 * Fat(i + 1, i) - Fat(i + 1, i - 1) + dt * dt * rhs;
    }

    double diag = Fat(i + 1, i + 1);
    if (!std::isfinite(diag) || std::abs(diag) > 1e9 * f00)
      throw Error(ErrorKind::Numerical, "two-time evolution diverged");
    if (std::abs(com_check - 1.0) > opt.commutator_tol) {
      std::ostringstream os;
      os << "equal-time commutator " << com_check << " drifted beyond tolerance "
         << opt.commutator_tol;
      throw Error(ErrorKind::Numerical, os.str());
    }
  }

  // Equal-time observables with fourth-order stencils; second-order ones bias
  // pi^2 by O((omega dt)^2/6), visible against the commutator budget.
  static const double c4[5] = {1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0};
  double com = (8.0 * r[1] - r[2]) / (6.0 * dt);
  res.max_commutator_drift = std::abs(com - 1.0);
  for (int i = 2; i <= N - 2; ++i) {
    double phi2 = Fat(i, i);
    double dg = 0.0;
    for (int a = -2; a <= 2; ++a) dg += c4[a + 2] * Fat(i + a, i + a);
    double cross = 0.5 * dg / dt;
    double pi2 = 0.0;
    for (int a = -2; a <= 2; ++a) {
      if (c4[a + 2] == 0.0) continue;
      double inner = 0.0;
      for (int b = -2; b <= 2; ++b) inner += c4[b + 2] * Fat(i + a, i + b);
      pi2 += c4[a + 2] * inner;
    }
    pi2 /= dt * dt;
    CorrelatorTriple tr{phi2, pi2, cross};
    PhaseSpaceArea area = phase_space_area(tr, opt.area_tol);
    res.t.push_back(i * dt);
    res.delta.push_back(area.delta);
    res.entropy.push_back(entropy_from_area(area).s);
    res.commutator.push_back(com);
    res.final_triple = tr;
  }
  if (opt.keep_grid) {
    res.f_grid = std::move(F);
    res.rho_slice = std::move(r);
  }
  return res;
}

}  // namespace decoh
