#include "decoh/selfmass.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "decoh/errors.hpp"

namespace decoh {
namespace {

constexpr double kPi = 3.141592653589793238462643383279503;

double sgn(double x) { return x >= 0.0 ? 1.0 : -1.0; }

// Bose-Einstein occupation, x > 0.
double bose(double beta, double x) {
  double bx = beta * x;
  if (bx > 700.0) return 0.0;
  return 1.0 / std::expm1(bx);
}

double gk_integrate(const std::function<double(double)>& f, double a, double b) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, a, b, 12, 1e-11, &err);
}

double ts_integrate(const std::function<double(double)>& f, double a, double b) {
  thread_local boost::math::quadrature::tanh_sinh<double> integ(12);
  // Two-argument form: at deep levels the abscissa can round onto an
  // endpoint; every integrand passed here is finite at its endpoints, so
  // plain evaluation is safe and the library handles the collision.
  auto f2 = [&](double x, double /*xc*/) { return f(x); };
  return integ.integrate(f2, a, b, 1e-11);
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / double(n - 1);
  return v;
}

std::vector<double> geomspace(double a, double b, int n) {
  std::vector<double> v(n);
  double la = std::log(a), lb = std::log(b);
  for (int i = 0; i < n; ++i) v[i] = std::exp(la + (lb - la) * i / double(n - 1));
  return v;
}

void sort_unique(std::vector<double>& v, double tol) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  out.reserve(v.size());
  for (double x : v) {
    if (out.empty() || x - out.back() > tol) out.push_back(x);
  }
  v.swap(out);
}

// Monotone cubic (Fritsch-Carlson) node slopes. Evaluation happens through
// stored plain arrays so the spectrum struct stays a POD-ish aggregate that
// can cross the binding layer.
std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y) {
  int n = int(x.size());
  std::vector<double> d(n, 0.0), h(n - 1), del(n - 1);
  for (int i = 0; i < n - 1; ++i) {
    h[i] = x[i + 1] - x[i];
    del[i] = (y[i + 1] - y[i]) / h[i];
  }
  for (int i = 1; i < n - 1; ++i) {
    if (del[i - 1] == 0.0 || del[i] == 0.0 || (del[i - 1] > 0) != (del[i] > 0)) {
      d[i] = 0.0;
    } else {
      double w1 = 2.0 * h[i] + h[i - 1];
      double w2 = h[i] + 2.0 * h[i - 1];
      d[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
    }
  }
  auto endpoint = [](double h0, double h1, double d0, double d1) {
    double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (s * d0 <= 0.0) return 0.0;
    if (d0 * d1 < 0.0 && std::abs(s) > 3.0 * std::abs(d0)) return 3.0 * d0;
    return s;
  };
  d[0] = endpoint(h[0], h[1], del[0], del[1]);
  d[n - 1] = endpoint(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
  return d;
}

double hermite_eval(const std::vector<double>& x, const std::vector<double>& y,
                    const std::vector<double>& d, double xq) {
  if (xq <= x.front()) return y.front();
  if (xq >= x.back()) return y.back();
  auto it = std::upper_bound(x.begin(), x.end(), xq);
  int i = int(it - x.begin()) - 1;
  double h = x[i + 1] - x[i];
  double t = (xq - x[i]) / h;
  double t2 = t * t, t3 = t2 * t;
  return y[i] * (2 * t3 - 3 * t2 + 1) + h * d[i] * (t3 - 2 * t2 + t) +
         y[i + 1] * (-2 * t3 + 3 * t2) + h * d[i + 1] * (t3 - t2);
}

}  // namespace

double QftParams::omega() const { return std::sqrt(k * k + m_phi * m_phi); }

void validate(const QftParams& p) {
  auto bad = [](double v) { return !std::isfinite(v); };
  if (bad(p.m_phi) || bad(p.h) || bad(p.beta) || bad(p.k))
    throw Error(ErrorKind::Validation, "qft parameters must be finite");
  if (p.m_phi <= 0.0) throw Error(ErrorKind::Validation, "m_phi must be positive");
  if (p.beta <= 0.0) throw Error(ErrorKind::Validation, "beta must be positive");
  if (p.k <= 0.0) throw Error(ErrorKind::Validation, "k must be positive");
  if (p.h < 0.0) throw Error(ErrorKind::Validation, "h must be non-negative");
}

std::string perturbativity_warning(const QftParams& p) {
  if (p.h <= 4.0 * p.m_phi) return {};
  std::ostringstream os;
  os << "warning: h/m_phi = " << p.h / p.m_phi
     << " exceeds 4; one-loop results are at best qualitative";
  return os.str();
}

double im_selfmass_vacuum(const QftParams& p, double k0) {
  double a = std::abs(k0);
  if (a <= p.k) return 0.0;
  return -sgn(k0) * p.h * p.h / (32.0 * kPi);
}

double im_selfmass_thermal_closed(const QftParams& p, double k0) {
  if (p.h == 0.0) return 0.0;
  double a = std::abs(k0);
  if (a == 0.0) return 0.0;
  if (p.k < 1e-12 * std::max(1.0, p.m_phi)) {
    // k -> 0 limit: pair cut only, -sgn(k0) h^2/(16 pi) n_B(|k0|/2) thermally.
    return -sgn(k0) * p.h * p.h / (16.0 * kPi) * bose(p.beta, a / 2.0);
  }
  double C = p.h * p.h / (16.0 * kPi * p.k * p.beta);
  double bp = p.beta * (a + p.k) / 2.0;
  double bm = p.beta * std::abs(a - p.k) / 2.0;
  // ln[(1 - e^{-bp}) / (1 - e^{-bm})]; log-divergent at the Landau edge bm = 0.
  if (bm < 1e-280) return -sgn(k0) * 1e150;
  double lnum = bp > 700.0 ? 0.0 : std::log(-std::expm1(-bp));
  double lden = bm > 700.0 ? 0.0 : std::log(-std::expm1(-bm));
  return -sgn(k0) * C * (lnum - lden);
}

double im_selfmass_closed(const QftParams& p, double k0) {
  return im_selfmass_vacuum(p, k0) + im_selfmass_thermal_closed(p, k0);
}

double im_retarded_selfmass(const QftParams& p, double k0) {
  validate(p);
  if (p.h == 0.0) return 0.0;
  double a = std::abs(k0);
  double scale = std::max({p.k, p.m_phi, 1.0 / p.beta});
  if (a < 1e-14 * scale) return 0.0;
  if (std::abs(a - p.k) < 1e-14 * scale) return -sgn(k0) * 1e150;
  double val;
  if (a > p.k) {
    // Decay cut: radial integral over one loop momentum, 1 + n + n weight.
    double lo = (a - p.k) / 2.0, hi = (a + p.k) / 2.0;
    auto f = [&](double q) { return 1.0 + bose(p.beta, q) + bose(p.beta, a - q); };
    val = -p.h * p.h / (32.0 * kPi * p.k) * ts_integrate(f, lo, hi);
  } else {
    // Landau cut: scattering off thermal quanta, pure occupation weight.
    double lo = (p.k - a) / 2.0, hi = (p.k + a) / 2.0;
    auto f = [&](double q) { return bose(p.beta, q); };
    val = -p.h * p.h / (16.0 * kPi * p.k) * ts_integrate(f, lo, hi);
  }
  return sgn(k0) * val;
}

double re_selfmass_vacuum(const QftParams& p, double k0) {
  if (p.h == 0.0) return 0.0;
  double arg = std::abs(k0 * k0 - p.k * p.k) / (p.m_phi * p.m_phi);
  if (arg < 1e-280) arg = 1e-280;
  return p.h * p.h / (32.0 * kPi * kPi) * std::log(arg);
}

double principal_value_dispersion(const std::function<double(double)>& g,
                                  double lo, double hi, double a, double s_edge) {
  double span = hi - lo;
  if (!(span > 0.0)) return 0.0;
  double ee = 1e-11 * std::max(std::abs(s_edge), 1.0);
  bool edge_in = (s_edge - ee > lo) && (s_edge + ee < hi);
  double pa = 1e-12 * std::max(std::abs(hi), 1.0);
  bool active = (a > lo + pa) && (a < hi - pa) &&
                (!edge_in || std::abs(a - s_edge) > 4.0 * ee);

  std::vector<double> bp = {lo, hi};
  if (edge_in) {
    double ring = 1e-3 * std::max(std::abs(s_edge), 1.0);
    for (double x : {s_edge - ring, s_edge - ee, s_edge + ee, s_edge + ring})
      if (x > lo && x < hi) bp.push_back(x);
  }
  double ga = 0.0, gslope = 0.0;
  if (active) {
    ga = g(a);
    double ha = 1e-7 * std::max(1.0, std::abs(a));
    gslope = (g(a + ha) - g(a - ha)) / (2.0 * ha);
    double ring = 1e-3 * std::max(std::abs(a), 1e-3);
    for (double x : {a - ring, a, a + ring})
      if (x > lo && x < hi) bp.push_back(x);
  }
  sort_unique(bp, 1e-14 * span);

  auto integrand = [&](double s) {
    double ds = s - a;
    if (active && std::abs(ds) < 1e-14 * std::max(1.0, std::abs(a))) return gslope;
    return (g(s) - ga) / ds;
  };

  double I = 0.0;
  for (size_t i = 0; i + 1 < bp.size(); ++i) {
    double x0 = bp[i], x1 = bp[i + 1];
    if (!(x1 > x0)) continue;
    double mid = 0.5 * (x0 + x1);
    if (edge_in && mid > s_edge - ee && mid < s_edge + ee) continue;
    bool near_edge = edge_in && (std::abs(x0 - s_edge) <= 2.0 * ee ||
                                 std::abs(x1 - s_edge) <= 2.0 * ee);
    bool first_endpoint = (i == 0) && !active;
    if (near_edge || first_endpoint)
      I += ts_integrate(integrand, x0, x1);
    else
      I += gk_integrate(integrand, x0, x1);
  }
  if (active && ga != 0.0) I += ga * std::log((hi - a) / (a - lo));
  return I / kPi;
}

double re_selfmass_thermal(const QftParams& p, double k0) {
  if (p.h == 0.0) return 0.0;
  double a = k0 * k0;
  double k2 = p.k * p.k;
  double sqrt_smax = std::max({p.k + 80.0 / p.beta,
                               2.0 * std::abs(k0) + p.k + 40.0 / p.beta,
                               10.0 * std::max(1.0, p.m_phi)});
  auto g = [&](double s) {
    return im_selfmass_thermal_closed(p, std::sqrt(std::max(s, 0.0)));
  };
  return principal_value_dispersion(g, 0.0, sqrt_smax * sqrt_smax, a, k2);
}

double re_retarded_selfmass(const QftParams& p, double k0) {
  return re_selfmass_vacuum(p, k0) + re_selfmass_thermal(p, k0);
}

double decay_rate_formula(const QftParams& p) {
  validate(p);
  if (p.h == 0.0) return 0.0;
  double w = p.omega();
  double vac = p.h * p.h / (32.0 * kPi);
  double th;
  if (p.k < 1e-8 * std::max(1.0, p.m_phi)) {
    th = p.h * p.h / (16.0 * kPi) * bose(p.beta, w / 2.0);
  } else {
    double bp = p.beta * (w + p.k) / 2.0;
    double bm = p.beta * (w - p.k) / 2.0;
    double lnum = bp > 700.0 ? 0.0 : std::log(-std::expm1(-bp));
    double lden = bm > 700.0 ? 0.0 : std::log(-std::expm1(-bm));
    th = p.h * p.h / (16.0 * kPi * p.k * p.beta) * (lnum - lden);
  }
  return (vac + th) / w;
}

double SelfMassSpectrum::re_thermal_at(double x) const {
  if (backbone_k0.size() < 4) return 0.0;
  return hermite_eval(backbone_k0, backbone_re_th, backbone_slope, std::abs(x));
}

double SelfMassSpectrum::re_at(double x) const {
  return re_selfmass_vacuum(params, x) + re_thermal_at(x);
}

double SelfMassSpectrum::im_at(double x) const { return im_selfmass_closed(params, x); }

namespace {

std::vector<double> backbone_nodes(const QftParams& p, double lambda) {
  double w = p.omega();
  double top = 1.05 * lambda;
  std::vector<double> v;
  auto add = [&](const std::vector<double>& xs) {
    for (double x : xs)
      if (x >= 0.0 && x <= top) v.push_back(x);
  };
  add(linspace(0.0, 2.0 * p.k, 41));
  for (double f : geomspace(1e-6, 0.5, 14)) {
    v.push_back(p.k * (1.0 - f));
    v.push_back(p.k * (1.0 + f));
  }
  double mid_hi = std::min(4.0 * std::max(w, p.k) + 6.0 / p.beta, top);
  add(linspace(2.0 * p.k, mid_hi, 60));
  if (mid_hi < top) add(geomspace(mid_hi, top, 40));
  add(linspace(0.5 * w, 1.5 * w, 25));
  v.push_back(top);
  sort_unique(v, 1e-9 * top);
  // Keep nodes off the Landau edge where the dispersive part has a kink.
  std::vector<double> out;
  for (double x : v)
    if (std::abs(x - p.k) > 1e-7 * p.k) out.push_back(x);
  return out;
}

// Quasiparticle root of k0^2 = omega^2 + Re M^r(k0), chosen as the sign change
// nearest the perturbative estimate; the dip just above the Landau edge can
// produce spurious crossings at strong coupling.
double find_pole(const QftParams& p, const SelfMassSpectrum& s) {
  double w = p.omega();
  auto D = [&](double x) { return x * x - w * w - s.re_at(x); };
  double est2 = w * w + s.re_thermal_at(w);
  double est = est2 > p.k * p.k * 1.01 ? std::sqrt(est2) : w;
  double xlo = 1.0005 * p.k;
  double xhi = std::max({5.0 * w, p.k + 12.0 / p.beta, w + 10.0 * p.m_phi});
  int n = 4000;
  double best_mid = 0.0, best_d = std::numeric_limits<double>::max();
  double prev_x = xlo, prev_D = D(xlo);
  double root_lo = 0.0, root_hi = 0.0;
  for (int i = 1; i <= n; ++i) {
    double x = xlo + (xhi - xlo) * i / double(n);
    double Dx = D(x);
    if (prev_D == 0.0) prev_D = -1e-300;
    if ((prev_D < 0.0) != (Dx < 0.0)) {
      double mid = 0.5 * (prev_x + x);
      if (std::abs(mid - est) < best_d) {
        best_d = std::abs(mid - est);
        best_mid = mid;
        root_lo = prev_x;
        root_hi = x;
      }
    }
    prev_x = x;
    prev_D = Dx;
  }
  if (best_mid == 0.0) return w;
  double lo = root_lo, hi = root_hi;
  double flo = D(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    double fm = D(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

SelfMassSpectrum tabulate_selfmass(const QftParams& p, int n_grid, double lambda_factor) {
  validate(p);
  if (n_grid < 16) throw Error(ErrorKind::Validation, "n_grid must be at least 16");
  if (lambda_factor < 4.0)
    throw Error(ErrorKind::Validation, "lambda_factor must be at least 4");

  SelfMassSpectrum s;
  s.params = p;
  s.lambda_max = lambda_factor * std::max(p.omega(), 1.0 / p.beta);

  if (p.h > 0.0) {
    s.backbone_k0 = backbone_nodes(p, s.lambda_max);
    s.backbone_re_th.reserve(s.backbone_k0.size());
    for (double x : s.backbone_k0) s.backbone_re_th.push_back(re_selfmass_thermal(p, x));
    s.backbone_slope = pchip_slopes(s.backbone_k0, s.backbone_re_th);
  }

  s.omega_pole = p.h > 0.0 ? find_pole(p, s) : p.omega();
  s.gamma_amp = p.h > 0.0 ? -im_selfmass_closed(p, s.omega_pole) / (2.0 * s.omega_pole) : 0.0;

  // Positive-axis grid: uniform base plus clusters at the Landau edge and the
  // quasiparticle peak. Cluster sizes scale with the point budget so a coarse
  // request genuinely under-resolves the peak.
  int P = n_grid / 2;
  int n_inner = std::max(3, int(0.016 * P));
  int n_wing = std::max(4, int(0.19 * P));
  int n_edge = std::max(4, int(0.073 * P));
  double wp = s.omega_pole;
  double width = std::max(s.gamma_amp, 1e-9 * wp);

  std::vector<double> pos;
  auto add = [&](double x) {
    if (x >= 0.0 && x <= s.lambda_max) pos.push_back(x);
  };
  if (p.h > 0.0) {
    for (double x : linspace(wp - width, wp + width, n_inner)) add(x);
    double Rl = std::max(1.5, (wp - 1.001 * p.k) / width);
    double Rr = std::max(1.5, (0.999 * s.lambda_max - wp) / width);
    for (double r : geomspace(1.0, std::min(3000.0, Rl), n_wing)) add(wp - width * r);
    for (double r : geomspace(1.0, std::min(3000.0, Rr), n_wing)) add(wp + width * r);
    for (double f : geomspace(1e-7, 0.3, n_edge)) {
      add(p.k * (1.0 - f));
      add(p.k * (1.0 + f));
    }
  }
  int n_base = std::max(16, P - int(pos.size()));
  for (double x : linspace(0.0, s.lambda_max, n_base)) add(x);
  sort_unique(pos, 1e-12 * s.lambda_max);
  // The exact edge value is infinite; keep the grid strictly off it.
  {
    std::vector<double> keep;
    for (double x : pos)
      if (std::abs(x - p.k) > 1e-9 * p.k) keep.push_back(x);
    pos.swap(keep);
  }

  for (auto it = pos.rbegin(); it != pos.rend(); ++it)
    if (*it > 0.0) s.k0.push_back(-*it);
  for (double x : pos) s.k0.push_back(x);

  s.re_M.reserve(s.k0.size());
  s.im_M.reserve(s.k0.size());
  for (double x : s.k0) {
    s.re_M.push_back(s.re_at(x));
    s.im_M.push_back(s.im_at(x));
  }
  return s;
}

namespace {

double rho_of(const QftParams& p, const SelfMassSpectrum& s, double x) {
  double im = im_selfmass_closed(p, x);
  if (im == 0.0) return 0.0;
  double w = p.omega();
  double d = x * x - w * w - s.re_at(x);
  return -2.0 * im / (d * d + im * im);
}

// Breakpoints for frequency integrals over the positive axis: Landau edge
// rings, quasiparticle peak windows, then the smooth tail out to lambda_max.
std::vector<double> moment_breakpoints(const QftParams& p, const SelfMassSpectrum& s) {
  double L = s.lambda_max;
  double wp = s.omega_pole;
  double width = std::max(s.gamma_amp, 1e-9 * wp);
  std::vector<double> bp = {0.0, L};
  auto add = [&](double x) {
    if (x > 0.0 && x < L) bp.push_back(x);
  };
  add(0.5 * p.k);
  for (double f : {1e-3, 1e-6, 1e-9}) {
    add(p.k * (1.0 - f));
    add(p.k * (1.0 + f));
  }
  for (double c : {3000.0, 1000.0, 300.0, 100.0, 30.0, 10.0, 3.0, 1.0}) add(wp - c * width);
  add(wp);
  for (double c : {1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0}) add(wp + c * width);
  add(2.0 * wp);
  add(4.0 * wp);
  add(10.0 * wp);
  sort_unique(bp, 1e-13 * L);
  return bp;
}

double sum_over_segments(const std::vector<double>& bp, const QftParams& p,
                         const std::function<double(double)>& f) {
  double total = 0.0;
  double de = 1e-9 * p.k;
  for (size_t i = 0; i + 1 < bp.size(); ++i) {
    double x0 = bp[i], x1 = bp[i + 1];
    if (!(x1 > x0)) continue;
    double mid = 0.5 * (x0 + x1);
    if (std::abs(mid - p.k) < de) continue;  // edge sliver, rho -> 0 like 1/ln^2
    total += gk_integrate(f, x0, x1);
  }
  return total;
}

}  // namespace

StationarySolution spectral_function(const QftParams& p, const SelfMassSpectrum& s) {
  validate(p);
  StationarySolution sol;
  sol.k0 = s.k0;
  sol.omega_pole = s.omega_pole;
  sol.gamma_amp = s.gamma_amp;

  if (p.h == 0.0 || s.gamma_amp < 1e-12 * s.omega_pole) {
    // Free or effectively free: rho is a pair of delta functions, nothing to
    // tabulate; the statistical step takes the analytic path.
    sol.free_limit = true;
    sol.rho.assign(s.k0.size(), 0.0);
    sol.sum_rule = 1.0;
    return sol;
  }

  int in_peak = 0;
  for (double x : s.k0)
    if (std::abs(x - s.omega_pole) <= s.gamma_amp) ++in_peak;
  if (in_peak < 8) {
    std::ostringstream os;
    os << "only " << in_peak << " grid points resolve the quasiparticle width "
       << s.gamma_amp << " at " << s.omega_pole << "; enlarge n_grid";
    throw Error(ErrorKind::GridTooCoarse, os.str());
  }

  sol.rho.reserve(s.k0.size());
  for (double x : s.k0) sol.rho.push_back(rho_of(p, s, x));

  auto bp = moment_breakpoints(p, s);
  auto f = [&](double x) { return x * rho_of(p, s, x) / kPi; };
  double L = s.lambda_max;
  double h2 = p.h * p.h;
  sol.sum_rule = sum_over_segments(bp, p, f) + h2 / (32.0 * kPi * kPi * L * L);
  return sol;
}

StationarySolution stationary_statistical(const QftParams& p, StationarySolution sol,
                                          const SelfMassSpectrum& s) {
  validate(p);
  double w = p.omega();
  if (sol.free_limit) {
    double phi2 = 1.0 / (2.0 * w * std::tanh(p.beta * w / 2.0));
    sol.triple = CorrelatorTriple{phi2, w * w * phi2, 0.0};
    sol.F.assign(sol.k0.size(), 0.0);
    sol.delta_ms = free_thermal_area(p.beta, w).delta;
    sol.s_ms = entropy_from_area(PhaseSpaceArea{sol.delta_ms}).s;
    return sol;
  }

  auto F_of = [&](double x) {
    double ax = std::abs(x);
    if (ax < 1e-300) return 0.0;
    return (bose(p.beta, ax) + 0.5) * rho_of(p, s, x) * sgn(x);
  };

  // Tail decay guard: the pi^2 integrand must be negligible at the grid edge.
  double L = s.lambda_max;
  double peak = std::abs(F_of(s.omega_pole)) * s.omega_pole * s.omega_pole;
  double tail = std::abs(F_of(0.999 * L)) * L * L;
  if (!(tail < 1e-3 * peak))
    throw Error(ErrorKind::Numerical,
                "pi^2 integrand has not decayed at the grid edge; enlarge lambda_factor");

  sol.F.clear();
  sol.F.reserve(sol.k0.size());
  for (double x : sol.k0) sol.F.push_back(F_of(x));
  for (size_t i = 0; i < sol.k0.size(); ++i) {
    if (std::abs(sol.k0[i]) < 1e-300 && i + 1 < sol.k0.size()) {
      // k0 = 0 limit of (n + 1/2) rho sgn is rho'(0)/beta.
      sol.F[i] = sol.rho[i + 1] / (sol.k0[i + 1] * p.beta);
    }
  }

  auto bp = moment_breakpoints(p, s);
  double h2 = p.h * p.h;
  auto f_phi = [&](double x) { return F_of(x) / kPi; };
  auto f_pi = [&](double x) { return x * x * F_of(x) / kPi; };
  double phi2 = sum_over_segments(bp, p, f_phi) + h2 / (96.0 * kPi * kPi * L * L * L);
  double pi2 = sum_over_segments(bp, p, f_pi) + h2 / (32.0 * kPi * kPi * L);
  // F is even in k0 at stationarity, so the mixed moment vanishes identically.
  sol.triple = CorrelatorTriple{phi2, pi2, 0.0};
  sol.delta_ms = phase_space_area(sol.triple).delta;
  sol.s_ms = entropy_from_area(PhaseSpaceArea{sol.delta_ms}).s;
  return sol;
}

StationarySolution solve_stationary(const QftParams& p, int n_grid, double lambda_factor) {
  auto run = [&](double lf) {
    SelfMassSpectrum s = tabulate_selfmass(p, n_grid, lf);
    return stationary_statistical(p, spectral_function(p, s), s);
  };
  try {
    return run(lambda_factor);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Numerical) return run(2.0 * lambda_factor);
    throw;
  }
}

}  // namespace decoh
