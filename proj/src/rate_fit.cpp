#include "decoh/rate_fit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "decoh/errors.hpp"

namespace decoh {

namespace {
// Fit-window depth: stop once |deviation| has fallen this many e-folds below
// its peak. Keeps the window inside the exponential regime while staying well
// above the two e-folds the fit requires.
constexpr double kEfoldCap = 6.0;
}  // namespace

RateFit extract_rate(const std::vector<double>& t, const std::vector<double>& delta,
                     double delta_ms, double t_drop, double residual_max) {
  if (t.size() != delta.size())
    throw Error(ErrorKind::Validation, "time and area series have different lengths");
  if (t.size() < 8) throw Error(ErrorKind::Validation, "series too short for a rate fit");
  for (size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1]))
      throw Error(ErrorKind::Validation, "time series must be strictly increasing");
  if (!std::isfinite(delta_ms))
    throw Error(ErrorKind::Validation, "stationary area must be finite");

  // The discretised series relaxes to its own asymptote, which carries the
  // O(dt^2) stepper bias relative to the analytic stationary area. Fitting
  // against the provided value would bottom out on that offset, so when the
  // series has settled onto a plateau the provided value cannot explain, use
  // the tail plateau as the subtraction point and report it. When the tail
  // offset is no larger than the decay still in progress across the tail
  // window itself, the provided value is consistent and is kept: overriding it
  // there would bias a clean exponential.
  double used = delta_ms;
  {
    size_t nt = std::max<size_t>(4, t.size() / 10);
    double tail_mean = 0.0, tail_min = delta.back(), tail_max = delta.back();
    for (size_t i = delta.size() - nt; i < delta.size(); ++i) {
      tail_mean += delta[i];
      tail_min = std::min(tail_min, delta[i]);
      tail_max = std::max(tail_max, delta[i]);
    }
    tail_mean /= double(nt);
    double lo = *std::min_element(delta.begin(), delta.end());
    double hi = *std::max_element(delta.begin(), delta.end());
    double range = hi - lo;
    bool settled = range > 0.0 && (tail_max - tail_min) < 0.02 * range &&
                   std::abs(tail_mean - delta_ms) < 0.1 * std::max(range, std::abs(delta_ms));
    bool inconsistent = std::abs(tail_mean - delta_ms) >
                        5.0 * (tail_max - tail_min) + 1e-9 * std::max(1.0, std::abs(delta_ms));
    if (settled && inconsistent) used = tail_mean;
  }

  std::vector<double> tv, dv;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_drop) continue;
    tv.push_back(t[i]);
    dv.push_back(used - delta[i]);
  }
  if (tv.size() < 8)
    throw Error(ErrorKind::FitFailed, "fewer than 8 samples after dropping the transient");

  // Late-time plateau of |deviation| is the numerical floor; cut it off so it
  // cannot bias the slope. While the decay is still ongoing this only trims
  // the last fraction of an e-fold.
  size_t ntail = std::max<size_t>(4, tv.size() / 50);
  std::vector<double> tail_abs;
  for (size_t i = tv.size() - ntail; i < tv.size(); ++i) tail_abs.push_back(std::abs(dv[i]));
  std::nth_element(tail_abs.begin(), tail_abs.begin() + tail_abs.size() / 2, tail_abs.end());
  double floor_cut = 3.0 * tail_abs[tail_abs.size() / 2];

  // Cap the window at kEfoldCap e-folds below the peak deviation as well: far
  // below that the approach is no longer exponential (spectral-edge power-law
  // tail) and would bias the slope. A pure exponential is unaffected.
  double peak = 0.0;
  for (double d : dv) peak = std::max(peak, std::abs(d));
  double cut = std::max(floor_cut, peak * std::exp(-kEfoldCap));
  if (!(cut > 0.0))
    throw Error(ErrorKind::FitFailed, "deviation from the stationary area is below the noise floor");

  // Truncate after the LAST sample above the cut: an oscillatory deviation
  // dips through zero every half period, and cutting at the first dip would
  // discard the window the envelope fit needs. For a monotone decay this is
  // the same point as the first dip below the floor.
  size_t last = 0;
  for (size_t i = tv.size(); i-- > 0;) {
    if (std::abs(dv[i]) >= cut) {
      last = i + 1;
      break;
    }
  }
  if (last < tv.size()) {
    tv.resize(last);
    dv.resize(last);
  }
  if (tv.size() < 8)
    throw Error(ErrorKind::FitFailed, "deviation from the stationary area is below the noise floor");

  int flips = 0;
  for (size_t i = 1; i < dv.size(); ++i)
    if ((dv[i] > 0.0) != (dv[i - 1] > 0.0)) ++flips;

  RateFit fit;
  fit.delta_ms_used = used;
  std::vector<double> tf, yf;
  if (flips == 0) {
    for (size_t i = 0; i < tv.size(); ++i) {
      tf.push_back(tv[i]);
      yf.push_back(std::log(std::abs(dv[i])));
    }
  } else {
    // Under-damped relaxation: fit the envelope of |deviation| peaks.
    fit.envelope = true;
    std::vector<double> pt, pv;
    for (size_t i = 1; i + 1 < dv.size(); ++i) {
      double a = std::abs(dv[i]);
      if (a > std::abs(dv[i - 1]) && a >= std::abs(dv[i + 1])) {
        pt.push_back(tv[i]);
        pv.push_back(a);
      }
    }
    if (pt.size() < 4)
      throw Error(ErrorKind::FitFailed, "oscillatory deviation with fewer than 4 envelope peaks");
    for (size_t i = 1; i < pv.size(); ++i)
      if (pv[i] > 1.1 * pv[i - 1])
        throw Error(ErrorKind::FitFailed, "envelope of |deviation| is not decaying");
    for (size_t i = 0; i < pt.size(); ++i) {
      tf.push_back(pt[i]);
      yf.push_back(std::log(pv[i]));
    }
  }

  double span = *std::max_element(yf.begin(), yf.end()) - *std::min_element(yf.begin(), yf.end());
  if (span < 2.0) {
    std::ostringstream os;
    os << "fit window spans only " << span << " e-folds, need at least 2";
    throw Error(ErrorKind::FitFailed, os.str());
  }

  double n = double(tf.size());
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (size_t i = 0; i < tf.size(); ++i) {
    st += tf[i];
    sy += yf[i];
    stt += tf[i] * tf[i];
    sty += tf[i] * yf[i];
  }
  double denom = n * stt - st * st;
  if (denom <= 0.0) throw Error(ErrorKind::FitFailed, "degenerate fit window");
  double slope = (n * sty - st * sy) / denom;
  double intercept = (sy - slope * st) / n;
  if (!(slope < 0.0))
    throw Error(ErrorKind::FitFailed, "deviation from the stationary area is not decaying");

  double ss = 0.0;
  for (size_t i = 0; i < tf.size(); ++i) {
    double r = yf[i] - (intercept + slope * tf[i]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  if (fit.residual > residual_max) {
    std::ostringstream os;
    os << "rms residual " << fit.residual << " exceeds " << residual_max;
    throw Error(ErrorKind::FitFailed, os.str());
  }

  fit.gamma_dec = -slope;
  fit.t_lo = tf.front();
  fit.t_hi = tf.back();
  fit.n_points = int(tf.size());
  return fit;
}

}  // namespace decoh
