#pragma once

#include <vector>

namespace decoh {

struct RateFit {
  double gamma_dec = 0.0;      // fitted decoherence rate, -slope of ln|delta|
  double delta_ms_used = 1.0;  // asymptote actually subtracted in the fit
  double t_lo = 0.0;           // fit window actually used
  double t_hi = 0.0;
  double residual = 0.0;       // rms residual of the log-linear fit
  int n_points = 0;
  bool envelope = false;       // fitted peak envelope because delta oscillates
};

// Log-linear fit of |delta_ms - delta(t)|. Early times before t_drop are
// discarded; the window must span at least two e-folds. When the deviation
// changes sign inside the window the fit falls back to the envelope of local
// peaks of |deviation|. A discretised series carries an O(dt^2) bias in its
// asymptote; when the tail has settled onto a plateau the fit subtracts that
// plateau instead of the supplied delta_ms, and reports it as delta_ms_used.
RateFit extract_rate(const std::vector<double>& t, const std::vector<double>& delta,
                     double delta_ms, double t_drop, double residual_max = 0.5);

}  // namespace decoh
