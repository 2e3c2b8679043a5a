#pragma once

#include "hams/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace hams {

struct TuningPolicy {
  double target_rate = 0.70;
  double band_halfwidth = 0.05;
  double delta = 0.2;
  int window = 250;

  static TuningPolicy gradient() { return {}; }
  static TuningPolicy random_walk() { return {0.30, 0.05, 0.2, 250}; }

  void validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("tuning: delta must lie in (0, 1)");
    if (!(target_rate > 0.0 && target_rate < 1.0))
      throw ConfigError("tuning: target rate must lie in (0, 1)");
    if (!(band_halfwidth >= 0.0)) throw ConfigError("tuning: band half-width must be >= 0");
    if (window < 1) throw ConfigError("tuning: window must be at least one iteration");
  }
};

// At epsilon = 1 the first branch returns 1 again (increase_step fixes 1),
// so the cap falls back to the plain ratio to let the tuner leave it.
inline double decrease_step(double epsilon, double delta) {
  if (epsilon >= 1.0) return 1.0 / (1.0 + delta);
  return std::max(1.0 - std::sqrt(1.0 - epsilon), epsilon / (1.0 + delta));
}

inline double increase_step(double epsilon, double delta) {
  return epsilon + epsilon * std::min(1.0 - epsilon, delta);
}

inline double adapt_step_size(double epsilon, double observed_rate, const TuningPolicy& policy) {
  require(epsilon > 0.0 && epsilon <= 1.0, "adapt_step_size: epsilon must lie in (0, 1]");
  if (observed_rate < policy.target_rate - policy.band_halfwidth)
    return decrease_step(epsilon, policy.delta);
  if (observed_rate > policy.target_rate + policy.band_halfwidth)
    return increase_step(epsilon, policy.delta);
  return epsilon;
}

struct TuningTracePoint {
  long iteration = 0;  // iterations completed when the window closed
  double epsilon = 0;  // step size used during the window
  double rate = 0;     // acceptance rate over the window
};

struct TuningResult {
  double epsilon = 0;
  std::vector<TuningTracePoint> trace;
  long accepted = 0;
};

// step(epsilon, rng) advances a chain by one iteration and reports acceptance.
using TunableStep = std::function<bool(double epsilon, RngStream& rng)>;

inline TuningResult tune_chain(const TunableStep& step, double epsilon0,
                               const TuningPolicy& policy, long burn_in, RngStream& rng) {
  policy.validate();
  require(burn_in >= policy.window, "tune_chain: burn-in must cover at least one window");
  require(epsilon0 > 0.0 && epsilon0 <= 1.0, "tune_chain: initial epsilon must lie in (0, 1]");
  TuningResult r;
  double eps = epsilon0;
  long in_window = 0;
  for (long it = 1; it <= burn_in; ++it) {
    if (step(eps, rng)) {
      ++in_window;
      ++r.accepted;
    }
    if (it % policy.window == 0) {
      const double rate = static_cast<double>(in_window) / policy.window;
      r.trace.push_back({it, eps, rate});
      eps = adapt_step_size(eps, rate, policy);
      in_window = 0;
    }
  }
  r.epsilon = eps;
  return r;
}

}  // namespace hams
