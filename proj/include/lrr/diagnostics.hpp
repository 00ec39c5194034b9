#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lrr/common.hpp"
#include "lrr/env.hpp"

namespace lrr {

struct AutocorrReport {
  double rho1 = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  long n = 0;  // pooled sample count
  std::string environment;
};

// Lag-1 sample autocorrelation, computed as the correlation between the
// series and itself shifted by one step. Bounded in [-1, 1] and exactly -1
// for a perfectly alternating sequence. Needs length >= 3 and nonzero
// variance in both shifted halves.
double lag1_autocorr(const std::vector<double>& rewards);

// Pooled variant: lag pairs are formed within each episode only, so episode
// boundaries contribute no cross terms.
double lag1_autocorr(const std::vector<std::vector<double>>& episodes);

// 95% Fisher z-transform interval tanh(atanh(rho1) +- 1.96/sqrt(n-3)).
std::pair<double, double> autocorr_ci(double rho1, long n);

// Rolls episodes with uniform-random actions and reports the lag-1
// autocorrelation of the env's dense per-step rewards with its 95% CI.
AutocorrReport measure_env_autocorr(Env& env, int episodes, std::uint64_t seed);

}  // namespace lrr
