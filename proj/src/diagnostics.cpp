#include "lrr/diagnostics.hpp"

#include <cmath>

#include "lrr/rng.hpp"

namespace lrr {

namespace {

// Lag-1 correlation of the pooled within-episode pairs, centered at the
// pooled sample mean and normalized by the two leg norms:
//   rho = sum (x_t - m)(x_{t+1} - m) / sqrt(sum (x_t - m)^2 * sum (x_{t+1} - m)^2)
// Cauchy-Schwarz bounds it in [-1, 1]; an alternating sequence gives exactly
// -1; pairs never straddle an episode boundary.
double lag1_from_pairs(const std::vector<std::vector<double>>& episodes) {
  long pairs = 0;
  long n = 0;
  double sum = 0.0;
  for (const auto& ep : episodes) {
    for (double v : ep) {
      sum += v;
      ++n;
    }
    if (ep.size() >= 2) pairs += static_cast<long>(ep.size()) - 1;
  }
  if (pairs < 2) throw DomainError("lag1_autocorr: need at least 2 lag pairs (length >= 3)");
  const double m = sum / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (const auto& ep : episodes) {
    for (std::size_t t = 0; t + 1 < ep.size(); ++t) {
      const double dx = ep[t] - m;
      const double dy = ep[t + 1] - m;
      sxy += dx * dy;
      sxx += dx * dx;
      syy += dy * dy;
    }
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    throw DomainError("lag1_autocorr: degenerate variance (constant reward sequence)");
  }
  const double rho = sxy / std::sqrt(sxx * syy);
  return std::clamp(rho, -1.0, 1.0);
}

}  // namespace

double lag1_autocorr(const std::vector<double>& rewards) {
  if (rewards.size() < 3) throw DomainError("lag1_autocorr: need length >= 3");
  return lag1_from_pairs({rewards});
}

double lag1_autocorr(const std::vector<std::vector<double>>& episodes) {
  return lag1_from_pairs(episodes);
}

std::pair<double, double> autocorr_ci(double rho1, long n) {
  if (n <= 3) throw DomainError("autocorr_ci: requires n > 3");
  if (!(std::abs(rho1) < 1.0)) throw DomainError("autocorr_ci: requires |rho1| < 1");
  const double z = std::atanh(rho1);
  const double half = 1.96 / std::sqrt(static_cast<double>(n - 3));
  return {std::tanh(z - half), std::tanh(z + half)};
}

AutocorrReport measure_env_autocorr(Env& env, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw DomainError("measure_env_autocorr: episodes must be >= 1");
  RngStream action_rng = RngStream(seed).substream("diag_actions");
  const EnvSpec& spec = env.spec();

  std::vector<std::vector<double>> reward_runs;
  long n = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(derive_seed(seed, "diag_env", static_cast<std::uint64_t>(ep)));
    std::vector<double> rewards;
    while (true) {
      Vec a(spec.action_dim);
      for (int d = 0; d < spec.action_dim; ++d) {
        a(d) = action_rng.uniform(spec.action_low(d), spec.action_high(d));
      }
      const StepResult r = env.step(a);
      rewards.push_back(r.reward);
      ++n;
      if (r.terminated || r.truncated) break;
    }
    reward_runs.push_back(std::move(rewards));
  }

  AutocorrReport report;
  report.environment = spec.name;
  report.n = n;
  report.rho1 = lag1_autocorr(reward_runs);
  std::tie(report.ci_low, report.ci_high) = autocorr_ci(report.rho1, n);
  return report;
}

}  // namespace lrr
