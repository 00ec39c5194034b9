#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace lrr {

struct CheckResult {
  std::string name;
  bool pass = false;
  double observed = 0.0;   // worst error / statistic seen
  double tolerance = 0.0;  // bound it must satisfy
  std::string detail;
};

// Per-step loss in sigma for a fixed residual; the default is the Gaussian
// log(sigma) + delta^2/(2 sigma^2). Injectable so a deliberately broken loss
// can be shown to fail the argmin check.
using SigmaLoss = std::function<double(double delta, double sigma)>;

CheckResult check_sigma_grid_argmin(std::uint64_t seed, SigmaLoss loss = nullptr);

// Runs the full battery of closed-form and property checks: the fixed-sigma
// MSE equivalence, sigma argmin and alpha-reparameterization minima, analytic
// gradients against central finite differences (Gaussian and skew), the skew
// scale fixed point (stationarity, argmin agreement, sign asymmetry),
// the lambda = 0 reduction, end-to-end leave-one-out loss gradients,
// gradient monotonicity/sign structure, episodic-wrapper conservation, and
// the lag-1 autocorrelation estimator oracles.
std::vector<CheckResult> verify_propositions(std::uint64_t seed = 20240901ULL);

// Prints one line per check; returns the number of failures (0 == success).
int run_verification(std::ostream& out, std::uint64_t seed = 20240901ULL);

}  // namespace lrr
