#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace veridip {

/// Standard normal CDF via erfc.
double normal_cdf(double x);

/// Integer orders 2..64.
std::vector<double> default_rdp_orders();

struct RdpProfile {
  std::vector<double> orders;
  std::vector<double> rdp_values;  // one per order, >= 0
  int steps = 0;
  double q = 1.0;  // sampling rate
  double z = 1.0;  // noise multiplier
};

/// Renyi-DP of `steps` compositions of the subsampled Gaussian mechanism.
/// q = 1 reduces to the exact closed form steps * alpha / (2 z^2); q < 1 uses
/// the integer-order binomial-expansion upper bound.
RdpProfile rdp_subsampled_gaussian(double q, double z, int steps,
                                   std::vector<double> orders = default_rdp_orders());

/// (epsilon, minimizing order) with epsilon = min over orders of
/// rdp(alpha) + ln(1/delta)/(alpha - 1).
std::pair<double, double> rdp_to_epsilon(const RdpProfile& profile, double delta);

/// Lower bound on the ownership-test p-value for an epsilon-DP model:
/// 1 - Phi((exp(eps) - 1) * sqrt(n_s) / sqrt(sigma0^2 + sigma1^2)).
double min_pvalue_bound(double epsilon, int n_s, double sigma0, double sigma1);

struct DpBoundPoint {
  double epsilon = 0;
  int n_s = 0;
  double sigma_sq_sum = 0;
  double min_p = 0;
};

/// One row per (epsilon, n_s) pair, sorted by (n_s, epsilon).
std::vector<DpBoundPoint> bound_curve(std::span<const double> epsilon_grid,
                                      std::span<const int> n_s_list,
                                      double sigma0, double sigma1);

/// CSV with header `epsilon,n_s,sigma_sq_sum,min_p`, 17-significant-digit
/// decimal floats.
std::string bound_curve_csv(const std::vector<DpBoundPoint>& points);

}  // namespace veridip
