#include "veridip/accountant.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "veridip/errors.hpp"

namespace veridip {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::vector<double> default_rdp_orders() {
  std::vector<double> orders;
  for (int a = 2; a <= 64; ++a) orders.push_back(a);
  return orders;
}

namespace {

double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double log_sum_exp(const std::vector<double>& terms) {
  const double mx = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(mx)) return mx;
  double sum = 0;
  for (double t : terms) sum += std::exp(t - mx);
  return mx + std::log(sum);
}

// Per-step RDP of the sampled Gaussian mechanism at an integer order:
//   (1/(alpha-1)) * log sum_{j=0..alpha} C(alpha,j) (1-q)^(alpha-j) q^j
//                                        * exp((j^2 - j) / (2 z^2)).
double sampled_gaussian_rdp_int(double q, double z, int alpha) {
  std::vector<double> terms;
  terms.reserve(alpha + 1);
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  for (int j = 0; j <= alpha; ++j) {
    terms.push_back(log_binomial(alpha, j) + j * log_q + (alpha - j) * log_1mq +
                    (static_cast<double>(j) * j - j) / (2.0 * z * z));
  }
  return log_sum_exp(terms) / (alpha - 1.0);
}

}  // namespace

RdpProfile rdp_subsampled_gaussian(double q, double z, int steps,
                                   std::vector<double> orders) {
  if (q <= 0 || q > 1) throw InvalidArgument("sampling rate must lie in (0, 1]");
  if (z <= 0) throw InvalidArgument("noise multiplier must be positive");
  if (steps < 1) throw InvalidArgument("steps must be at least 1");
  if (orders.empty()) throw InvalidArgument("order list must not be empty");

  RdpProfile profile;
  profile.orders = std::move(orders);
  profile.steps = steps;
  profile.q = q;
  profile.z = z;
  profile.rdp_values.reserve(profile.orders.size());

  for (double alpha : profile.orders) {
    if (alpha <= 1) throw InvalidArgument("RDP orders must be greater than 1");
    if (q == 1.0) {
      profile.rdp_values.push_back(steps * alpha / (2.0 * z * z));
    } else {
      if (alpha != std::floor(alpha))
        throw InvalidArgument("subsampled bound needs integer orders when q < 1");
      profile.rdp_values.push_back(
          sampled_gaussian_rdp_int(q, z, static_cast<int>(alpha)) * steps);
    }
  }
  return profile;
}

std::pair<double, double> rdp_to_epsilon(const RdpProfile& profile, double delta) {
  if (delta <= 0 || delta >= 1) throw InvalidArgument("delta must lie in (0, 1)");
  if (profile.orders.empty() ||
      profile.orders.size() != profile.rdp_values.size())
    throw InvalidArgument("RDP profile is empty or inconsistent");

  double best_eps = std::numeric_limits<double>::infinity();
  double best_order = profile.orders.front();
  const double log_inv_delta = std::log(1.0 / delta);
  for (std::size_t i = 0; i < profile.orders.size(); ++i) {
    const double eps =
        profile.rdp_values[i] + log_inv_delta / (profile.orders[i] - 1.0);
    if (eps < best_eps) {
      best_eps = eps;
      best_order = profile.orders[i];
    }
  }
  return {best_eps, best_order};
}

double min_pvalue_bound(double epsilon, int n_s, double sigma0, double sigma1) {
  if (epsilon < 0) throw InvalidArgument("epsilon must be >= 0");
  if (n_s < 1) throw InvalidArgument("n_s must be at least 1");
  if (sigma0 <= 0 || sigma1 <= 0)
    throw InvalidArgument("score deviations must be positive");
  const double z = (std::exp(epsilon) - 1.0) * std::sqrt(static_cast<double>(n_s)) /
                   std::sqrt(sigma0 * sigma0 + sigma1 * sigma1);
  return 1.0 - normal_cdf(z);
}

std::vector<DpBoundPoint> bound_curve(std::span<const double> epsilon_grid,
                                      std::span<const int> n_s_list,
                                      double sigma0, double sigma1) {
  if (epsilon_grid.empty() || n_s_list.empty())
    throw InvalidArgument("bound curve grids must not be empty");

  std::vector<double> eps_sorted(epsilon_grid.begin(), epsilon_grid.end());
  std::vector<int> ns_sorted(n_s_list.begin(), n_s_list.end());
  std::sort(eps_sorted.begin(), eps_sorted.end());
  std::sort(ns_sorted.begin(), ns_sorted.end());

  std::vector<DpBoundPoint> points;
  points.reserve(eps_sorted.size() * ns_sorted.size());
  for (int n_s : ns_sorted) {
    for (double eps : eps_sorted) {
      DpBoundPoint p;
      p.epsilon = eps;
      p.n_s = n_s;
      p.sigma_sq_sum = sigma0 * sigma0 + sigma1 * sigma1;
      p.min_p = min_pvalue_bound(eps, n_s, sigma0, sigma1);
      points.push_back(p);
    }
  }
  return points;
}

std::string bound_curve_csv(const std::vector<DpBoundPoint>& points) {
  std::string out = "epsilon,n_s,sigma_sq_sum,min_p\n";
  char buf[128];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%d,%.17g,%.17g\n", p.epsilon, p.n_s,
                  p.sigma_sq_sum, p.min_p);
    out += buf;
  }
  return out;
}

}  // namespace veridip
