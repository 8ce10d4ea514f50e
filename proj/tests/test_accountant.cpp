#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "veridip/accountant.hpp"
#include "veridip/errors.hpp"

using namespace veridip;

namespace {

// Independent high-precision reference for the standard normal CDF:
// 0.5 + integral of the pdf over [0, x] by composite Simpson in long double.
// With 2^16 panels over |x| <= 8 the quadrature error is far below 1e-14.
double normal_cdf_reference(double x) {
  const long double ax = std::fabs(static_cast<long double>(x));
  const int panels = 1 << 16;
  const long double h = ax / panels;
  const long double inv_sqrt_2pi = 0.39894228040143267793994605993438L;
  const auto pdf = [&](long double t) { return expl(-0.5L * t * t) * inv_sqrt_2pi; };

  long double sum = pdf(0.0L) + pdf(ax);
  for (int i = 1; i < panels; ++i) sum += pdf(h * i) * (i % 2 == 1 ? 4.0L : 2.0L);
  const long double integral = sum * h / 3.0L;
  const long double phi = x >= 0 ? 0.5L + integral : 0.5L - integral;
  return static_cast<double>(phi);
}

}  // namespace

TEST_CASE("normal_cdf matches the quadrature reference to 1e-12 on [-8, 8]") {
  for (int i = 0; i <= 160; ++i) {
    const double x = -8.0 + i * 0.1;
    CHECK(std::abs(normal_cdf(x) - normal_cdf_reference(x)) < 1e-12);
  }
  CHECK(normal_cdf(0.0) == 0.5);
}

TEST_CASE("rdp closed form at q = 1") {
  const auto profile = rdp_subsampled_gaussian(1.0, 1.0, 1, {2.0});
  CHECK(profile.rdp_values[0] == 1.0);  // alpha / (2 z^2) exactly

  const auto p2 = rdp_subsampled_gaussian(1.0, 2.0, 10, {4.0});
  CHECK(p2.rdp_values[0] == 10.0 * 4.0 / 8.0);

  // Full default order list: exact closed form per order.
  const auto full = rdp_subsampled_gaussian(1.0, 3.0, 7);
  for (std::size_t i = 0; i < full.orders.size(); ++i)
    CHECK(full.rdp_values[i] == 7.0 * full.orders[i] / (2.0 * 9.0));
}

TEST_CASE("rdp composes additively in steps") {
  const auto one = rdp_subsampled_gaussian(0.1, 1.3, 5);
  const auto two = rdp_subsampled_gaussian(0.1, 1.3, 10);
  for (std::size_t i = 0; i < one.orders.size(); ++i)
    CHECK(two.rdp_values[i] == doctest::Approx(2.0 * one.rdp_values[i]).epsilon(1e-12));
}

TEST_CASE("rdp is monotone in q and finite") {
  const auto lo = rdp_subsampled_gaussian(0.01, 1.0, 100);
  const auto mid = rdp_subsampled_gaussian(0.1, 1.0, 100);
  const auto hi = rdp_subsampled_gaussian(1.0, 1.0, 100);
  for (std::size_t i = 0; i < lo.orders.size(); ++i) {
    CHECK(lo.rdp_values[i] >= 0);
    CHECK(lo.rdp_values[i] <= mid.rdp_values[i]);
    CHECK(mid.rdp_values[i] <= hi.rdp_values[i]);
    CHECK(std::isfinite(hi.rdp_values[i]));
  }
}

TEST_CASE("rdp rejects bad inputs") {
  CHECK_THROWS_AS(rdp_subsampled_gaussian(0.0, 1.0, 1), InvalidArgument);
  CHECK_THROWS_AS(rdp_subsampled_gaussian(1.1, 1.0, 1), InvalidArgument);
  CHECK_THROWS_AS(rdp_subsampled_gaussian(0.5, 0.0, 1), InvalidArgument);
  CHECK_THROWS_AS(rdp_subsampled_gaussian(0.5, 1.0, 0), InvalidArgument);
  CHECK_THROWS_AS(rdp_subsampled_gaussian(0.5, 1.0, 1, {1.0}), InvalidArgument);
  CHECK_THROWS_AS(rdp_subsampled_gaussian(0.5, 1.0, 1, {2.5}), InvalidArgument);
}

TEST_CASE("rdp_to_epsilon hand check and properties") {
  RdpProfile profile;
  profile.orders = {2.0};
  profile.rdp_values = {1.0};
  profile.steps = 1;
  const auto [eps, order] = rdp_to_epsilon(profile, 1e-5);
  CHECK(eps == doctest::Approx(1.0 + std::log(1e5)).epsilon(1e-12));
  CHECK(order == 2.0);

  CHECK_THROWS_AS(rdp_to_epsilon(profile, 1.0), InvalidArgument);
  CHECK_THROWS_AS(rdp_to_epsilon(profile, 0.0), InvalidArgument);

  // delta -> 1 drives the conversion term to zero.
  const auto [eps_near_one, order2] = rdp_to_epsilon(profile, 1.0 - 1e-12);
  CHECK(eps_near_one == doctest::Approx(1.0).epsilon(1e-9));

  // Doubling all rdp values never decreases epsilon.
  auto doubled = rdp_subsampled_gaussian(0.2, 1.0, 10);
  const auto [eps_base, o1] = rdp_to_epsilon(doubled, 1e-5);
  for (double& v : doubled.rdp_values) v *= 2.0;
  const auto [eps_doubled, o2] = rdp_to_epsilon(doubled, 1e-5);
  CHECK(eps_doubled >= eps_base);
}

TEST_CASE("epsilon decreases as the noise multiplier grows") {
  double prev = 1e300;
  for (double z : {1.0, 2.0, 4.0, 8.0}) {
    const auto profile = rdp_subsampled_gaussian(0.25, z, 200);
    const auto [eps, order] = rdp_to_epsilon(profile, 1e-5);
    CHECK(eps < prev);
    prev = eps;
  }
}

TEST_CASE("min_pvalue_bound reproduces the reported point") {
  // sqrt(sigma0^2 + sigma1^2) = 0.3287 makes the bound 0.156 at eps = 0.1,
  // n_s = 10.
  const double sigma = 0.3287 / std::sqrt(2.0);
  CHECK(min_pvalue_bound(0.1, 10, sigma, sigma) ==
        doctest::Approx(0.156).epsilon(0.013));
  CHECK(std::abs(min_pvalue_bound(0.1, 10, sigma, sigma) - 0.156) < 0.002);

  CHECK(min_pvalue_bound(0.0, 10, sigma, sigma) == 0.5);
  CHECK(min_pvalue_bound(0.0, 9999, 1.0, 2.0) == 0.5);

  // Same sigma, eps = 0.5: oracle value 1 - Phi(6.2411...) ~= 2.2e-10.
  const double p_half = min_pvalue_bound(0.5, 10, sigma, sigma);
  CHECK(p_half == doctest::Approx(2.2e-10).epsilon(0.05));

  CHECK_THROWS_AS(min_pvalue_bound(0.1, 10, 0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(min_pvalue_bound(-0.1, 10, 1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(min_pvalue_bound(0.1, 0, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("min_pvalue_bound is monotone in eps and n_s") {
  double prev = 1.0;
  for (int i = 0; i <= 100; ++i) {
    const double eps = 0.02 * i;
    const double p = min_pvalue_bound(eps, 10, 0.2, 0.25);
    CHECK(p <= prev);
    prev = p;
  }
  CHECK(min_pvalue_bound(0.1, 100, 0.2, 0.25) <=
        min_pvalue_bound(0.1, 10, 0.2, 0.25));
}

TEST_CASE("bound_curve rows are sorted and csv formatted") {
  const std::vector<double> eps{0.5, 0.0, 0.1};
  const std::vector<int> ns{100, 10};
  const auto points = bound_curve(eps, ns, 0.2, 0.2);
  REQUIRE(points.size() == 6);
  CHECK(points[0].n_s == 10);
  CHECK(points[0].epsilon == 0.0);
  CHECK(points[3].n_s == 100);
  for (const auto& p : points)
    if (p.epsilon == 0.0) CHECK(p.min_p == 0.5);
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].n_s == points[i - 1].n_s)
      CHECK(points[i].min_p <= points[i - 1].min_p);
  }
  // Larger pools dominate at equal positive epsilon.
  CHECK(points[4].min_p <= points[1].min_p);

  const auto csv = bound_curve_csv(points);
  CHECK(csv.rfind("epsilon,n_s,sigma_sq_sum,min_p\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);

  CHECK_THROWS_AS(bound_curve({}, ns, 0.2, 0.2), InvalidArgument);
}
