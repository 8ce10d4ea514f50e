#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "veridip/errors.hpp"
#include "veridip/mia.hpp"
#include "veridip/nn.hpp"
#include "veridip/rng.hpp"

using namespace veridip;

namespace {

// Def.-1 experiment enumerated exactly: a fair coin picks the side, a uniform
// sample is drawn from that side, and the (deterministic) attack answers
// score > t. Returns 2 * Pr[correct] - 1 as an exact rational.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

Rational enumerate_experiment(const std::vector<double>& member_scores,
                              const std::vector<double>& nonmember_scores,
                              double t) {
  const auto n_m = static_cast<std::int64_t>(member_scores.size());
  const auto n_n = static_cast<std::int64_t>(nonmember_scores.size());
  std::int64_t tp = 0, tn = 0;
  for (double s : member_scores) tp += s > t;
  for (double s : nonmember_scores) tn += !(s > t);
  // 2 * (tp/(2 n_m) + tn/(2 n_n)) - 1 == tp/n_m - (n_n - tn)/n_n.
  return {tp * n_n + tn * n_m - n_m * n_n, n_m * n_n};
}

}  // namespace

TEST_CASE("global score hand values") {
  CHECK(global_score_from_loss(0.0, 8.0) == 1.0);
  CHECK(global_score_from_loss(9.5, 8.0) == 0.0);
  CHECK(global_score_from_loss(8.0, 8.0) == 0.0);
  CHECK(global_score_from_loss(2.0, 8.0) == 0.75);
  CHECK_THROWS_AS(global_score_from_loss(1.0, 0.0), InvalidArgument);
}

TEST_CASE("logit confidence hand values and monotonicity") {
  CHECK(logit_confidence_from_loss(std::log(2.0), 1e-12) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(logit_confidence_from_loss(0.0, 1e-12) ==
        doctest::Approx(27.631).epsilon(1e-4));

  double prev = 1e300;
  for (double loss = 0.1; loss < 20.0; loss += 0.37) {
    const double v = logit_confidence_from_loss(loss, 1e-12);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("fit_gauss_pair moments and floor") {
  const std::vector<double> constant{1.0, 1.0, 1.0};
  const std::vector<double> spread{0.0, 2.0};
  const auto pair = fit_gauss_pair(constant, spread, 1e-6);
  CHECK(pair.mu_in == 1.0);
  CHECK(pair.sigma_in == 1e-6);
  CHECK(pair.mu_out == 1.0);
  CHECK(pair.sigma_out == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(pair.n_in == 3);
  CHECK(pair.n_out == 2);

  const std::vector<double> lonely{0.5};
  CHECK_THROWS_AS(fit_gauss_pair(constant, lonely, 1e-6),
                  InsufficientShadowsError);
}

TEST_CASE("lira_score density-ratio values") {
  GaussPair same{0.3, 0.7, 0.3, 0.7, 10, 10};
  for (double phi : {-2.0, 0.0, 0.3, 5.0})
    CHECK(lira_score(phi, same) == doctest::Approx(1.0).epsilon(1e-12));

  GaussPair shifted{2.0, 1.0, 0.0, 1.0, 10, 10};
  CHECK(lira_score(1.0, shifted) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lira_score(2.0, shifted) ==
        doctest::Approx(std::exp(2.0)).epsilon(1e-12));

  // Swapping in/out inverts the ratio.
  GaussPair swapped{0.0, 1.0, 2.0, 1.0, 10, 10};
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const double phi = rng.uniform(-5.0, 5.0);
    CHECK(lira_score(phi, shifted) * lira_score(phi, swapped) ==
          doctest::Approx(1.0).epsilon(1e-9));
  }

  // Extreme separation stays finite through the exponent clamp.
  GaussPair extreme{500.0, 1e-6, -500.0, 1e-6, 10, 10};
  CHECK(std::isfinite(lira_score(500.0, extreme)));
}

TEST_CASE("calibrate_threshold on separable and degenerate sets") {
  ScoreSet separable;
  separable.member_scores = {1.0, 1.0, 1.0};
  separable.nonmember_scores = {0.0, 0.0};
  CHECK(calibrate_threshold(separable) == 0.5);
  CHECK(advantage(separable, 0.5) == 1.0);

  ScoreSet identical;
  identical.member_scores = {0.4, 0.4};
  identical.nonmember_scores = {0.4};
  CHECK(calibrate_threshold(identical) == 0.4);
  CHECK(advantage(identical, 0.4) == 0.0);
}

TEST_CASE("calibrate_threshold matches brute force over candidate grids") {
  ScoreSet scores;
  scores.member_scores = {0.9, 0.6, 0.4};
  scores.nonmember_scores = {0.7, 0.3, 0.1};

  // Brute-force oracle over a dense threshold sweep.
  double best_adv = -2, best_t = 0;
  for (double t = -0.05; t < 1.05; t += 0.001) {
    const double adv = advantage(scores, t);
    if (adv > best_adv + 1e-12) {
      best_adv = adv;
      best_t = t;
    }
  }
  CHECK(best_t > 0.3);
  CHECK(best_t <= 0.4);
  CHECK(best_adv == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  const double t = calibrate_threshold(scores);
  CHECK(t == doctest::Approx(0.35).epsilon(1e-12));
  CHECK(advantage(scores, t) == doctest::Approx(best_adv).epsilon(1e-12));
}

TEST_CASE("calibrated advantage equals randomized brute force") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    ScoreSet scores;
    const int n_m = 2 + static_cast<int>(rng.below(7));
    const int n_n = 2 + static_cast<int>(rng.below(7));
    for (int i = 0; i < n_m; ++i)
      scores.member_scores.push_back(rng.below(6) / 4.0);  // ties likely
    for (int i = 0; i < n_n; ++i)
      scores.nonmember_scores.push_back(rng.below(6) / 4.0);

    // Brute force over the same candidate set: midpoints of consecutive
    // sorted unique scores.
    std::vector<double> all = scores.member_scores;
    all.insert(all.end(), scores.nonmember_scores.begin(),
               scores.nonmember_scores.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    if (all.size() < 2) continue;
    double best = -2, best_t = 0;
    for (std::size_t i = 0; i + 1 < all.size(); ++i) {
      const double cand = 0.5 * (all[i] + all[i + 1]);
      const double adv = advantage(scores, cand);
      if (adv > best) {
        best = adv;
        best_t = cand;
      }
    }

    const double t = calibrate_threshold(scores);
    CHECK(t == best_t);  // ties resolve toward the smaller candidate
    CHECK(advantage(scores, t) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("advantage equals the exact Def.-1 enumeration") {
  // Power-of-two group sizes make TPR and FPR exact dyadic rationals, so the
  // match is bit-exact, not just close.
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    ScoreSet scores;
    const int n_m = 1 << (1 + rng.below(3));  // 2, 4 or 8
    const int n_n = 1 << (1 + rng.below(3));
    for (int i = 0; i < n_m; ++i)
      scores.member_scores.push_back(rng.below(8) / 8.0);
    for (int i = 0; i < n_n; ++i)
      scores.nonmember_scores.push_back(rng.below(8) / 8.0);
    const double t = rng.below(10) / 8.0 - 0.0625;

    const auto exact = enumerate_experiment(scores.member_scores,
                                            scores.nonmember_scores, t);
    CHECK(advantage(scores, t) == exact.value());
  }

  // Odd group sizes agree to one ulp.
  for (int trial = 0; trial < 100; ++trial) {
    ScoreSet scores;
    const int n_m = 2 + static_cast<int>(rng.below(7));
    const int n_n = 2 + static_cast<int>(rng.below(7));
    for (int i = 0; i < n_m; ++i) scores.member_scores.push_back(rng.uniform());
    for (int i = 0; i < n_n; ++i)
      scores.nonmember_scores.push_back(rng.uniform());
    const double t = rng.uniform();
    const auto exact = enumerate_experiment(scores.member_scores,
                                            scores.nonmember_scores, t);
    CHECK(advantage(scores, t) == doctest::Approx(exact.value()).epsilon(1e-15));
  }
}

TEST_CASE("advantage bounds, expectation form and errors") {
  ScoreSet scores;
  scores.member_scores = {0.9, 0.6, 0.4};
  scores.nonmember_scores = {0.7, 0.3, 0.1};
  CHECK(advantage(scores, 0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(advantage(scores, std::nullopt) ==
        doctest::Approx((1.9 / 3.0) - (1.1 / 3.0)).epsilon(1e-12));

  ScoreSet empty;
  empty.member_scores = {1.0};
  CHECK_THROWS_AS(advantage(empty, 0.5), InvalidArgument);
  CHECK_THROWS_AS(calibrate_threshold(empty), InvalidArgument);

  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    ScoreSet random_scores;
    for (int i = 0; i < 5; ++i) {
      random_scores.member_scores.push_back(rng.uniform());
      random_scores.nonmember_scores.push_back(rng.uniform());
    }
    const double adv = advantage(random_scores, rng.uniform());
    CHECK(adv >= -1.0);
    CHECK(adv <= 1.0);
  }
}

TEST_CASE("global expectation advantage equals the loss-difference form") {
  // mean(member score) - mean(nonmember score) must equal
  // E_out[loss/B] - E_in[loss/B] when losses stay below B.
  Rng rng(31);
  const double bound = max_ce_loss();
  ScoreSet scores;
  std::vector<double> member_losses, nonmember_losses;
  for (int i = 0; i < 40; ++i) {
    member_losses.push_back(rng.uniform(0.0, 5.0));
    nonmember_losses.push_back(rng.uniform(0.0, 5.0));
    scores.member_scores.push_back(
        global_score_from_loss(member_losses.back(), bound));
    scores.nonmember_scores.push_back(
        global_score_from_loss(nonmember_losses.back(), bound));
  }
  double out_mean = 0, in_mean = 0;
  for (double l : member_losses) in_mean += l / bound / 40.0;
  for (double l : nonmember_losses) out_mean += l / bound / 40.0;
  CHECK(advantage(scores, std::nullopt) ==
        doctest::Approx(out_mean - in_mean).epsilon(1e-12));
}
