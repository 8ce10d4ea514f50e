#include "veridip/mia.hpp"

#include <algorithm>
#include <cmath>

#include "veridip/errors.hpp"

namespace veridip {

double global_score_from_loss(double loss, double loss_bound) {
  if (loss_bound <= 0) throw InvalidArgument("loss bound must be positive");
  return 1.0 - std::min(loss, loss_bound) / loss_bound;
}

double logit_confidence_from_loss(double loss, double logit_clamp) {
  if (logit_clamp <= 0 || logit_clamp >= 0.5)
    throw InvalidArgument("logit clamp must lie in (0, 0.5)");
  const double p = std::clamp(std::exp(-loss), logit_clamp, 1.0 - logit_clamp);
  return std::log(p / (1.0 - p));
}

std::vector<double> global_scores(PredictionOracle& oracle, const Matrix& features,
                                  const std::vector<int>& labels,
                                  double loss_bound) {
  auto losses = oracle_losses(oracle, features, labels);
  for (double& v : losses) v = global_score_from_loss(v, loss_bound);
  return losses;
}

std::vector<double> logit_confidences(PredictionOracle& oracle,
                                      const Matrix& features,
                                      const std::vector<int>& labels,
                                      double logit_clamp) {
  auto losses = oracle_losses(oracle, features, labels);
  for (double& v : losses) v = logit_confidence_from_loss(v, logit_clamp);
  return losses;
}

namespace {

struct Moments {
  double mean = 0, stddev = 0;
};

Moments unbiased_moments(std::span<const double> values, double sigma_floor) {
  Moments m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  double sq = 0;
  for (double v : values) sq += (v - m.mean) * (v - m.mean);
  m.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  m.stddev = std::max(m.stddev, sigma_floor);
  return m;
}

}  // namespace

GaussPair fit_gauss_pair(std::span<const double> in_observations,
                         std::span<const double> out_observations,
                         double sigma_floor) {
  if (sigma_floor <= 0) throw InvalidArgument("sigma floor must be positive");
  if (in_observations.size() < 2 || out_observations.size() < 2)
    throw InsufficientShadowsError(
        "need at least two in- and two out-observations per sample");
  GaussPair pair;
  const auto in = unbiased_moments(in_observations, sigma_floor);
  const auto out = unbiased_moments(out_observations, sigma_floor);
  pair.mu_in = in.mean;
  pair.sigma_in = in.stddev;
  pair.mu_out = out.mean;
  pair.sigma_out = out.stddev;
  pair.n_in = static_cast<int>(in_observations.size());
  pair.n_out = static_cast<int>(out_observations.size());
  return pair;
}

double lira_score(double phi, const GaussPair& pair) {
  const auto log_density = [](double x, double mu, double sigma) {
    const double d = (x - mu) / sigma;
    return -0.5 * d * d - std::log(sigma);
  };
  double log_ratio = log_density(phi, pair.mu_in, pair.sigma_in) -
                     log_density(phi, pair.mu_out, pair.sigma_out);
  log_ratio = std::clamp(log_ratio, -700.0, 700.0);
  return std::exp(log_ratio);
}

double calibrate_threshold(const ScoreSet& scores) {
  if (scores.member_scores.empty() || scores.nonmember_scores.empty())
    throw InvalidArgument("calibration needs scores on both sides");

  std::vector<double> unique_scores = scores.member_scores;
  unique_scores.insert(unique_scores.end(), scores.nonmember_scores.begin(),
                       scores.nonmember_scores.end());
  std::sort(unique_scores.begin(), unique_scores.end());
  unique_scores.erase(std::unique(unique_scores.begin(), unique_scores.end()),
                      unique_scores.end());
  if (unique_scores.size() == 1) return unique_scores.front();

  double best_t = 0, best_adv = -2.0;
  for (std::size_t i = 0; i + 1 < unique_scores.size(); ++i) {
    const double t = 0.5 * (unique_scores[i] + unique_scores[i + 1]);
    const double adv = advantage(scores, t);
    if (adv > best_adv) {  // strict: ties keep the smaller candidate
      best_adv = adv;
      best_t = t;
    }
  }
  return best_t;
}

double advantage(const ScoreSet& scores, std::optional<double> threshold) {
  if (scores.member_scores.empty() || scores.nonmember_scores.empty())
    throw InvalidArgument("advantage needs scores on both sides");

  if (!threshold) {
    double m = 0, nm = 0;
    for (double v : scores.member_scores) m += v;
    for (double v : scores.nonmember_scores) nm += v;
    return m / static_cast<double>(scores.member_scores.size()) -
           nm / static_cast<double>(scores.nonmember_scores.size());
  }

  const double t = *threshold;
  std::size_t tp = 0, fp = 0;
  for (double v : scores.member_scores) tp += v > t;
  for (double v : scores.nonmember_scores) fp += v > t;
  return static_cast<double>(tp) / static_cast<double>(scores.member_scores.size()) -
         static_cast<double>(fp) /
             static_cast<double>(scores.nonmember_scores.size());
}

}  // namespace veridip
