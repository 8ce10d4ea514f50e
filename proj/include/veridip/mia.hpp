#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "veridip/oracle.hpp"

namespace veridip {

struct MiaConfig {
  double loss_bound = 0;     // B; 0 means "use max_ce_loss()"
  double logit_clamp = 1e-12;
  double sigma_floor = 1e-6;

  double effective_loss_bound() const {
    return loss_bound > 0 ? loss_bound : max_ce_loss();
  }
};

/// Global threshold attack in expectation form: 1 - min(loss, B)/B. Higher
/// means "more likely a member".
double global_score_from_loss(double loss, double loss_bound);

/// ln(p / (1-p)) with p = clamp(exp(-loss), eps_p, 1-eps_p); strictly
/// decreasing in the loss until the clamp engages.
double logit_confidence_from_loss(double loss, double logit_clamp);

std::vector<double> global_scores(PredictionOracle& oracle, const Matrix& features,
                                  const std::vector<int>& labels,
                                  double loss_bound);
std::vector<double> logit_confidences(PredictionOracle& oracle,
                                      const Matrix& features,
                                      const std::vector<int>& labels,
                                      double logit_clamp);

struct GaussPair {
  double mu_in = 0, sigma_in = 0;
  double mu_out = 0, sigma_out = 0;
  int n_in = 0, n_out = 0;
};

/// Sample mean and unbiased (n-1) standard deviation per side, floored at
/// sigma_floor. Each side needs at least two observations.
GaussPair fit_gauss_pair(std::span<const double> in_observations,
                         std::span<const double> out_observations,
                         double sigma_floor);

/// Gaussian density ratio N(phi; mu_in, sigma_in^2) / N(phi; mu_out,
/// sigma_out^2), computed in log space with the exponent clamped to +-700.
double lira_score(double phi, const GaussPair& pair);

enum class AttackTag : std::uint8_t { global, per_sample };

struct ScoreSet {
  std::vector<double> member_scores;
  std::vector<double> nonmember_scores;
  AttackTag tag = AttackTag::global;
};

/// Threshold maximizing TPR - FPR over midpoints of consecutive sorted unique
/// scores, ties toward the smaller candidate. All-identical scores return
/// that value (advantage 0 there).
double calibrate_threshold(const ScoreSet& scores);

/// TPR - FPR with "positive" meaning score > threshold; without a threshold,
/// the expectation form mean(member) - mean(nonmember).
double advantage(const ScoreSet& scores, std::optional<double> threshold);

}  // namespace veridip
