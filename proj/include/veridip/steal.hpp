#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "veridip/nn.hpp"
#include "veridip/oracle.hpp"

namespace veridip {

enum class StealAttack : std::uint8_t { me, kd, ft };

struct StealConfig {
  StealAttack attack = StealAttack::me;
  double lambda1 = 0.5;  // KD hard-label weight
  double lambda2 = 0.5;  // KD soft-target weight
  double tau = 1.5;      // KD temperature
  int epochs = 100;
  double learning_rate = 1e-3;
  int batch_size = 32;
  std::uint64_t seed = 0;
  // FT only: (1-indexed epoch, absolute lr), lrs strictly decreasing; the
  // large first rate erases the old boundary, the decay restores utility.
  std::vector<std::pair<int, double>> ft_lr_schedule;
  double attacker_fraction = 0.4;  // share of victim train data the attacker holds
};

void validate(const StealConfig& cfg);

/// Model extraction: a fresh student fits the victim's soft predictions on
/// the query set. Ground-truth labels never enter (none are accepted).
MlpModel steal_me(PredictionOracle& victim, const Matrix& query_features,
                  const StealConfig& cfg,
                  const std::vector<std::uint32_t>& student_dims,
                  Activation activation = Activation::relu);

/// Knowledge distillation: lambda1 * CE(student, y) + lambda2 * CE over
/// temperature-softened teacher/student distributions.
MlpModel steal_kd(PredictionOracle& victim, const Dataset& labeled_data,
                  const StealConfig& cfg,
                  const std::vector<std::uint32_t>& student_dims,
                  Activation activation = Activation::relu);

/// Fine-tuning: continues plain SGD from the victim's own weights following
/// ft_lr_schedule. The victim object is left untouched.
MlpModel steal_ft(const MlpModel& victim, const Dataset& labeled_data,
                  const StealConfig& cfg);

}  // namespace veridip
