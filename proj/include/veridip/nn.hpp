#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "veridip/data.hpp"
#include "veridip/matrix.hpp"

namespace veridip {

enum class Activation : std::uint8_t { relu = 0, tanh = 1 };

/// Probabilities are clamped to [kProbClamp, 1] inside ce_loss, so per-example
/// losses are bounded by -log(kProbClamp) ~= 27.631.
inline constexpr double kProbClamp = 1e-12;
double max_ce_loss();

struct MlpModel {
  std::vector<std::uint32_t> layer_dims;    // input, hidden..., class count
  std::vector<Matrix> weights;              // weights[l]: dims[l+1] x dims[l]
  std::vector<std::vector<double>> biases;  // biases[l]: dims[l+1]
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;                   // init-time record, not serialized

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t class_count() const { return layer_dims.back(); }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t param_count() const;
};

/// Exact parameter equality (dims, activation, every weight and bias bit).
bool models_equal(const MlpModel& a, const MlpModel& b);

/// Xavier-uniform init: each weight uniform in +-sqrt(6/(fan_in+fan_out)),
/// biases zero. Bit-identical for equal (layer_dims, activation, seed).
MlpModel mlp_init(const std::vector<std::uint32_t>& layer_dims,
                  Activation activation, std::uint64_t seed);

Matrix forward_logits(const MlpModel& model, const Matrix& features);
Matrix forward_proba(const MlpModel& model, const Matrix& features);

/// Per-example cross-entropy -log(p[y]) with p clamped to [kProbClamp, 1].
std::vector<double> ce_loss(const Matrix& probs, const std::vector<int>& labels);

/// Gradient of the mean cross-entropy over the batch, flattened in
/// serialization order (W0 row-major, b0, W1, b1, ...).
std::vector<double> grad_batch(const MlpModel& model, const Matrix& features,
                               const std::vector<int>& labels);

/// One gradient per example (of that example's own loss); their mean equals
/// grad_batch up to floating-point associativity.
std::vector<std::vector<double>> grad_per_example(const MlpModel& model,
                                                  const Matrix& features,
                                                  const std::vector<int>& labels);

enum class Optimizer : std::uint8_t { sgd, adam };

struct TrainConfig {
  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 1e-3;
  int epochs = 1;
  int batch_size = 32;
  // (1-indexed epoch, multiplier); from each listed epoch on, the effective
  // rate is learning_rate * multiplier. Epochs must be strictly increasing.
  std::vector<std::pair<int, double>> lr_schedule;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0, train_acc = 0;
  std::optional<double> test_loss, test_acc;
};

enum class DistillKind : std::uint8_t { me, kd };

/// Teacher-side targets for stolen-copy training. teacher_probs rows align
/// with the training dataset rows.
struct DistillTargets {
  DistillKind kind = DistillKind::me;
  Matrix teacher_probs;
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double tau = 1.5;
};

/// Mini-batch training, a pure function of (model, data, cfg): the per-epoch
/// shuffle stream is seeded with mix_seed(cfg.seed, epoch). With distill
/// targets the loss switches to the ME/KD forms and accuracy is measured
/// against the teacher's argmax.
std::pair<MlpModel, std::vector<EpochStats>> train(
    const MlpModel& init, const Dataset& data, const TrainConfig& cfg,
    const Dataset* eval = nullptr, const DistillTargets* distill = nullptr);

struct DpConfig {
  double clip_threshold = 1.0;   // C
  double noise_multiplier = 1.0; // z; noise scale is always z * C
  double target_delta = 1e-5;
  int epochs = 1;
  int batch_size = 32;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
};

void validate(const DpConfig& cfg, std::size_t train_size);

struct DpTrainResult {
  MlpModel model;
  double spent_epsilon = 0;
  double best_rdp_order = 0;
  int steps = 0;
  double sampling_rate = 0;
  double max_postclip_norm = 0;  // over all examples and steps
};

/// DP-SGD: clips every per-example gradient to L2 norm <= C, averages, adds
/// N(0, (z*C/batch)^2) noise per coordinate, steps with plain SGD. Epsilon is
/// composed by the RDP accountant at (q = batch/n, z, steps, delta).
DpTrainResult dp_train(const MlpModel& init, const Dataset& data,
                       const DpConfig& cfg);

}  // namespace veridip
