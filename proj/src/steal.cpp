#include "veridip/steal.hpp"

#include "veridip/errors.hpp"

namespace veridip {

void validate(const StealConfig& cfg) {
  if (cfg.epochs < 1) throw InvalidArgument("epochs must be at least 1");
  if (cfg.batch_size < 1) throw InvalidArgument("batch size must be positive");
  if (cfg.learning_rate < 0) throw InvalidArgument("learning rate must be >= 0");
  if (cfg.attacker_fraction <= 0 || cfg.attacker_fraction > 1)
    throw InvalidArgument("attacker fraction must lie in (0, 1]");
  if (cfg.attack == StealAttack::kd) {
    if (cfg.tau <= 0) throw InvalidArgument("KD temperature must be positive");
    if (cfg.lambda1 < 0 || cfg.lambda2 < 0 || cfg.lambda1 + cfg.lambda2 <= 0)
      throw InvalidArgument("KD mix weights must be nonnegative, not both zero");
  }
  if (cfg.attack == StealAttack::ft) {
    if (cfg.ft_lr_schedule.empty())
      throw InvalidArgument("fine-tune schedule must not be empty");
    int prev_epoch = 0;
    double prev_lr = 1e300;
    for (const auto& [epoch, lr] : cfg.ft_lr_schedule) {
      if (epoch <= prev_epoch)
        throw InvalidArgument("fine-tune schedule epochs must be increasing");
      if (lr < 0) throw InvalidArgument("fine-tune lr must be >= 0");
      if (lr >= prev_lr)
        throw InvalidArgument("fine-tune schedule lrs must be strictly decreasing");
      prev_epoch = epoch;
      prev_lr = lr;
    }
  }
}

namespace {

TrainConfig to_train_config(const StealConfig& cfg) {
  TrainConfig tc;
  tc.optimizer = Optimizer::adam;
  tc.learning_rate = cfg.learning_rate;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.seed = cfg.seed;
  return tc;
}

}  // namespace

MlpModel steal_me(PredictionOracle& victim, const Matrix& query_features,
                  const StealConfig& cfg,
                  const std::vector<std::uint32_t>& student_dims,
                  Activation activation) {
  if (cfg.attack != StealAttack::me)
    throw InvalidArgument("config attack kind must be 'me'");
  validate(cfg);
  if (query_features.rows == 0) throw InvalidArgument("query set is empty");

  DistillTargets targets;
  targets.kind = DistillKind::me;
  targets.teacher_probs = victim.predict_probs(query_features);

  // Dataset shell around the query features; the ME loss never reads labels.
  Dataset queries;
  queries.features = query_features;
  queries.labels.assign(query_features.rows, 0);
  queries.class_count = static_cast<int>(targets.teacher_probs.cols);

  MlpModel student = mlp_init(student_dims, activation, cfg.seed);
  return train(student, queries, to_train_config(cfg), nullptr, &targets).first;
}

MlpModel steal_kd(PredictionOracle& victim, const Dataset& labeled_data,
                  const StealConfig& cfg,
                  const std::vector<std::uint32_t>& student_dims,
                  Activation activation) {
  if (cfg.attack != StealAttack::kd)
    throw InvalidArgument("config attack kind must be 'kd'");
  validate(cfg);
  validate(labeled_data);

  DistillTargets targets;
  targets.kind = DistillKind::kd;
  targets.teacher_probs = victim.predict_probs(labeled_data.features);
  targets.lambda1 = cfg.lambda1;
  targets.lambda2 = cfg.lambda2;
  targets.tau = cfg.tau;

  MlpModel student = mlp_init(student_dims, activation, cfg.seed);
  return train(student, labeled_data, to_train_config(cfg), nullptr, &targets).first;
}

MlpModel steal_ft(const MlpModel& victim, const Dataset& labeled_data,
                  const StealConfig& cfg) {
  if (cfg.attack != StealAttack::ft)
    throw InvalidArgument("config attack kind must be 'ft'");
  validate(cfg);
  validate(labeled_data);

  TrainConfig tc;
  tc.optimizer = Optimizer::sgd;
  tc.learning_rate = 1.0;  // schedule entries are absolute rates
  tc.lr_schedule = cfg.ft_lr_schedule;
  if (cfg.ft_lr_schedule.front().first > 1)
    tc.lr_schedule.insert(tc.lr_schedule.begin(), {1, cfg.learning_rate});
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.seed = cfg.seed;
  return train(victim, labeled_data, tc, nullptr, nullptr).first;
}

}  // namespace veridip
