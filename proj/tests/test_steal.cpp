#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "veridip/data.hpp"
#include "veridip/model_io.hpp"
#include "veridip/errors.hpp"
#include "veridip/oracle.hpp"
#include "veridip/steal.hpp"

using namespace veridip;

namespace {

struct Bench {
  Dataset train, test;
  MlpModel victim;
  Dataset attacker_data;  // the 40% share of the victim's train set
  double victim_test_acc = 0;
};

double accuracy(const MlpModel& model, const Dataset& data) {
  const Matrix probs = forward_proba(model, data.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.rows; ++i) {
    const auto row = probs.row(i);
    const auto arg =
        std::distance(row.begin(), std::max_element(row.begin(), row.end()));
    if (arg == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probs.rows);
}

double agreement(const MlpModel& a, const MlpModel& b, const Matrix& features) {
  const Matrix pa = forward_proba(a, features);
  const Matrix pb = forward_proba(b, features);
  std::size_t same = 0;
  for (std::size_t i = 0; i < pa.rows; ++i) {
    const auto ra = pa.row(i);
    const auto rb = pb.row(i);
    const auto aa = std::distance(ra.begin(), std::max_element(ra.begin(), ra.end()));
    const auto ab = std::distance(rb.begin(), std::max_element(rb.begin(), rb.end()));
    same += aa == ab;
  }
  return static_cast<double>(same) / static_cast<double>(pa.rows);
}

const Bench& bench() {
  static const Bench fixture = [] {
    Bench b;
    const auto data = gen_synthetic(1000, 2, 2, 4.0, 0.0, 2024);
    auto parts = split(data, {0.5, 0.3, 0.2, 9});
    b.train = std::move(parts.train);
    b.test = std::move(parts.test);

    TrainConfig cfg;
    cfg.optimizer = Optimizer::adam;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 150;
    cfg.batch_size = 50;
    cfg.seed = 3;
    b.victim = train(mlp_init({2, 16, 2}, Activation::relu, 41), b.train, cfg).first;
    b.victim_test_acc = accuracy(b.victim, b.test);

    const StealConfig defaults;
    const int share =
        static_cast<int>(defaults.attacker_fraction * b.train.size());
    const auto pair = sample_pair(b.train, b.train, share, 77);
    b.attacker_data = take(b.train, pair.member_ids);
    return b;
  }();
  return fixture;
}

}  // namespace

TEST_CASE("steal_me with zero learning rate returns its initialization") {
  LocalModelOracle victim(bench().victim);
  StealConfig cfg;
  cfg.attack = StealAttack::me;
  cfg.epochs = 1;
  cfg.learning_rate = 0.0;
  cfg.seed = 5;
  const auto student =
      steal_me(victim, bench().attacker_data.features, cfg, {2, 16, 2});
  CHECK(models_equal(student, mlp_init({2, 16, 2}, Activation::relu, 5)));
}

TEST_CASE("steal_me clones a confident victim") {
  const Bench& b = bench();
  CHECK(accuracy(b.victim, b.train) >= 0.99);

  LocalModelOracle victim(b.victim);
  StealConfig cfg;
  cfg.attack = StealAttack::me;
  cfg.epochs = 200;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 50;
  cfg.seed = 8;
  const auto student = steal_me(victim, b.attacker_data.features, cfg, {2, 16, 2});
  CHECK(agreement(student, b.victim, b.test.features) >= 0.90);
}

TEST_CASE("steal_me against a uniform teacher drifts to uniform output") {
  struct UniformOracle final : PredictionOracle {
   protected:
    Matrix do_predict(const Matrix& f) override { return Matrix(f.rows, 2, 0.5); }
  } teacher;

  StealConfig cfg;
  cfg.attack = StealAttack::me;
  cfg.epochs = 200;
  cfg.learning_rate = 1e-2;
  cfg.seed = 6;
  const auto& queries = bench().attacker_data.features;
  const auto student = steal_me(teacher, queries, cfg, {2, 8, 2});
  const Matrix probs = forward_proba(student, queries);
  for (std::size_t i = 0; i < probs.rows; ++i)
    CHECK(*std::max_element(probs.row(i).begin(), probs.row(i).end()) <= 0.6);
}

TEST_CASE("steal_kd limiting cases collapse to train and steal_me") {
  const Bench& b = bench();
  LocalModelOracle victim(b.victim);

  // lambda2 = 0: exactly plain supervised training with the same seed.
  StealConfig kd;
  kd.attack = StealAttack::kd;
  kd.lambda1 = 1.0;
  kd.lambda2 = 0.0;
  kd.epochs = 30;
  kd.learning_rate = 1e-3;
  kd.batch_size = 32;
  kd.seed = 12;
  const auto kd_student =
      steal_kd(victim, b.attacker_data, kd, {2, 16, 2}, Activation::relu);

  TrainConfig plain;
  plain.optimizer = Optimizer::adam;
  plain.learning_rate = 1e-3;
  plain.epochs = 30;
  plain.batch_size = 32;
  plain.seed = 12;
  const auto plain_student =
      train(mlp_init({2, 16, 2}, Activation::relu, 12), b.attacker_data, plain)
          .first;
  CHECK(models_equal(kd_student, plain_student));

  // lambda1 = 0, tau = 1: identical trajectory to model extraction.
  StealConfig soft = kd;
  soft.lambda1 = 0.0;
  soft.lambda2 = 1.0;
  soft.tau = 1.0;
  const auto soft_student =
      steal_kd(victim, b.attacker_data, soft, {2, 16, 2}, Activation::relu);

  LocalModelOracle victim_again(b.victim);
  StealConfig me = soft;
  me.attack = StealAttack::me;
  const auto me_student =
      steal_me(victim_again, b.attacker_data.features, me, {2, 16, 2});
  for (std::size_t l = 0; l < soft_student.layer_count(); ++l)
    for (std::size_t i = 0; i < soft_student.weights[l].data.size(); ++i)
      CHECK(std::abs(soft_student.weights[l].data[i] -
                     me_student.weights[l].data[i]) < 1e-9);
}

TEST_CASE("steal_kd lands near the victim's accuracy") {
  const Bench& b = bench();
  LocalModelOracle victim(b.victim);
  StealConfig cfg;
  cfg.attack = StealAttack::kd;
  cfg.lambda1 = 0.5;
  cfg.lambda2 = 0.5;
  cfg.tau = 1.5;
  cfg.epochs = 200;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 50;
  cfg.seed = 21;
  const auto student =
      steal_kd(victim, b.attacker_data, cfg, {2, 16, 2}, Activation::relu);
  CHECK(accuracy(student, b.test) >= b.victim_test_acc - 0.03);
}

TEST_CASE("steal_ft zero-rate schedule is the identity") {
  const Bench& b = bench();
  StealConfig cfg;
  cfg.attack = StealAttack::ft;
  cfg.epochs = 3;
  cfg.ft_lr_schedule = {{1, 0.0}};
  const auto copy = steal_ft(b.victim, b.attacker_data, cfg);
  CHECK(models_equal(copy, b.victim));
}

TEST_CASE("steal_ft keeps utility and leaves the victim untouched") {
  const Bench& b = bench();
  const auto victim_before = serialize(b.victim);

  StealConfig cfg;
  cfg.attack = StealAttack::ft;
  cfg.epochs = 30;
  cfg.batch_size = 50;
  cfg.seed = 14;
  cfg.ft_lr_schedule = {{1, 0.05}, {11, 0.01}, {21, 0.001}};
  const auto copy = steal_ft(b.victim, b.attacker_data, cfg);

  CHECK(!models_equal(copy, b.victim));
  CHECK(accuracy(copy, b.test) >= b.victim_test_acc - 0.01);
  CHECK(serialize(b.victim) == victim_before);
}

TEST_CASE("steal config validation") {
  StealConfig cfg;
  cfg.attack = StealAttack::ft;
  CHECK_THROWS_AS(validate(cfg), InvalidArgument);  // empty schedule

  cfg.ft_lr_schedule = {{1, 0.1}, {5, 0.2}};
  CHECK_THROWS_AS(validate(cfg), InvalidArgument);  // increasing lr

  cfg.ft_lr_schedule = {{1, 0.1}, {1, 0.05}};
  CHECK_THROWS_AS(validate(cfg), InvalidArgument);  // duplicate epoch

  StealConfig kd;
  kd.attack = StealAttack::kd;
  kd.lambda1 = 0.0;
  kd.lambda2 = 0.0;
  CHECK_THROWS_AS(validate(kd), InvalidArgument);

  kd.lambda2 = 0.5;
  kd.tau = 0.0;
  CHECK_THROWS_AS(validate(kd), InvalidArgument);

  StealConfig me;
  me.attack = StealAttack::me;
  me.attacker_fraction = 0.0;
  CHECK_THROWS_AS(validate(me), InvalidArgument);
}

TEST_CASE("oracle failures surface through steal_me") {
  struct FailingOracle final : PredictionOracle {
   protected:
    Matrix do_predict(const Matrix&) override {
      throw UnreachableError("teacher endpoint down (queries 0..63)");
    }
  } teacher;
  StealConfig cfg;
  cfg.attack = StealAttack::me;
  CHECK_THROWS_AS(
      steal_me(teacher, bench().attacker_data.features, cfg, {2, 8, 2}),
      UnreachableError);
}

TEST_CASE("attacks are deterministic per seed") {
  const Bench& b = bench();
  LocalModelOracle victim(b.victim);
  StealConfig cfg;
  cfg.attack = StealAttack::me;
  cfg.epochs = 20;
  cfg.learning_rate = 1e-3;
  cfg.seed = 33;
  const auto s1 = steal_me(victim, b.attacker_data.features, cfg, {2, 8, 2});
  const auto s2 = steal_me(victim, b.attacker_data.features, cfg, {2, 8, 2});
  CHECK(models_equal(s1, s2));
}
