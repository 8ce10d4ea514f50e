#include "veridip/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "veridip/accountant.hpp"
#include "veridip/errors.hpp"
#include "veridip/rng.hpp"

namespace veridip {

double max_ce_loss() { return -std::log(kProbClamp); }

std::size_t MlpModel::param_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l)
    total += static_cast<std::size_t>(layer_dims[l + 1]) * layer_dims[l] +
             layer_dims[l + 1];
  return total;
}

bool models_equal(const MlpModel& a, const MlpModel& b) {
  return a.layer_dims == b.layer_dims && a.activation == b.activation &&
         a.weights == b.weights && a.biases == b.biases;
}

namespace {

void check_architecture(const std::vector<std::uint32_t>& dims) {
  if (dims.size() < 2)
    throw InvalidArgument("architecture needs at least input and output layers");
  for (auto w : dims)
    if (w == 0) throw InvalidArgument("zero-width layer");
  if (dims.back() < 2) throw InvalidArgument("class count must be at least 2");
}

void check_features(const MlpModel& model, const Matrix& features) {
  if (features.cols != model.input_dim())
    throw InvalidArgument("feature width " + std::to_string(features.cols) +
                          " does not match model input dim " +
                          std::to_string(model.input_dim()));
  for (double v : features.data)
    if (!std::isfinite(v)) throw InvalidArgument("non-finite feature value");
}

double activate(double z, Activation act) {
  return act == Activation::relu ? (z > 0 ? z : 0.0) : std::tanh(z);
}

// Derivative expressed through the activated value a = act(z).
double activate_deriv(double a, Activation act) {
  return act == Activation::relu ? (a > 0 ? 1.0 : 0.0) : 1.0 - a * a;
}

void softmax_rows(Matrix& m) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    auto row = m.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
}

}  // namespace

MlpModel mlp_init(const std::vector<std::uint32_t>& layer_dims,
                  Activation activation, std::uint64_t seed) {
  check_architecture(layer_dims);
  MlpModel model;
  model.layer_dims = layer_dims;
  model.activation = activation;
  model.seed = seed;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t fan_in = layer_dims[l];
    const std::size_t fan_out = layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_out, fan_in);
    for (double& v : w.data) v = rng.uniform(-limit, limit);
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(fan_out, 0.0);
  }
  return model;
}

namespace {

// Forward pass keeping every layer's activated output (the input counts as
// layer 0); the last entry holds raw logits.
std::vector<Matrix> forward_trace(const MlpModel& model, const Matrix& x) {
  std::vector<Matrix> acts;
  acts.reserve(model.layer_count() + 1);
  acts.push_back(x);
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const Matrix& in = acts.back();
    const Matrix& w = model.weights[l];
    const auto& b = model.biases[l];
    Matrix out(in.rows, w.rows);
    const bool last = l + 1 == model.layer_count();
    for (std::size_t i = 0; i < in.rows; ++i) {
      const auto in_row = in.row(i);
      auto out_row = out.row(i);
      for (std::size_t o = 0; o < w.rows; ++o) {
        double z = b[o];
        const auto w_row = w.row(o);
        for (std::size_t j = 0; j < w.cols; ++j) z += w_row[j] * in_row[j];
        out_row[o] = last ? z : activate(z, model.activation);
      }
    }
    acts.push_back(std::move(out));
  }
  return acts;
}

}  // namespace

Matrix forward_logits(const MlpModel& model, const Matrix& features) {
  check_features(model, features);
  return forward_trace(model, features).back();
}

Matrix forward_proba(const MlpModel& model, const Matrix& features) {
  Matrix probs = forward_logits(model, features);
  softmax_rows(probs);
  return probs;
}

std::vector<double> ce_loss(const Matrix& probs, const std::vector<int>& labels) {
  if (labels.size() != probs.rows)
    throw InvalidArgument("label count does not match probability rows");
  std::vector<double> losses(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols)
      throw InvalidArgument("label " + std::to_string(y) + " out of range at row " +
                            std::to_string(i));
    const double p = std::clamp(probs(i, y), kProbClamp, 1.0);
    losses[i] = -std::log(p);
  }
  return losses;
}

namespace {

// Backprop for a batch given the output-layer delta (dLoss/dlogits, already
// including any 1/n factor). Appends gradients flattened in serialization
// order: W0 row-major, b0, W1, b1, ...
std::vector<double> backprop(const MlpModel& model, const std::vector<Matrix>& acts,
                             Matrix delta) {
  std::vector<double> flat(model.param_count(), 0.0);

  // Gradient block offsets per layer.
  std::vector<std::size_t> offsets(model.layer_count());
  std::size_t off = 0;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    offsets[l] = off;
    off += model.weights[l].data.size() + model.biases[l].size();
  }

  for (std::size_t l = model.layer_count(); l-- > 0;) {
    const Matrix& in = acts[l];
    const Matrix& w = model.weights[l];
    double* w_grad = flat.data() + offsets[l];
    double* b_grad = w_grad + w.data.size();

    for (std::size_t i = 0; i < delta.rows; ++i) {
      const auto d_row = delta.row(i);
      const auto in_row = in.row(i);
      for (std::size_t o = 0; o < w.rows; ++o) {
        const double d = d_row[o];
        if (d == 0.0) continue;
        double* wg = w_grad + o * w.cols;
        for (std::size_t j = 0; j < w.cols; ++j) wg[j] += d * in_row[j];
        b_grad[o] += d;
      }
    }

    if (l == 0) break;
    Matrix prev_delta(delta.rows, w.cols, 0.0);
    for (std::size_t i = 0; i < delta.rows; ++i) {
      const auto d_row = delta.row(i);
      auto p_row = prev_delta.row(i);
      for (std::size_t o = 0; o < w.rows; ++o) {
        const double d = d_row[o];
        if (d == 0.0) continue;
        const auto w_row = w.row(o);
        for (std::size_t j = 0; j < w.cols; ++j) p_row[j] += d * w_row[j];
      }
      const auto a_row = acts[l].row(i);
      for (std::size_t j = 0; j < w.cols; ++j)
        p_row[j] *= activate_deriv(a_row[j], model.activation);
    }
    delta = std::move(prev_delta);
  }
  return flat;
}

}  // namespace

std::vector<double> grad_batch(const MlpModel& model, const Matrix& features,
                               const std::vector<int>& labels) {
  check_features(model, features);
  if (labels.size() != features.rows)
    throw InvalidArgument("label count does not match feature rows");
  const auto acts = forward_trace(model, features);
  Matrix delta = acts.back();
  softmax_rows(delta);
  const double inv_n = 1.0 / static_cast<double>(features.rows);
  for (std::size_t i = 0; i < delta.rows; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= delta.cols)
      throw InvalidArgument("label out of range");
    auto row = delta.row(i);
    row[y] -= 1.0;
    for (double& v : row) v *= inv_n;
  }
  return backprop(model, acts, std::move(delta));
}

std::vector<std::vector<double>> grad_per_example(const MlpModel& model,
                                                  const Matrix& features,
                                                  const std::vector<int>& labels) {
  check_features(model, features);
  if (labels.size() != features.rows)
    throw InvalidArgument("label count does not match feature rows");
  std::vector<std::vector<double>> grads;
  grads.reserve(features.rows);
  Matrix single(1, features.cols);
  for (std::size_t i = 0; i < features.rows; ++i) {
    std::copy(features.row(i).begin(), features.row(i).end(), single.row(0).begin());
    grads.push_back(grad_batch(model, single, {labels[i]}));
  }
  return grads;
}

void validate(const TrainConfig& cfg) {
  if (cfg.learning_rate < 0) throw InvalidArgument("learning rate must be >= 0");
  if (cfg.epochs < 1) throw InvalidArgument("epochs must be at least 1");
  if (cfg.batch_size < 1) throw InvalidArgument("batch size must be positive");
  int prev = 0;
  for (const auto& [epoch, mult] : cfg.lr_schedule) {
    if (epoch <= prev)
      throw InvalidArgument("lr schedule epochs must be strictly increasing");
    if (mult < 0) throw InvalidArgument("lr multiplier must be >= 0");
    prev = epoch;
  }
}

namespace {

double scheduled_rate(const std::vector<std::pair<int, double>>& schedule,
                      double base, int epoch) {
  double rate = base;
  for (const auto& [from_epoch, value] : schedule) {
    if (from_epoch <= epoch) rate = base * value;
  }
  return rate;
}

struct AdamState {
  std::vector<double> m, v;
  long t = 0;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

void apply_step(MlpModel& model, const std::vector<double>& grad, double lr,
                Optimizer opt, AdamState& adam) {
  std::vector<double> update;
  const double* step = grad.data();
  if (opt == Optimizer::adam) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++adam.t;
    update.resize(grad.size());
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam.t));
    for (std::size_t i = 0; i < grad.size(); ++i) {
      adam.m[i] = beta1 * adam.m[i] + (1 - beta1) * grad[i];
      adam.v[i] = beta2 * adam.v[i] + (1 - beta2) * grad[i] * grad[i];
      update[i] = (adam.m[i] / bc1) / (std::sqrt(adam.v[i] / bc2) + eps);
    }
    step = update.data();
  }
  std::size_t idx = 0;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    for (double& w : model.weights[l].data) w -= lr * step[idx++];
    for (double& b : model.biases[l]) b -= lr * step[idx++];
  }
}

Matrix gather_rows(const Matrix& src, const std::vector<int>& perm,
                   std::size_t begin, std::size_t end) {
  Matrix out(end - begin, src.cols);
  for (std::size_t i = begin; i < end; ++i)
    std::copy(src.row(perm[i]).begin(), src.row(perm[i]).end(),
              out.row(i - begin).begin());
  return out;
}

// Output-layer delta and mean loss for one batch under the active loss form.
struct BatchLoss {
  Matrix delta;
  double mean_loss = 0;
};

BatchLoss batch_delta(const Matrix& logits, const std::vector<int>& labels,
                      const Matrix* teacher_rows, const DistillTargets* distill) {
  const std::size_t n = logits.rows;
  const std::size_t k = logits.cols;
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix probs = logits;
  softmax_rows(probs);

  BatchLoss out;
  out.delta = Matrix(n, k, 0.0);

  if (distill == nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = std::clamp(probs(i, labels[i]), kProbClamp, 1.0);
      out.mean_loss += -std::log(p) * inv_n;
      for (std::size_t c = 0; c < k; ++c)
        out.delta(i, c) = (probs(i, c) - (static_cast<int>(c) == labels[i])) * inv_n;
    }
    return out;
  }

  if (distill->kind == DistillKind::me) {
    // CE against the teacher's full soft distribution; labels never enter.
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < k; ++c) {
        const double q = (*teacher_rows)(i, c);
        const double p = std::clamp(probs(i, c), kProbClamp, 1.0);
        out.mean_loss += -q * std::log(p) * inv_n;
        out.delta(i, c) = (probs(i, c) - q) * inv_n;
      }
    }
    return out;
  }

  // KD: lambda1 * CE(student, y) + lambda2 * CE over temperature-softened
  // distributions. Teacher logits are recovered as log-probabilities; the
  // softmax constant cancels inside the temperature softmax.
  const double tau = distill->tau;
  Matrix student_soft = logits;
  for (double& v : student_soft.data) v /= tau;
  softmax_rows(student_soft);

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> teacher_soft(k);
    double mx = -1e300;
    for (std::size_t c = 0; c < k; ++c) {
      teacher_soft[c] =
          std::log(std::clamp((*teacher_rows)(i, c), kProbClamp, 1.0)) / tau;
      mx = std::max(mx, teacher_soft[c]);
    }
    double sum = 0;
    for (double& v : teacher_soft) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : teacher_soft) v /= sum;

    const double p_y = std::clamp(probs(i, labels[i]), kProbClamp, 1.0);
    out.mean_loss += -distill->lambda1 * std::log(p_y) * inv_n;
    for (std::size_t c = 0; c < k; ++c) {
      const double ps = std::clamp(student_soft(i, c), kProbClamp, 1.0);
      out.mean_loss += -distill->lambda2 * teacher_soft[c] * std::log(ps) * inv_n;
      double d = distill->lambda1 *
                 (probs(i, c) - (static_cast<int>(c) == labels[i]));
      d += distill->lambda2 / tau * (student_soft(i, c) - teacher_soft[c]);
      out.delta(i, c) = d * inv_n;
    }
  }
  return out;
}

struct EvalMetrics {
  double loss = 0, acc = 0;
};

EvalMetrics evaluate(const MlpModel& model, const Matrix& features,
                     const std::vector<int>& targets) {
  const Matrix probs = forward_proba(model, features);
  const auto losses = ce_loss(probs, targets);
  EvalMetrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.rows; ++i) {
    m.loss += losses[i];
    const auto row = probs.row(i);
    const auto arg =
        std::distance(row.begin(), std::max_element(row.begin(), row.end()));
    if (arg == targets[i]) ++correct;
  }
  m.loss /= static_cast<double>(probs.rows);
  m.acc = static_cast<double>(correct) / static_cast<double>(probs.rows);
  return m;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const auto row = m.row(i);
    out[i] = static_cast<int>(
        std::distance(row.begin(), std::max_element(row.begin(), row.end())));
  }
  return out;
}

}  // namespace

std::pair<MlpModel, std::vector<EpochStats>> train(const MlpModel& init,
                                                   const Dataset& data,
                                                   const TrainConfig& cfg,
                                                   const Dataset* eval,
                                                   const DistillTargets* distill) {
  validate(cfg);
  validate(data);
  check_features(init, data.features);
  if (distill != nullptr) {
    if (distill->teacher_probs.rows != data.size() ||
        distill->teacher_probs.cols != init.class_count())
      throw InvalidArgument("teacher probability shape does not match dataset");
    if (distill->kind == DistillKind::kd && distill->tau <= 0)
      throw InvalidArgument("KD temperature must be positive");
    if (distill->kind == DistillKind::kd &&
        distill->lambda1 + distill->lambda2 <= 0)
      throw InvalidArgument("KD mix weights must not both be zero");
  }

  MlpModel model = init;
  AdamState adam(model.param_count());
  std::vector<EpochStats> history;
  history.reserve(cfg.epochs);

  const std::size_t n = data.size();
  std::vector<int> perm(n);

  // Accuracy target: dataset labels, or the teacher's argmax when the loss
  // never consumes labels (ME).
  std::vector<int> acc_targets = data.labels;
  if (distill != nullptr && distill->kind == DistillKind::me)
    acc_targets = argmax_rows(distill->teacher_probs);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // The epoch's permutation depends only on (seed, epoch), not on history.
    std::iota(perm.begin(), perm.end(), 0);
    Rng shuffle_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(perm);
    const double lr = scheduled_rate(cfg.lr_schedule, cfg.learning_rate, epoch);

    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const Matrix x = gather_rows(data.features, perm, begin, end);
      std::vector<int> y(end - begin);
      for (std::size_t i = begin; i < end; ++i) y[i - begin] = data.labels[perm[i]];

      Matrix teacher_rows;
      if (distill != nullptr)
        teacher_rows = gather_rows(distill->teacher_probs, perm, begin, end);

      const auto acts = forward_trace(model, x);
      auto batch = batch_delta(acts.back(), y,
                               distill ? &teacher_rows : nullptr, distill);
      if (!std::isfinite(batch.mean_loss))
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch));
      const auto grad = backprop(model, acts, std::move(batch.delta));
      apply_step(model, grad, lr, cfg.optimizer, adam);
    }

    EpochStats stats;
    stats.epoch = epoch;
    const auto train_metrics = evaluate(model, data.features, acc_targets);
    stats.train_loss = train_metrics.loss;
    stats.train_acc = train_metrics.acc;
    if (eval != nullptr) {
      const auto test_metrics = evaluate(model, eval->features, eval->labels);
      stats.test_loss = test_metrics.loss;
      stats.test_acc = test_metrics.acc;
    }
    if (!std::isfinite(stats.train_loss))
      throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch));
    history.push_back(stats);
  }
  return {std::move(model), std::move(history)};
}

void validate(const DpConfig& cfg, std::size_t train_size) {
  if (cfg.clip_threshold <= 0) throw InvalidArgument("clip threshold must be > 0");
  if (cfg.noise_multiplier <= 0)
    throw InvalidArgument("noise multiplier must be > 0");
  if (cfg.target_delta <= 0 || cfg.target_delta >= 1)
    throw InvalidArgument("delta must lie in (0, 1)");
  if (cfg.epochs < 1) throw InvalidArgument("epochs must be at least 1");
  if (cfg.batch_size < 1) throw InvalidArgument("batch size must be positive");
  if (cfg.learning_rate < 0) throw InvalidArgument("learning rate must be >= 0");
  if (train_size == 0) throw DataError("dataset is empty");
}

DpTrainResult dp_train(const MlpModel& init, const Dataset& data,
                       const DpConfig& cfg) {
  validate(cfg, data.size());
  validate(data);
  check_features(init, data.features);

  MlpModel model = init;
  const std::size_t n = data.size();
  const std::size_t param_count = model.param_count();
  std::vector<int> perm(n);

  // Separate stream for the Gaussian mechanism so noise draws do not
  // interleave with the shuffle stream.
  Rng noise_rng(mix_seed(cfg.seed, 0x6e6f697365ULL));

  DpTrainResult result;
  const double clip = cfg.clip_threshold;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(perm.begin(), perm.end(), 0);
    Rng shuffle_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(perm);

    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const std::size_t batch_rows = end - begin;
      const Matrix x = gather_rows(data.features, perm, begin, end);
      std::vector<int> y(batch_rows);
      for (std::size_t i = begin; i < end; ++i) y[i - begin] = data.labels[perm[i]];

      const auto grads = grad_per_example(model, x, y);
      std::vector<double> mean_grad(param_count, 0.0);
      for (const auto& g : grads) {
        double sq = 0;
        for (double v : g) sq += v * v;
        const double norm = std::sqrt(sq);
        const double scale = norm > clip ? clip / norm : 1.0;
        result.max_postclip_norm =
            std::max(result.max_postclip_norm, norm * scale);
        for (std::size_t i = 0; i < param_count; ++i)
          mean_grad[i] += g[i] * scale;
      }
      const double inv_b = 1.0 / static_cast<double>(batch_rows);
      const double noise_std = cfg.noise_multiplier * clip * inv_b;
      for (double& v : mean_grad) {
        v *= inv_b;
        v += noise_std * noise_rng.normal();
      }

      std::size_t idx = 0;
      for (std::size_t l = 0; l < model.layer_count(); ++l) {
        for (double& w : model.weights[l].data)
          w -= cfg.learning_rate * mean_grad[idx++];
        for (double& b : model.biases[l])
          b -= cfg.learning_rate * mean_grad[idx++];
      }
      ++result.steps;

      bool finite = true;
      for (const auto& w : model.weights)
        for (double v : w.data) finite = finite && std::isfinite(v);
      if (!finite)
        throw DivergenceError("non-finite parameters at epoch " +
                              std::to_string(epoch));
    }
  }

  result.sampling_rate =
      std::min(1.0, static_cast<double>(cfg.batch_size) / static_cast<double>(n));
  const auto profile = rdp_subsampled_gaussian(
      result.sampling_rate, cfg.noise_multiplier, result.steps);
  const auto [epsilon, order] = rdp_to_epsilon(profile, cfg.target_delta);
  result.spent_epsilon = epsilon;
  result.best_rdp_order = order;
  result.model = std::move(model);
  return result;
}

}  // namespace veridip
