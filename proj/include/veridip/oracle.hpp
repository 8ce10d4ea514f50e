#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "veridip/matrix.hpp"
#include "veridip/nn.hpp"

namespace veridip {

/// Uniform black-box query interface over models. Counts one query per sample
/// row; an optional budget refuses requests that would exceed it, leaving the
/// counter untouched.
class PredictionOracle {
 public:
  virtual ~PredictionOracle() = default;

  Matrix predict_probs(const Matrix& features);

  std::uint64_t query_count() const { return query_count_; }
  void set_query_budget(std::optional<std::uint64_t> budget) { budget_ = budget; }

 protected:
  virtual Matrix do_predict(const Matrix& features) = 0;

 private:
  std::uint64_t query_count_ = 0;
  std::optional<std::uint64_t> budget_;
};

class LocalModelOracle final : public PredictionOracle {
 public:
  explicit LocalModelOracle(MlpModel model) : model_(std::move(model)) {}
  const MlpModel& model() const { return model_; }

 protected:
  Matrix do_predict(const Matrix& features) override {
    return forward_proba(model_, features);
  }

 private:
  MlpModel model_;
};

/// Client for the /predict endpoint. Splits requests into batches, retries
/// transient failures with exponential backoff, and validates that returned
/// rows are probability vectors.
class RemoteHttpOracle final : public PredictionOracle {
 public:
  explicit RemoteHttpOracle(std::string base_url, int timeout_ms = 5000,
                            int max_retries = 3, int batch_size = 64);
  ~RemoteHttpOracle() override;

 protected:
  Matrix do_predict(const Matrix& features) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int batch_size_;
};

/// Opens a local or remote oracle depending on whether `target` looks like an
/// http(s) URL or a model file path.
std::unique_ptr<PredictionOracle> open_oracle(const std::string& target,
                                              int timeout_ms = 5000,
                                              int max_retries = 3);

/// Per-sample cross-entropy losses computed client-side from oracle
/// probabilities.
std::vector<double> oracle_losses(PredictionOracle& oracle, const Matrix& features,
                                  const std::vector<int>& labels);

}  // namespace veridip
