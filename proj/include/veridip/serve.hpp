#pragma once

#include <memory>

#include "veridip/nn.hpp"

namespace veridip {

/// HTTP endpoint over an immutable model:
///   GET  /health  -> 200 "ok"
///   POST /predict {"features": [[...]]} -> 200 {"probs": [[...]]}
/// Malformed or mis-shaped requests get 400 with {"error": "..."}.
class ModelServer {
 public:
  /// Binds immediately; throws Error if the port is busy.
  ModelServer(MlpModel model, int port);
  ~ModelServer();

  ModelServer(const ModelServer&) = delete;
  ModelServer& operator=(const ModelServer&) = delete;

  /// Serves on the calling thread until stop().
  void run();

  /// Serves on a background thread and returns once the listener is up.
  void start_background();

  void stop();

  int port() const;
  std::string base_url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace veridip
