#include "veridip/serve.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "veridip/errors.hpp"

namespace veridip {

struct ModelServer::Impl {
  MlpModel model;
  httplib::Server server;
  int port = 0;
  std::thread worker;
  std::atomic<bool> running{false};
};

namespace {

void send_error(httplib::Response& res, int status, const std::string& message) {
  nlohmann::json j;
  j["error"] = message;
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void handle_predict(const MlpModel& model, const httplib::Request& req,
                    httplib::Response& res) {
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception&) {
    send_error(res, 400, "request body is not valid JSON");
    return;
  }
  if (!body.contains("features") || !body["features"].is_array() ||
      body["features"].empty()) {
    send_error(res, 400, "request needs a nonempty 'features' array");
    return;
  }

  const auto& rows = body["features"];
  Matrix features(rows.size(), model.input_dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (!row.is_array() || row.size() != model.input_dim()) {
      send_error(res, 400,
                 "expected feature width " + std::to_string(model.input_dim()) +
                     ", got " + std::to_string(row.is_array() ? row.size() : 0) +
                     " at row " + std::to_string(i));
      return;
    }
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!row[j].is_number()) {
        send_error(res, 400, "non-numeric feature at row " + std::to_string(i));
        return;
      }
      const double v = row[j].get<double>();
      if (!std::isfinite(v)) {
        send_error(res, 400, "non-finite feature at row " + std::to_string(i));
        return;
      }
      features(i, j) = v;
    }
  }

  const Matrix probs = forward_proba(model, features);
  nlohmann::json reply;
  auto& out = reply["probs"] = nlohmann::json::array();
  for (std::size_t i = 0; i < probs.rows; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (double p : probs.row(i)) row.push_back(p);
    out.push_back(std::move(row));
  }
  res.status = 200;
  res.set_content(reply.dump(), "application/json");
}

}  // namespace

ModelServer::ModelServer(MlpModel model, int port)
    : impl_(std::make_unique<Impl>()) {
  impl_->model = std::move(model);

  // Default httplib options include SO_REUSEPORT, which would let a second
  // server share a live port instead of failing to bind.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR,
               reinterpret_cast<const char*>(&yes), sizeof(yes));
  });

  impl_->server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok", "text/plain");
  });
  impl_->server.Post("/predict",
                     [this](const httplib::Request& req, httplib::Response& res) {
                       handle_predict(impl_->model, req, res);
                     });

  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port("0.0.0.0");
    if (impl_->port <= 0) throw Error("could not bind a free port");
  } else {
    if (!impl_->server.bind_to_port("0.0.0.0", port))
      throw Error("port " + std::to_string(port) + " is busy");
    impl_->port = port;
  }
}

ModelServer::~ModelServer() { stop(); }

void ModelServer::run() {
  impl_->running = true;
  impl_->server.listen_after_bind();
}

void ModelServer::start_background() {
  impl_->running = true;
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void ModelServer::stop() {
  if (!impl_->running.exchange(false)) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

int ModelServer::port() const { return impl_->port; }

std::string ModelServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port);
}

}  // namespace veridip
