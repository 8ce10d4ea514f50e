#include "veridip/oracle.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "veridip/errors.hpp"
#include "veridip/model_io.hpp"

namespace veridip {

Matrix PredictionOracle::predict_probs(const Matrix& features) {
  if (budget_ && query_count_ + features.rows > *budget_)
    throw BudgetExceededError("query budget of " + std::to_string(*budget_) +
                              " samples exceeded");
  Matrix probs = do_predict(features);
  query_count_ += features.rows;
  return probs;
}

struct RemoteHttpOracle::Impl {
  httplib::Client client;
  int max_retries;

  Impl(const std::string& url, int timeout_ms, int retries)
      : client(url), max_retries(retries) {
    client.set_connection_timeout(0, timeout_ms * 1000);
    client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    client.set_keep_alive(true);
  }
};

RemoteHttpOracle::RemoteHttpOracle(std::string base_url, int timeout_ms,
                                   int max_retries, int batch_size)
    : impl_(std::make_unique<Impl>(base_url, timeout_ms, max_retries)),
      batch_size_(batch_size) {
  if (batch_size_ < 1) throw InvalidArgument("batch size must be positive");
}

RemoteHttpOracle::~RemoteHttpOracle() = default;

namespace {

Matrix parse_probs(const std::string& body, std::size_t expected_rows) {
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw ProtocolError("prediction endpoint returned invalid JSON");
  }
  if (!reply.contains("probs") || !reply["probs"].is_array())
    throw ProtocolError("prediction reply is missing 'probs'");
  const auto& rows = reply["probs"];
  if (rows.size() != expected_rows)
    throw ProtocolError("prediction reply has " + std::to_string(rows.size()) +
                        " rows, expected " + std::to_string(expected_rows));

  Matrix probs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (!row.is_array() || row.empty())
      throw ProtocolError("probability row " + std::to_string(i) + " malformed");
    if (i == 0) probs = Matrix(expected_rows, row.size());
    if (row.size() != probs.cols)
      throw ProtocolError("ragged probability rows");
    double sum = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!row[j].is_number())
        throw ProtocolError("non-numeric probability value");
      const double p = row[j].get<double>();
      if (!std::isfinite(p) || p < 0)
        throw ProtocolError("invalid probability value");
      probs(i, j) = p;
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw ProtocolError("probability row " + std::to_string(i) +
                          " does not sum to 1");
  }
  return probs;
}

}  // namespace

Matrix RemoteHttpOracle::do_predict(const Matrix& features) {
  Matrix all(features.rows, 0);
  bool first = true;

  for (std::size_t begin = 0; begin < features.rows;
       begin += static_cast<std::size_t>(batch_size_)) {
    const std::size_t end =
        std::min(features.rows, begin + static_cast<std::size_t>(batch_size_));

    nlohmann::json request;
    auto& rows = request["features"] = nlohmann::json::array();
    for (std::size_t i = begin; i < end; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (double v : features.row(i)) row.push_back(v);
      rows.push_back(std::move(row));
    }
    const std::string body = request.dump();

    httplib::Result res;
    std::string last_error = "connection failed";
    for (int attempt = 0; attempt <= impl_->max_retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(
            std::chrono::milliseconds(100LL << (attempt - 1)));
      res = impl_->client.Post("/predict", body, "application/json");
      if (!res) {
        last_error = "no response (" + httplib::to_string(res.error()) + ")";
        continue;
      }
      if (res->status >= 500) {
        last_error = "server error " + std::to_string(res->status);
        continue;
      }
      break;
    }
    const std::string range = " (queries " + std::to_string(begin) + ".." +
                              std::to_string(end - 1) + ")";
    if (!res || res->status >= 500)
      throw UnreachableError("prediction endpoint unreachable after retries: " +
                             last_error + range);
    if (res->status != 200)
      throw ProtocolError("prediction endpoint returned status " +
                          std::to_string(res->status) + ": " + res->body + range);

    Matrix batch = parse_probs(res->body, end - begin);
    if (first) {
      all = Matrix(features.rows, batch.cols);
      first = false;
    }
    if (batch.cols != all.cols) throw ProtocolError("class count changed mid-run");
    std::copy(batch.data.begin(), batch.data.end(),
              all.data.begin() + static_cast<std::ptrdiff_t>(begin * all.cols));
  }
  return all;
}

std::unique_ptr<PredictionOracle> open_oracle(const std::string& target,
                                              int timeout_ms, int max_retries) {
  if (target.rfind("http://", 0) == 0 || target.rfind("https://", 0) == 0)
    return std::make_unique<RemoteHttpOracle>(target, timeout_ms, max_retries);
  return std::make_unique<LocalModelOracle>(load_model(target));
}

std::vector<double> oracle_losses(PredictionOracle& oracle, const Matrix& features,
                                  const std::vector<int>& labels) {
  return ce_loss(oracle.predict_probs(features), labels);
}

}  // namespace veridip
