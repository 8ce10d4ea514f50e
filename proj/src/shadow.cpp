#include "veridip/shadow.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "veridip/errors.hpp"
#include "veridip/model_io.hpp"
#include "veridip/rng.hpp"

namespace veridip {

namespace {

std::uint32_t dataset_crc(const Dataset& data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(data.features.data.data()),
                static_cast<uInt>(data.features.data.size() * sizeof(double)));
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(data.labels.data()),
                static_cast<uInt>(data.labels.size() * sizeof(int)));
  return static_cast<std::uint32_t>(crc);
}

void check_coverage(const ShadowFarm& farm) {
  const std::size_t n = farm.base.size();
  for (std::size_t j = 0; j < n; ++j) {
    int in_count = 0;
    for (const auto& row : farm.mask) in_count += row[j];
    const int out_count = farm.shadow_count() - in_count;
    if (in_count < 2 || out_count < 2)
      throw CoverageError("sample " + std::to_string(j) + " has " +
                          std::to_string(in_count) + " in / " +
                          std::to_string(out_count) +
                          " out shadows; train more shadow models");
  }
}

}  // namespace

ShadowFarm build_farm(const Dataset& base, int shadow_count,
                      const std::vector<std::uint32_t>& model_dims,
                      Activation activation, const TrainConfig& config,
                      std::uint64_t seed, int n_members) {
  if (shadow_count < 8) throw InvalidArgument("need at least 8 shadow models");
  validate(base);
  validate(config);
  if (n_members < 0 || static_cast<std::size_t>(n_members) > base.size())
    throw InvalidArgument("n_members out of range");

  ShadowFarm farm;
  farm.base = base;
  farm.config = config;
  farm.model_dims = model_dims;
  farm.activation = activation;
  farm.seed = seed;
  farm.n_members = n_members == 0 ? static_cast<int>(base.size()) : n_members;

  const std::size_t n = base.size();
  const std::size_t half = n / 2;
  std::vector<int> indices(n);

  // Shadows come in complement pairs: 2t trains on a random half, 2t+1 on
  // the other half. Every sample then sits in exactly half the shadows, so
  // the per-sample coverage requirement holds already at 8 shadows.
  for (int i = 0; i < shadow_count; ++i) {
    std::vector<int> in_ids;
    if (i % 2 == 0) {
      std::iota(indices.begin(), indices.end(), 0);
      Rng subset_rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
      subset_rng.shuffle(indices);
      in_ids.assign(indices.begin(), indices.begin() + half);
    } else {
      in_ids.assign(indices.begin() + half, indices.end());
    }

    std::vector<std::uint8_t> row(n, 0);
    for (int id : in_ids) row[id] = 1;
    farm.mask.push_back(std::move(row));

    TrainConfig shadow_cfg = config;
    shadow_cfg.seed = mix_seed(seed, 0x1000000ULL + static_cast<std::uint64_t>(i));
    const Dataset subset = take(base, in_ids);
    MlpModel init = mlp_init(model_dims, activation, shadow_cfg.seed);
    farm.models.push_back(train(init, subset, shadow_cfg).first);
  }

  check_coverage(farm);
  return farm;
}

Matrix shadow_loss_matrix(const ShadowFarm& farm) {
  const std::size_t n = farm.base.size();
  Matrix losses(farm.models.size(), n);
  for (std::size_t i = 0; i < farm.models.size(); ++i) {
    const Matrix probs = forward_proba(farm.models[i], farm.base.features);
    const auto row = ce_loss(probs, farm.base.labels);
    std::copy(row.begin(), row.end(), losses.row(i).begin());
  }
  return losses;
}

std::vector<EtaScore> eta_scores(const ShadowFarm& farm) {
  check_coverage(farm);
  const Matrix losses = shadow_loss_matrix(farm);
  const std::size_t n = farm.base.size();

  std::vector<EtaScore> etas(n);
  for (std::size_t j = 0; j < n; ++j) {
    double in_sum = 0, out_sum = 0;
    int in_count = 0, out_count = 0;
    for (int i = 0; i < farm.shadow_count(); ++i) {
      if (farm.mask[i][j]) {
        in_sum += losses(i, j);
        ++in_count;
      } else {
        out_sum += losses(i, j);
        ++out_count;
      }
    }
    EtaScore& e = etas[j];
    e.sample_id = static_cast<int>(j);
    e.mean_loss_in = in_sum / in_count;
    e.mean_loss_out = out_sum / out_count;
    e.eta = e.mean_loss_out / std::max(e.mean_loss_in, kEtaLossFloor);
  }
  std::sort(etas.begin(), etas.end(), [](const EtaScore& a, const EtaScore& b) {
    if (a.eta != b.eta) return a.eta > b.eta;
    return a.sample_id < b.sample_id;
  });
  return etas;
}

std::vector<int> select_less_private(const std::vector<EtaScore>& etas, int k) {
  if (k < 0 || static_cast<std::size_t>(k) > etas.size())
    throw InvalidArgument("k must lie in [0, n]");
  std::vector<int> ids;
  ids.reserve(k);
  for (int i = 0; i < k; ++i) ids.push_back(etas[i].sample_id);
  return ids;
}

ShadowStats compute_shadow_stats(const ShadowFarm& farm, const MiaConfig& mia) {
  check_coverage(farm);
  const Matrix losses = shadow_loss_matrix(farm);
  const std::size_t n = farm.base.size();

  Matrix phi(losses.rows, losses.cols);
  for (std::size_t i = 0; i < losses.data.size(); ++i)
    phi.data[i] = logit_confidence_from_loss(losses.data[i], mia.logit_clamp);

  ShadowStats stats;
  stats.pairs.reserve(n);
  std::vector<double> in_obs, out_obs;
  for (std::size_t j = 0; j < n; ++j) {
    in_obs.clear();
    out_obs.clear();
    for (int i = 0; i < farm.shadow_count(); ++i)
      (farm.mask[i][j] ? in_obs : out_obs).push_back(phi(i, j));
    stats.pairs.push_back(fit_gauss_pair(in_obs, out_obs, mia.sigma_floor));
  }

  // Threshold calibration treats each shadow as a surrogate suspect: every
  // (model, sample) pair contributes one likelihood ratio with its true
  // membership known.
  ScoreSet calibration;
  calibration.tag = AttackTag::per_sample;
  for (int i = 0; i < farm.shadow_count(); ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double lambda = lira_score(phi(i, j), stats.pairs[j]);
      (farm.mask[i][j] ? calibration.member_scores
                       : calibration.nonmember_scores)
          .push_back(lambda);
    }
  }
  stats.lambda_threshold = calibrate_threshold(calibration);
  return stats;
}

namespace {

std::string mask_row_hex(const std::vector<std::uint8_t>& row) {
  std::string hex;
  hex.reserve((row.size() + 7) / 8 * 2);
  char buf[3];
  for (std::size_t byte = 0; byte * 8 < row.size(); ++byte) {
    std::uint8_t b = 0;
    for (std::size_t bit = 0; bit < 8 && byte * 8 + bit < row.size(); ++bit)
      if (row[byte * 8 + bit]) b |= 1u << bit;
    std::snprintf(buf, sizeof(buf), "%02x", b);
    hex += buf;
  }
  return hex;
}

std::vector<std::uint8_t> mask_row_from_hex(const std::string& hex,
                                            std::size_t n) {
  std::vector<std::uint8_t> row(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t byte = j / 8;
    if (byte * 2 + 1 >= hex.size()) throw DataError("mask hex too short");
    const std::uint8_t b =
        static_cast<std::uint8_t>(std::stoi(hex.substr(byte * 2, 2), nullptr, 16));
    row[j] = (b >> (j % 8)) & 1;
  }
  return row;
}

std::uint64_t config_hash(const TrainConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  mix(static_cast<std::uint64_t>(cfg.optimizer));
  std::uint64_t lr_bits;
  std::memcpy(&lr_bits, &cfg.learning_rate, 8);
  mix(lr_bits);
  mix(static_cast<std::uint64_t>(cfg.epochs));
  mix(static_cast<std::uint64_t>(cfg.batch_size));
  mix(cfg.seed);
  for (const auto& [epoch, mult] : cfg.lr_schedule) {
    mix(static_cast<std::uint64_t>(epoch));
    std::uint64_t mb;
    std::memcpy(&mb, &mult, 8);
    mix(mb);
  }
  return h;
}

std::string shadow_file(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "shadow_%04d.vdip", i);
  return buf;
}

}  // namespace

void save_farm(const ShadowFarm& farm, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["n_shadows"] = farm.shadow_count();
  manifest["seed"] = farm.seed;
  manifest["n_samples"] = farm.base.size();
  manifest["n_members"] = farm.n_members;
  manifest["dataset_crc32"] = dataset_crc(farm.base);
  manifest["config_hash"] = config_hash(farm.config);
  manifest["model_dims"] = farm.model_dims;
  manifest["activation"] = static_cast<int>(farm.activation);
  manifest["config"] = {
      {"optimizer", farm.config.optimizer == Optimizer::adam ? "adam" : "sgd"},
      {"learning_rate", farm.config.learning_rate},
      {"epochs", farm.config.epochs},
      {"batch_size", farm.config.batch_size},
      {"seed", farm.config.seed}};
  auto& mask = manifest["mask"] = nlohmann::json::array();
  for (const auto& row : farm.mask) mask.push_back(mask_row_hex(row));

  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw Error("cannot write farm manifest in '" + dir + "'");
  out << manifest.dump(2) << '\n';

  for (int i = 0; i < farm.shadow_count(); ++i)
    save_model(farm.models[i], (fs::path(dir) / shadow_file(i)).string());
}

ShadowFarm load_farm(const std::string& dir, const Dataset& base) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw Error("cannot open farm manifest in '" + dir + "'");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("farm manifest is not valid JSON: ") + e.what());
  }

  ShadowFarm farm;
  farm.base = base;
  farm.seed = manifest.at("seed").get<std::uint64_t>();
  farm.n_members = manifest.at("n_members").get<int>();
  const auto n_samples = manifest.at("n_samples").get<std::size_t>();
  if (n_samples != base.size())
    throw InvalidArgument("farm was built on " + std::to_string(n_samples) +
                          " samples but " + std::to_string(base.size()) +
                          " were supplied");
  if (manifest.at("dataset_crc32").get<std::uint32_t>() != dataset_crc(base))
    throw InvalidArgument("supplied dataset does not match the farm's");

  farm.model_dims = manifest.at("model_dims").get<std::vector<std::uint32_t>>();
  farm.activation = static_cast<Activation>(manifest.at("activation").get<int>());
  const auto& cfg = manifest.at("config");
  farm.config.optimizer =
      cfg.at("optimizer").get<std::string>() == "adam" ? Optimizer::adam
                                                       : Optimizer::sgd;
  farm.config.learning_rate = cfg.at("learning_rate").get<double>();
  farm.config.epochs = cfg.at("epochs").get<int>();
  farm.config.batch_size = cfg.at("batch_size").get<int>();
  farm.config.seed = cfg.at("seed").get<std::uint64_t>();

  const int n_shadows = manifest.at("n_shadows").get<int>();
  for (const auto& row : manifest.at("mask"))
    farm.mask.push_back(mask_row_from_hex(row.get<std::string>(), base.size()));
  if (static_cast<int>(farm.mask.size()) != n_shadows)
    throw DataError("mask row count does not match shadow count");

  for (int i = 0; i < n_shadows; ++i)
    farm.models.push_back(load_model((fs::path(dir) / shadow_file(i)).string()));
  check_coverage(farm);
  return farm;
}

}  // namespace veridip
