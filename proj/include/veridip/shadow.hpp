#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "veridip/data.hpp"
#include "veridip/mia.hpp"
#include "veridip/nn.hpp"

namespace veridip {

/// N models trained on independent half-subsets of a base dataset, with the
/// in/out membership mask recorded. One farm serves both the eta search and
/// the per-sample attack.
struct ShadowFarm {
  std::vector<MlpModel> models;
  std::vector<std::vector<std::uint8_t>> mask;  // mask[i][j]: model i saw sample j
  Dataset base;
  TrainConfig config;
  std::vector<std::uint32_t> model_dims;
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;
  // First n_members base rows are victim training samples; the rest are the
  // non-member pool. Lets verification separate the two sides.
  int n_members = 0;

  int shadow_count() const { return static_cast<int>(models.size()); }
};

/// Trains `shadow_count` models on seeded random halves of `base`, arranged
/// as complement pairs (shadow 2t holds a random floor(n/2)-subset, shadow
/// 2t+1 the remaining rows) so every sample is covered by at least two in-
/// and two out-models from 8 shadows on. Deterministic per seed.
ShadowFarm build_farm(const Dataset& base, int shadow_count,
                      const std::vector<std::uint32_t>& model_dims,
                      Activation activation, const TrainConfig& config,
                      std::uint64_t seed, int n_members = 0);

/// Losses of every shadow model on every base sample (shadow_count x n).
Matrix shadow_loss_matrix(const ShadowFarm& farm);

inline constexpr double kEtaLossFloor = 1e-8;

struct EtaScore {
  int sample_id = 0;
  double eta = 0;  // mean_loss_out / max(mean_loss_in, kEtaLossFloor)
  double mean_loss_in = 0;
  double mean_loss_out = 0;
};

/// Per-sample eta scores sorted by eta descending, ties by sample id.
std::vector<EtaScore> eta_scores(const ShadowFarm& farm);

/// Top-k sample ids from an eta-sorted list.
std::vector<int> select_less_private(const std::vector<EtaScore>& etas, int k);

/// Per-sample Gaussian fits over logit confidences plus one likelihood-ratio
/// threshold calibrated on the shadows themselves.
struct ShadowStats {
  std::vector<GaussPair> pairs;  // one per base sample
  double lambda_threshold = 1.0;
};

ShadowStats compute_shadow_stats(const ShadowFarm& farm,
                                 const MiaConfig& mia = {});

/// Farm directory layout: manifest.json + shadow_<i>.vdip model files.
void save_farm(const ShadowFarm& farm, const std::string& dir);
ShadowFarm load_farm(const std::string& dir, const Dataset& base);

}  // namespace veridip
