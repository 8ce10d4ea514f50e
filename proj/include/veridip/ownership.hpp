#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "veridip/data.hpp"
#include "veridip/mia.hpp"
#include "veridip/oracle.hpp"
#include "veridip/shadow.hpp"

namespace veridip {

enum class AttackKind : std::uint8_t { global, per_sample };
enum class VerifyMode : std::uint8_t { basic, enhanced };

struct AttackSpec {
  AttackKind kind = AttackKind::global;
  MiaConfig mia;
};

struct Fingerprint {
  double f_star = 0;   // member score mean minus non-member score mean
  double sigma0 = 0;   // member-side unbiased score std
  double sigma1 = 0;   // non-member-side unbiased score std
  int n_s = 0;
  AttackKind attack = AttackKind::global;
};

struct Verdict {
  double p_value = 1;
  int outcome = 0;  // 1 iff p_value < alpha
  double alpha = 0.01;
  int n_s = 0;
  Fingerprint fingerprint;
  VerifyMode mode = VerifyMode::basic;
  AttackKind attack = AttackKind::global;
  std::vector<int> exposed_sample_ids;
  bool variance_floored = false;
};

/// Member and non-member pools sharing one underlying row space; ids index
/// the concatenated base (members first). The shadow farm, when used, must
/// have been built over exactly this base.
struct VerifyPools {
  Dataset base;
  std::vector<int> member_ids;
  std::vector<int> nonmember_ids;
};

VerifyPools make_pools(const Dataset& members, const Dataset& nonmembers);

/// Farm-derived inputs a verification needs, computed once and reused across
/// repeated tests: per-sample Gaussians plus the calibrated likelihood-ratio
/// threshold (per-sample attack), and member ids ranked by eta (enhanced).
struct FarmContext {
  std::optional<ShadowStats> stats;
  std::vector<int> eta_ranked_member_ids;
};

FarmContext prepare_farm_context(const ShadowFarm& farm, const AttackSpec& attack,
                                 VerifyMode mode);

/// Attack scores for the rows `ids` of `base`; one oracle query per row.
std::vector<double> attack_scores(PredictionOracle& oracle, const Dataset& base,
                                  std::span<const int> ids,
                                  const AttackSpec& attack,
                                  const FarmContext* farm_ctx);

/// f_star, per-group unbiased stds and n_s from the two sampled sets.
Fingerprint estimate_fingerprint(PredictionOracle& oracle, const Dataset& base,
                                 std::span<const int> member_ids,
                                 std::span<const int> nonmember_ids,
                                 const AttackSpec& attack,
                                 const FarmContext* farm_ctx);

inline constexpr double kVarianceFloor = 1e-12;

/// 1 - Phi(f_star * sqrt(n_s) / sqrt(sigma0^2 + sigma1^2)); a zero variance
/// is floored at kVarianceFloor and reported through `floored`.
double p_value(const Fingerprint& fp, bool* floored = nullptr);

/// One ownership test: sample (D0, D1), score, fingerprint, p-value, verdict.
/// Enhanced mode fixes D0 to the top-n_s least-private member ids.
Verdict ownership_test(PredictionOracle& oracle, const VerifyPools& pools,
                       int n_s, double alpha, const AttackSpec& attack,
                       VerifyMode mode, const FarmContext* farm_ctx,
                       std::uint64_t seed);

/// Smallest grid entry whose median p over `repeats` seeded runs is below
/// alpha; nullopt when the whole grid fails.
std::optional<int> min_exposed_search(PredictionOracle& oracle,
                                      const VerifyPools& pools, double alpha,
                                      const AttackSpec& attack, VerifyMode mode,
                                      const FarmContext* farm_ctx,
                                      std::span<const int> n_grid, int repeats,
                                      std::uint64_t seed);

/// One-sided permutation test of the mean difference with +1/+1 smoothing;
/// the independent check on the analytic p-value.
double permutation_pvalue(std::span<const double> member_scores,
                          std::span<const double> nonmember_scores,
                          int permutations, std::uint64_t seed);

std::string verdict_to_json(const Verdict& verdict);

}  // namespace veridip
