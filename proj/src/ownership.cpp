#include "veridip/ownership.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "veridip/accountant.hpp"
#include "veridip/errors.hpp"
#include "veridip/rng.hpp"

namespace veridip {

VerifyPools make_pools(const Dataset& members, const Dataset& nonmembers) {
  validate(members);
  validate(nonmembers);
  VerifyPools pools;
  pools.base = concat(members, nonmembers);
  pools.member_ids.resize(members.size());
  std::iota(pools.member_ids.begin(), pools.member_ids.end(), 0);
  pools.nonmember_ids.resize(nonmembers.size());
  std::iota(pools.nonmember_ids.begin(), pools.nonmember_ids.end(),
            static_cast<int>(members.size()));
  return pools;
}

FarmContext prepare_farm_context(const ShadowFarm& farm, const AttackSpec& attack,
                                 VerifyMode mode) {
  FarmContext ctx;
  if (attack.kind == AttackKind::per_sample)
    ctx.stats = compute_shadow_stats(farm, attack.mia);
  if (mode == VerifyMode::enhanced) {
    const auto etas = eta_scores(farm);
    for (const auto& e : etas)
      if (e.sample_id < farm.n_members) ctx.eta_ranked_member_ids.push_back(e.sample_id);
  }
  return ctx;
}

std::vector<double> attack_scores(PredictionOracle& oracle, const Dataset& base,
                                  std::span<const int> ids,
                                  const AttackSpec& attack,
                                  const FarmContext* farm_ctx) {
  const Dataset rows = take(base, ids);
  const auto losses = oracle_losses(oracle, rows.features, rows.labels);

  std::vector<double> scores(losses.size());
  if (attack.kind == AttackKind::global) {
    const double bound = attack.mia.effective_loss_bound();
    for (std::size_t i = 0; i < losses.size(); ++i)
      scores[i] = global_score_from_loss(losses[i], bound);
    return scores;
  }

  if (farm_ctx == nullptr || !farm_ctx->stats)
    throw InvalidArgument("per-sample attack needs shadow statistics");
  const ShadowStats& stats = *farm_ctx->stats;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= stats.pairs.size())
      throw InvalidArgument("sample id " + std::to_string(id) +
                            " has no shadow statistics");
    const double phi = logit_confidence_from_loss(losses[i], attack.mia.logit_clamp);
    const double lambda = lira_score(phi, stats.pairs[id]);
    scores[i] = lambda > stats.lambda_threshold ? 1.0 : 0.0;
  }
  return scores;
}

namespace {

struct GroupMoments {
  double mean = 0, stddev = 0;
};

GroupMoments group_moments(std::span<const double> values) {
  GroupMoments m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  double sq = 0;
  for (double v : values) sq += (v - m.mean) * (v - m.mean);
  m.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  return m;
}

}  // namespace

Fingerprint estimate_fingerprint(PredictionOracle& oracle, const Dataset& base,
                                 std::span<const int> member_ids,
                                 std::span<const int> nonmember_ids,
                                 const AttackSpec& attack,
                                 const FarmContext* farm_ctx) {
  if (member_ids.size() != nonmember_ids.size())
    throw InvalidArgument("D0 and D1 must have equal size");
  if (member_ids.size() < 2)
    throw InvalidArgument("fingerprint needs n_s >= 2 for variance estimates");

  const auto member_scores =
      attack_scores(oracle, base, member_ids, attack, farm_ctx);
  const auto nonmember_scores =
      attack_scores(oracle, base, nonmember_ids, attack, farm_ctx);

  const auto m0 = group_moments(member_scores);
  const auto m1 = group_moments(nonmember_scores);
  Fingerprint fp;
  fp.f_star = m0.mean - m1.mean;
  fp.sigma0 = m0.stddev;
  fp.sigma1 = m1.stddev;
  fp.n_s = static_cast<int>(member_ids.size());
  fp.attack = attack.kind;
  return fp;
}

double p_value(const Fingerprint& fp, bool* floored) {
  double var_sum = fp.sigma0 * fp.sigma0 + fp.sigma1 * fp.sigma1;
  const bool hit_floor = var_sum < kVarianceFloor;
  if (hit_floor) var_sum = kVarianceFloor;
  if (floored != nullptr) *floored = hit_floor;
  const double z =
      fp.f_star * std::sqrt(static_cast<double>(fp.n_s)) / std::sqrt(var_sum);
  // erfc underflows at extreme z; keep the p-value inside (0, 1).
  return std::clamp(1.0 - normal_cdf(z), std::numeric_limits<double>::min(),
                    std::nexttoward(1.0, 0.0));
}

Verdict ownership_test(PredictionOracle& oracle, const VerifyPools& pools,
                       int n_s, double alpha, const AttackSpec& attack,
                       VerifyMode mode, const FarmContext* farm_ctx,
                       std::uint64_t seed) {
  if (alpha <= 0 || alpha >= 1) throw InvalidArgument("alpha must lie in (0, 1)");
  if (n_s < 2) throw InvalidArgument("n_s must be at least 2");
  if (pools.member_ids.size() < static_cast<std::size_t>(n_s) ||
      pools.nonmember_ids.size() < static_cast<std::size_t>(n_s))
    throw InvalidArgument("pools are smaller than n_s");

  // Enhanced mode pins D0 to the least-private members; only D1 stays random.
  std::optional<std::vector<int>> fixed_positions;
  if (mode == VerifyMode::enhanced) {
    if (farm_ctx == nullptr ||
        farm_ctx->eta_ranked_member_ids.size() < static_cast<std::size_t>(n_s))
      throw InvalidArgument(
          "enhanced mode needs a shadow farm covering at least n_s members");
    std::vector<int> position_of(pools.base.size(), -1);
    for (std::size_t pos = 0; pos < pools.member_ids.size(); ++pos)
      position_of[pools.member_ids[pos]] = static_cast<int>(pos);
    fixed_positions.emplace();
    for (int i = 0; i < n_s; ++i) {
      const int pos = position_of[farm_ctx->eta_ranked_member_ids[i]];
      if (pos < 0)
        throw InvalidArgument("farm member ids do not match the member pool");
      fixed_positions->push_back(pos);
    }
  }

  const Dataset member_pool = take(pools.base, pools.member_ids);
  const Dataset nonmember_pool = take(pools.base, pools.nonmember_ids);
  const SamplePair pair =
      sample_pair(member_pool, nonmember_pool, n_s, seed,
                  fixed_positions ? &*fixed_positions : nullptr);
  std::vector<int> d0(n_s), d1(n_s);
  for (int i = 0; i < n_s; ++i) {
    d0[i] = pools.member_ids[pair.member_ids[i]];
    d1[i] = pools.nonmember_ids[pair.nonmember_ids[i]];
  }

  Verdict verdict;
  verdict.fingerprint =
      estimate_fingerprint(oracle, pools.base, d0, d1, attack, farm_ctx);
  verdict.p_value = p_value(verdict.fingerprint, &verdict.variance_floored);
  verdict.alpha = alpha;
  verdict.n_s = n_s;
  verdict.outcome = verdict.p_value < alpha ? 1 : 0;
  verdict.mode = mode;
  verdict.attack = attack.kind;
  verdict.exposed_sample_ids = std::move(d0);
  return verdict;
}

std::optional<int> min_exposed_search(PredictionOracle& oracle,
                                      const VerifyPools& pools, double alpha,
                                      const AttackSpec& attack, VerifyMode mode,
                                      const FarmContext* farm_ctx,
                                      std::span<const int> n_grid, int repeats,
                                      std::uint64_t seed) {
  if (n_grid.empty()) throw InvalidArgument("n grid must not be empty");
  if (repeats < 1) throw InvalidArgument("repeats must be at least 1");
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    if (n_grid[i] <= n_grid[i - 1])
      throw InvalidArgument("n grid must be strictly ascending");

  for (int n : n_grid) {
    std::vector<double> pvalues;
    pvalues.reserve(repeats);
    for (int rep = 0; rep < repeats; ++rep) {
      const std::uint64_t run_seed =
          mix_seed(seed, (static_cast<std::uint64_t>(n) << 20) |
                             static_cast<std::uint64_t>(rep));
      pvalues.push_back(ownership_test(oracle, pools, n, alpha, attack, mode,
                                       farm_ctx, run_seed)
                            .p_value);
    }
    std::sort(pvalues.begin(), pvalues.end());
    const std::size_t mid = pvalues.size() / 2;
    const double median = pvalues.size() % 2 == 1
                              ? pvalues[mid]
                              : 0.5 * (pvalues[mid - 1] + pvalues[mid]);
    if (median < alpha) return n;
  }
  return std::nullopt;
}

double permutation_pvalue(std::span<const double> member_scores,
                          std::span<const double> nonmember_scores,
                          int permutations, std::uint64_t seed) {
  if (member_scores.empty() || nonmember_scores.empty())
    throw InvalidArgument("permutation test needs scores on both sides");
  if (permutations < 1000)
    throw InvalidArgument("need at least 1000 permutations");

  const std::size_t n0 = member_scores.size();
  std::vector<double> pool(member_scores.begin(), member_scores.end());
  pool.insert(pool.end(), nonmember_scores.begin(), nonmember_scores.end());

  const auto mean_diff = [n0, &pool]() {
    double a = 0, b = 0;
    for (std::size_t i = 0; i < n0; ++i) a += pool[i];
    for (std::size_t i = n0; i < pool.size(); ++i) b += pool[i];
    return a / static_cast<double>(n0) -
           b / static_cast<double>(pool.size() - n0);
  };

  const double observed = mean_diff();
  Rng rng(seed);
  int at_least = 0;
  for (int p = 0; p < permutations; ++p) {
    rng.shuffle(pool);
    if (mean_diff() >= observed) ++at_least;
  }
  return (at_least + 1.0) / (permutations + 1.0);
}

std::string verdict_to_json(const Verdict& verdict) {
  nlohmann::json j;
  j["p_value"] = verdict.p_value;
  j["outcome"] = verdict.outcome;
  j["alpha"] = verdict.alpha;
  j["n_s"] = verdict.n_s;
  j["f_star"] = verdict.fingerprint.f_star;
  j["sigma0"] = verdict.fingerprint.sigma0;
  j["sigma1"] = verdict.fingerprint.sigma1;
  j["mode"] = verdict.mode == VerifyMode::basic ? "basic" : "enhanced";
  j["attack"] = verdict.attack == AttackKind::global ? "global" : "per-sample";
  j["exposed_sample_ids"] = verdict.exposed_sample_ids;
  j["variance_floored"] = verdict.variance_floored;
  return j.dump();
}

}  // namespace veridip
