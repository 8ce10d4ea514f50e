#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "veridip/matrix.hpp"

namespace veridip {

enum class Provenance : std::uint8_t { synthetic, csv };

struct Dataset {
  Matrix features;                         // n x d
  std::vector<int> labels;                 // values in [0, class_count)
  int class_count = 0;
  std::vector<std::string> feature_names;  // empty or size d
  Provenance provenance = Provenance::synthetic;
  std::optional<std::uint64_t> seed;

  std::size_t size() const { return features.rows; }
  std::size_t dim() const { return features.cols; }
};

/// Checks the Dataset invariants (nonempty, labels in range, finite features)
/// and throws DataError on violation.
void validate(const Dataset& data);

struct SplitSpec {
  double train_fraction = 0.5;
  double test_fraction = 0.25;
  double holdout_fraction = 0.25;
  std::uint64_t seed = 0;
};

/// k unit-covariance Gaussian clusters with mutually equidistant means of norm
/// `class_separation`; requires d >= k-1 so the simplex construction fits.
/// Labels are balanced within +-1 and flipped to a random other class with
/// probability `label_noise`. Deterministic per seed.
Dataset gen_synthetic(int n, int d, int k, double class_separation,
                      double label_noise, std::uint64_t seed);

Dataset load_csv(const std::string& path, const std::string& label_column);
void save_csv(const Dataset& data, const std::string& path,
              const std::string& label_column = "label");

struct SplitResult {
  Dataset train, test, holdout;
};

/// Disjoint covering partition via a seeded permutation; part sizes are the
/// rounded cumulative fractions and every part must be nonempty.
SplitResult split(const Dataset& data, const SplitSpec& spec);

/// Row subset in the order given by `ids`.
Dataset take(const Dataset& data, std::span<const int> ids);

/// Row-wise concatenation; dims and class counts must agree.
Dataset concat(const Dataset& a, const Dataset& b);

struct SamplePair {
  std::vector<int> member_ids;     // indexes the member pool
  std::vector<int> nonmember_ids;  // indexes the non-member pool
};

/// Draws two n_s-sized index sets without replacement, one per pool. When
/// fixed_member_ids is given it becomes the member side verbatim.
SamplePair sample_pair(const Dataset& members, const Dataset& nonmembers,
                       int n_s, std::uint64_t seed,
                       const std::vector<int>* fixed_member_ids = nullptr);

}  // namespace veridip
