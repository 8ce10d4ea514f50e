#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <set>

#include "veridip/data.hpp"
#include "veridip/errors.hpp"
#include "veridip/rng.hpp"

using namespace veridip;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("gen_synthetic balances classes within one") {
  const auto data = gen_synthetic(100, 2, 2, 1.0, 0.0, 7);
  int counts[2] = {0, 0};
  // Labels with zero noise are the cluster assignments.
  for (int label : data.labels) ++counts[label];
  CHECK(counts[0] == 50);
  CHECK(counts[1] == 50);

  const auto odd = gen_synthetic(101, 4, 3, 1.0, 0.0, 7);
  std::vector<int> c3(3, 0);
  for (int label : odd.labels) ++c3[label];
  const auto [lo, hi] = std::minmax_element(c3.begin(), c3.end());
  CHECK(*hi - *lo <= 1);
}

TEST_CASE("gen_synthetic is deterministic per seed") {
  const auto a = gen_synthetic(64, 3, 2, 2.0, 0.1, 42);
  const auto b = gen_synthetic(64, 3, 2, 2.0, 0.1, 42);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  const auto c = gen_synthetic(64, 3, 2, 2.0, 0.1, 43);
  CHECK(a.features.data != c.features.data);
}

TEST_CASE("gen_synthetic cluster means are equidistant with the right norm") {
  const double mu = 3.0;
  const int k = 4, d = 5;
  // Estimate each cluster mean from many noiseless labels.
  const auto data = gen_synthetic(4000, d, k, mu, 0.0, 9);
  std::vector<std::vector<double>> means(k, std::vector<double>(d, 0.0));
  std::vector<int> counts(k, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    ++counts[data.labels[i]];
    for (int j = 0; j < d; ++j) means[data.labels[i]][j] += data.features(i, j);
  }
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < d; ++j) means[c][j] /= counts[c];

  for (int c = 0; c < k; ++c) {
    double norm = 0;
    for (double v : means[c]) norm += v * v;
    CHECK(std::sqrt(norm) == doctest::Approx(mu).epsilon(0.1));
  }
  double first_dist = -1;
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      double sq = 0;
      for (int j = 0; j < d; ++j)
        sq += (means[a][j] - means[b][j]) * (means[a][j] - means[b][j]);
      const double dist = std::sqrt(sq);
      if (first_dist < 0)
        first_dist = dist;
      else
        CHECK(dist == doctest::Approx(first_dist).epsilon(0.1));
    }
  }
}

TEST_CASE("gen_synthetic label noise hits the requested rate") {
  const double rho = 0.2;
  const int n = 4000;
  const auto noisy = gen_synthetic(n, 2, 2, 5.0, rho, 11);
  const auto clean = gen_synthetic(n, 2, 2, 5.0, 0.0, 11);
  int flipped = 0;
  for (int i = 0; i < n; ++i) flipped += noisy.labels[i] != clean.labels[i];
  const double rate = static_cast<double>(flipped) / n;
  CHECK(std::abs(rate - rho) < 3.0 * std::sqrt(rho * (1 - rho) / n));
}

TEST_CASE("gen_synthetic rejects bad parameters") {
  CHECK_THROWS_AS(gen_synthetic(10, 2, 1, 1.0, 0.0, 0), InvalidArgument);
  CHECK_THROWS_AS(gen_synthetic(1, 2, 2, 1.0, 0.0, 0), InvalidArgument);
  CHECK_THROWS_AS(gen_synthetic(10, 2, 2, -1.0, 0.0, 0), InvalidArgument);
  CHECK_THROWS_AS(gen_synthetic(10, 2, 2, 1.0, 0.5, 0), InvalidArgument);
  CHECK_THROWS_AS(gen_synthetic(10, 1, 3, 1.0, 0.0, 0), InvalidArgument);
}

TEST_CASE("csv round trip preserves the dataset") {
  const auto data = gen_synthetic(37, 3, 2, 1.5, 0.1, 5);
  const auto path = temp_path("veridip_roundtrip.csv");
  save_csv(data, path);
  const auto loaded = load_csv(path, "label");
  CHECK(loaded.size() == data.size());
  CHECK(loaded.dim() == data.dim());
  CHECK(loaded.labels == data.labels);
  for (std::size_t i = 0; i < data.features.data.size(); ++i)
    CHECK(loaded.features.data[i] == data.features.data[i]);
  std::filesystem::remove(path);
}

TEST_CASE("csv parses a tiny literal file") {
  const auto path = temp_path("veridip_tiny.csv");
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("x0,x1,label\n0,1,0\n1,0,1\n", f);
    std::fclose(f);
  }
  const auto data = load_csv(path, "label");
  CHECK(data.size() == 2);
  CHECK(data.dim() == 2);
  CHECK(data.class_count == 2);
  CHECK(data.features(0, 1) == 1.0);
  CHECK(data.labels[1] == 1);
  std::filesystem::remove(path);
}

TEST_CASE("csv errors name the problem") {
  const auto path = temp_path("veridip_bad.csv");
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("x0,x1,label\n0,oops,0\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_WITH_AS(load_csv(path, "target"),
                       doctest::Contains("'target' not found"), DataError);
  CHECK_THROWS_WITH_AS(load_csv(path, "label"), doctest::Contains("row 1"),
                       DataError);
  std::filesystem::remove(path);

  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_csv(path, "label"), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("split produces exact sizes and a partition") {
  const auto data = gen_synthetic(100, 2, 2, 1.0, 0.0, 3);
  const auto parts = split(data, {0.5, 0.25, 0.25, 17});
  CHECK(parts.train.size() == 50);
  CHECK(parts.test.size() == 25);
  CHECK(parts.holdout.size() == 25);
}

TEST_CASE("split partition property over random specs") {
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 10 + static_cast<int>(rng.below(200));
    const auto data = gen_synthetic(n, 2, 2, 1.0, 0.0, trial);
    double f1 = rng.uniform(0.2, 0.6);
    double f2 = rng.uniform(0.15, (1.0 - f1) - 0.15);
    const SplitSpec spec{f1, f2, 1.0 - f1 - f2, rng.next_u64()};
    SplitResult parts;
    try {
      parts = split(data, spec);
    } catch (const InvalidArgument&) {
      continue;  // fractions rounded an endpoint away on tiny n
    }
    CHECK(parts.train.size() + parts.test.size() + parts.holdout.size() ==
          data.size());

    // Disjointness and coverage via multiset equality of feature rows.
    std::multiset<std::vector<double>> original, recovered;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto row = data.features.row(i);
      original.insert({row.begin(), row.end()});
    }
    for (const Dataset* part : {&parts.train, &parts.test, &parts.holdout})
      for (std::size_t i = 0; i < part->size(); ++i) {
        const auto row = part->features.row(i);
        recovered.insert({row.begin(), row.end()});
      }
    CHECK(original == recovered);
  }
}

TEST_CASE("split rejects fractions that empty a part") {
  const auto data = gen_synthetic(4, 2, 2, 1.0, 0.0, 3);
  CHECK_THROWS_AS(split(data, {0.1, 0.1, 0.8, 7}), InvalidArgument);
  CHECK_THROWS_AS(split(data, {0.5, 0.5, 0.5, 7}), InvalidArgument);
}

TEST_CASE("split differs across seeds") {
  const auto data = gen_synthetic(100, 2, 2, 1.0, 0.0, 3);
  const auto a = split(data, {0.5, 0.25, 0.25, 1});
  const auto b = split(data, {0.5, 0.25, 0.25, 2});
  CHECK(a.train.features.data != b.train.features.data);
}

TEST_CASE("sample_pair basics") {
  const auto members = gen_synthetic(20, 2, 2, 1.0, 0.0, 1);
  const auto nonmembers = gen_synthetic(30, 2, 2, 1.0, 0.0, 2);

  const auto pair = sample_pair(members, nonmembers, 8, 5);
  CHECK(pair.member_ids.size() == 8);
  CHECK(pair.nonmember_ids.size() == 8);
  std::set<int> unique_members(pair.member_ids.begin(), pair.member_ids.end());
  CHECK(unique_members.size() == 8);

  // Exhaustive sample covers the whole pool.
  const auto all = sample_pair(members, nonmembers, 20, 5);
  std::set<int> ids(all.member_ids.begin(), all.member_ids.end());
  CHECK(ids.size() == 20);
  CHECK(*ids.begin() == 0);
  CHECK(*ids.rbegin() == 19);

  const std::vector<int> fixed{3, 1, 4};
  const auto pinned = sample_pair(members, nonmembers, 3, 5, &fixed);
  CHECK(pinned.member_ids == fixed);

  CHECK_THROWS_AS(sample_pair(members, nonmembers, 21, 5), InvalidArgument);
}

TEST_CASE("take and concat agree with ids") {
  const auto data = gen_synthetic(10, 2, 2, 1.0, 0.0, 1);
  const std::vector<int> ids{7, 0, 3};
  const auto sub = take(data, ids);
  CHECK(sub.size() == 3);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CHECK(sub.labels[i] == data.labels[ids[i]]);
    CHECK(sub.features(i, 0) == data.features(ids[i], 0));
  }
  const auto both = concat(sub, data);
  CHECK(both.size() == 13);
  CHECK(both.features(0, 0) == data.features(7, 0));
  CHECK(both.features(3, 1) == data.features(0, 1));
}
