#include "veridip/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "veridip/errors.hpp"
#include "veridip/rng.hpp"

namespace veridip {

void validate(const Dataset& data) {
  if (data.size() == 0) throw DataError("dataset is empty");
  if (data.labels.size() != data.size())
    throw DataError("label count does not match row count");
  if (data.class_count < 2) throw DataError("dataset needs at least 2 classes");
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (data.labels[i] < 0 || data.labels[i] >= data.class_count)
      throw DataError("label out of range at row " + std::to_string(i));
  }
  for (double v : data.features.data) {
    if (!std::isfinite(v)) throw DataError("non-finite feature value");
  }
  if (!data.feature_names.empty() && data.feature_names.size() != data.dim())
    throw DataError("feature name count does not match feature dim");
}

namespace {

// Coordinates of k mutually equidistant points of norm `radius` in R^d:
// centered simplex vertices e_i - 1/k expressed in an orthonormal basis of
// their span, then padded to d dimensions. Needs d >= k-1.
std::vector<std::vector<double>> simplex_means(int k, int d, double radius) {
  std::vector<std::vector<double>> vertices(k, std::vector<double>(k, -1.0 / k));
  for (int i = 0; i < k; ++i) vertices[i][i] += 1.0;

  // Gram-Schmidt over the first k-1 vertices spans the simplex plane.
  std::vector<std::vector<double>> basis;
  for (int i = 0; i < k - 1; ++i) {
    std::vector<double> v = vertices[i];
    for (const auto& b : basis) {
      double proj = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
      for (int j = 0; j < k; ++j) v[j] -= proj * b[j];
    }
    double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }

  const double vertex_norm = std::sqrt((k - 1.0) / k);
  std::vector<std::vector<double>> means(k, std::vector<double>(d, 0.0));
  for (int i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < basis.size(); ++j) {
      double coord = std::inner_product(vertices[i].begin(), vertices[i].end(),
                                        basis[j].begin(), 0.0);
      means[i][j] = coord * radius / vertex_norm;
    }
  }
  return means;
}

}  // namespace

Dataset gen_synthetic(int n, int d, int k, double class_separation,
                      double label_noise, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("class count must be at least 2");
  if (n < k) throw InvalidArgument("need at least one sample per class");
  if (d < 1) throw InvalidArgument("feature dim must be positive");
  if (d < k - 1)
    throw InvalidArgument("equidistant means need feature dim >= class count - 1");
  if (class_separation < 0) throw InvalidArgument("class separation must be >= 0");
  if (label_noise < 0 || label_noise >= 0.5)
    throw InvalidArgument("label noise must lie in [0, 0.5)");

  const auto means = simplex_means(k, d, class_separation);
  Rng rng(seed);

  // Round-robin class assignment keeps counts balanced within +-1; the row
  // shuffle afterwards removes the ordering.
  std::vector<int> cluster(n);
  for (int i = 0; i < n; ++i) cluster[i] = i % k;
  rng.shuffle(cluster);

  Dataset data;
  data.features = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
  data.labels.resize(n);
  data.class_count = k;
  data.provenance = Provenance::synthetic;
  data.seed = seed;

  for (int i = 0; i < n; ++i) {
    auto row = data.features.row(i);
    for (int j = 0; j < d; ++j) row[j] = means[cluster[i]][j] + rng.normal();
    data.labels[i] = cluster[i];
  }
  if (label_noise > 0) {
    for (int i = 0; i < n; ++i) {
      if (rng.uniform() < label_noise) {
        const int offset = 1 + static_cast<int>(rng.below(k - 1));
        data.labels[i] = (data.labels[i] + offset) % k;
      }
    }
  }
  return data;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (char c : line) {
    if (quoted) {
      if (c == '"')
        quoted = false;
      else
        field.push_back(c);
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(field);
  return fields;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v))
    throw DataError("non-numeric cell at row " + std::to_string(row) +
                    ", column '" + col + "'");
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line) || line.empty()) throw DataError("empty CSV file");
  const auto header = split_csv_line(line);

  int label_index = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) {
      label_index = static_cast<int>(i);
      break;
    }
  }
  if (label_index < 0)
    throw DataError("label column '" + label_column + "' not found");

  Dataset data;
  data.provenance = Provenance::csv;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (static_cast<int>(i) != label_index) data.feature_names.push_back(header[i]);
  }
  const std::size_t d = data.feature_names.size();
  if (d == 0) throw DataError("CSV has no feature columns");

  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(row + 1) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (static_cast<int>(i) == label_index) {
        const double lv = parse_cell(fields[i], row + 1, header[i]);
        if (lv < 0 || lv != std::floor(lv))
          throw DataError("label must be a nonnegative integer at row " +
                          std::to_string(row + 1));
        data.labels.push_back(static_cast<int>(lv));
      } else {
        values.push_back(parse_cell(fields[i], row + 1, header[i]));
      }
    }
    ++row;
  }
  if (row == 0) throw DataError("CSV has a header but no data rows");

  data.features = Matrix(row, d);
  data.features.data = std::move(values);
  data.class_count =
      std::max(2, *std::max_element(data.labels.begin(), data.labels.end()) + 1);
  validate(data);
  return data;
}

void save_csv(const Dataset& data, const std::string& path,
              const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");

  for (std::size_t j = 0; j < data.dim(); ++j) {
    const std::string name =
        data.feature_names.empty() ? "x" + std::to_string(j) : data.feature_names[j];
    out << name << ',';
  }
  out << label_column << '\n';

  char buf[40];
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = data.features.row(i);
    for (std::size_t j = 0; j < data.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[j]);
      out << buf << ',';
    }
    out << data.labels[i] << '\n';
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

Dataset take(const Dataset& data, std::span<const int> ids) {
  Dataset out;
  out.features = Matrix(ids.size(), data.dim());
  out.labels.resize(ids.size());
  out.class_count = data.class_count;
  out.feature_names = data.feature_names;
  out.provenance = data.provenance;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= data.size())
      throw InvalidArgument("row id " + std::to_string(id) + " out of range");
    std::copy(data.features.row(id).begin(), data.features.row(id).end(),
              out.features.row(i).begin());
    out.labels[i] = data.labels[id];
  }
  return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.dim() != b.dim()) throw InvalidArgument("feature dims differ");
  Dataset out;
  out.features = Matrix(a.size() + b.size(), a.dim());
  std::copy(a.features.data.begin(), a.features.data.end(),
            out.features.data.begin());
  std::copy(b.features.data.begin(), b.features.data.end(),
            out.features.data.begin() + static_cast<std::ptrdiff_t>(a.features.data.size()));
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.class_count = std::max(a.class_count, b.class_count);
  out.feature_names = a.feature_names;
  out.provenance = a.provenance;
  return out;
}

SplitResult split(const Dataset& data, const SplitSpec& spec) {
  validate(data);
  const double sum =
      spec.train_fraction + spec.test_fraction + spec.holdout_fraction;
  if (spec.train_fraction <= 0 || spec.test_fraction <= 0 ||
      spec.holdout_fraction <= 0 || std::abs(sum - 1.0) > 1e-9)
    throw InvalidArgument("split fractions must be positive and sum to 1");

  const std::size_t n = data.size();
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(spec.seed);
  rng.shuffle(perm);

  const auto c1 = static_cast<std::size_t>(std::llround(spec.train_fraction * n));
  const auto c2 = static_cast<std::size_t>(
      std::llround((spec.train_fraction + spec.test_fraction) * n));
  if (c1 == 0 || c2 <= c1 || c2 >= n)
    throw InvalidArgument("split fractions yield an empty part");

  const std::span<const int> ids(perm);
  return {take(data, ids.subspan(0, c1)), take(data, ids.subspan(c1, c2 - c1)),
          take(data, ids.subspan(c2))};
}

SamplePair sample_pair(const Dataset& members, const Dataset& nonmembers, int n_s,
                       std::uint64_t seed, const std::vector<int>* fixed_member_ids) {
  if (n_s < 1) throw InvalidArgument("n_s must be positive");
  if (members.size() < static_cast<std::size_t>(n_s))
    throw InvalidArgument("member pool smaller than n_s");
  if (nonmembers.size() < static_cast<std::size_t>(n_s))
    throw InvalidArgument("non-member pool smaller than n_s");

  Rng rng(seed);
  SamplePair out;
  if (fixed_member_ids != nullptr) {
    if (fixed_member_ids->size() != static_cast<std::size_t>(n_s))
      throw InvalidArgument("fixed_member_ids length must equal n_s");
    for (int id : *fixed_member_ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= members.size())
        throw InvalidArgument("fixed member id out of range");
    }
    out.member_ids = *fixed_member_ids;
  } else {
    std::vector<int> pool(members.size());
    std::iota(pool.begin(), pool.end(), 0);
    rng.shuffle(pool);
    out.member_ids.assign(pool.begin(), pool.begin() + n_s);
  }

  std::vector<int> pool(nonmembers.size());
  std::iota(pool.begin(), pool.end(), 0);
  rng.shuffle(pool);
  out.nonmember_ids.assign(pool.begin(), pool.begin() + n_s);
  return out;
}

}  // namespace veridip
