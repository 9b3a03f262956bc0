#pragma once

// Dataset -> FeatureGraph.
//
// Vertex row layout for m = m_max_cols, k = 6 (position-stable):
//   [0, k*m)            per-column stats, column c at [c*k, c*k + k):
//                       skewness, domain size, excess kurtosis, range, std, mean
//   [k*m, k*m + m*m)    |Pearson| correlation block, row-major
//   k*m + m*m           row count
//   k*m + m*m + 1       column count
// Only non-key columns are featurized; absent columns are zero padded.
// E[i][j] = distinct(FK in table j) / distinct(PK of table i) for each edge.

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <unordered_set>
#include <vector>

#include "autoce/corpus.hpp"
#include "autoce/error.hpp"
#include "autoce/nn.hpp"

namespace autoce {

inline constexpr std::size_t kColumnFeatures = 6;

struct FeatureConfig {
  std::size_t m_max_cols = 4;
  std::size_t k_features = kColumnFeatures;
  std::size_t n_max_tables = 5;
  std::vector<double> norm_min;  // per vertex dimension; empty means unnormalized
  std::vector<double> norm_max;

  std::size_t vertex_width() const { return (k_features + m_max_cols) * m_max_cols + 2; }

  bool operator==(const FeatureConfig&) const = default;
};

struct FeatureGraph {
  Matrix V;  // [n_tables, vertex_width]
  Matrix E;  // [n_tables, n_tables]

  Eigen::Index tables() const { return V.rows(); }
};

inline std::array<double, kColumnFeatures> extract_column_stats(const Column& c) {
  require(!c.values.empty(), "extract_column_stats: empty column '" + c.name + "'");
  const double n = static_cast<double>(c.values.size());
  double mean = 0.0;
  for (auto v : c.values) mean += static_cast<double>(v);
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (auto v : c.values) {
    const double d = static_cast<double>(v) - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  double skew = 0.0, kurt = 0.0;
  if (m2 > 0.0) {
    skew = std::clamp(m3 / std::pow(m2, 1.5), -10.0, 10.0);
    kurt = std::clamp(m4 / (m2 * m2) - 3.0, -10.0, 10.0);
  }
  const auto [mn, mx] = std::minmax_element(c.values.begin(), c.values.end());
  const std::unordered_set<std::int64_t> distinct(c.values.begin(), c.values.end());
  return {skew, static_cast<double>(distinct.size()), kurt, static_cast<double>(*mx - *mn), std::sqrt(m2), mean};
}

inline double abs_pearson(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  require(a.size() == b.size(), "abs_pearson: length mismatch");
  if (a.empty()) return 0.0;
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += static_cast<double>(a[i]);
    mb += static_cast<double>(b[i]);
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = static_cast<double>(a[i]) - ma, db = static_cast<double>(b[i]) - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::min(1.0, std::abs(sab) / std::sqrt(saa * sbb));
}

inline Matrix extract_correlation_block(const std::vector<const Column*>& columns, std::size_t m) {
  require(columns.size() <= m, "extract_correlation_block: more columns than m");
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
    for (std::size_t j = i + 1; j < columns.size(); ++j) {
      const double r = abs_pearson(columns[i]->values, columns[j]->values);
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r;
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = r;
    }
  }
  return out;
}

inline Matrix extract_correlation_block(const Table& t, std::size_t m) {
  std::vector<const Column*> cols;
  for (const auto& c : t.columns) cols.push_back(&c);
  return extract_correlation_block(cols, m);
}

inline std::size_t distinct_count(const std::vector<std::int64_t>& v) {
  return std::unordered_set<std::int64_t>(v.begin(), v.end()).size();
}

// Unnormalized feature graph with m column slots per vertex.
inline FeatureGraph raw_feature_graph(const Dataset& d, std::size_t m) {
  const std::size_t k = kColumnFeatures;
  const std::size_t width = (k + m) * m + 2;
  const auto n = static_cast<Eigen::Index>(d.tables.size());
  FeatureGraph g{Matrix::Zero(n, static_cast<Eigen::Index>(width)), Matrix::Zero(n, n)};
  for (std::size_t t = 0; t < d.tables.size(); ++t) {
    const Table& table = d.tables[t];
    const auto cols = d.non_key_columns(table);
    if (cols.size() > m)
      throw Error("table '" + table.name + "' has " + std::to_string(cols.size()) + " columns, model supports " +
                  std::to_string(m));
    const auto row = static_cast<Eigen::Index>(t);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (cols[c]->values.empty()) continue;
      const auto stats = extract_column_stats(*cols[c]);
      for (std::size_t s = 0; s < k; ++s) g.V(row, static_cast<Eigen::Index>(c * k + s)) = stats[s];
    }
    const Matrix corr = extract_correlation_block(cols, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        g.V(row, static_cast<Eigen::Index>(k * m + i * m + j)) = corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    g.V(row, static_cast<Eigen::Index>(width - 2)) = static_cast<double>(table.rows());
    g.V(row, static_cast<Eigen::Index>(width - 1)) = static_cast<double>(cols.size());
  }
  for (const auto& e : d.joins) {
    const auto i = d.table_index(e.pk_table), j = d.table_index(e.fk_table);
    const double pk = static_cast<double>(distinct_count(d.tables[i].find(e.pk_column)->values));
    const double fk = static_cast<double>(distinct_count(d.tables[j].find(e.fk_column)->values));
    g.E(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pk > 0.0 ? std::min(1.0, fk / pk) : 0.0;
  }
  return g;
}

// Spread below rounding noise counts as constant.
inline bool degenerate_range(double lo, double hi) {
  return !(hi - lo > 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)}));
}

// Per-dimension min-max scaling into [0,1]; degenerate dimensions map to 1.
inline FeatureGraph normalize(FeatureGraph g, const FeatureConfig& cfg) {
  if (cfg.norm_min.empty()) return g;
  require(static_cast<std::size_t>(g.V.cols()) == cfg.norm_min.size(), "normalize: vertex width mismatch");
  for (Eigen::Index c = 0; c < g.V.cols(); ++c) {
    const double lo = cfg.norm_min[static_cast<std::size_t>(c)], hi = cfg.norm_max[static_cast<std::size_t>(c)];
    for (Eigen::Index r = 0; r < g.V.rows(); ++r)
      g.V(r, c) = degenerate_range(lo, hi) ? 1.0 : std::clamp((g.V(r, c) - lo) / (hi - lo), 0.0, 1.0);
  }
  return g;
}

inline void check_bounds(const Dataset& d, const FeatureConfig& cfg) {
  if (d.tables.size() > cfg.n_max_tables)
    throw Error("dataset '" + d.id + "' has " + std::to_string(d.tables.size()) + " tables, model supports " +
                std::to_string(cfg.n_max_tables));
  for (const auto& t : d.tables)
    if (d.non_key_columns(t).size() > cfg.m_max_cols)
      throw Error("table '" + t.name + "' exceeds the model's column limit of " + std::to_string(cfg.m_max_cols));
}

inline FeatureGraph build_feature_graph(const Dataset& d, const FeatureConfig& cfg) {
  check_bounds(d, cfg);
  return normalize(raw_feature_graph(d, cfg.m_max_cols), cfg);
}

inline FeatureConfig fit_normalization(const std::vector<const Dataset*>& corpus) {
  require(!corpus.empty(), "fit_normalization: empty corpus");
  FeatureConfig cfg;
  cfg.m_max_cols = 1;
  cfg.n_max_tables = 1;
  for (const Dataset* d : corpus) {
    cfg.n_max_tables = std::max(cfg.n_max_tables, d->tables.size());
    for (const auto& t : d->tables) cfg.m_max_cols = std::max(cfg.m_max_cols, d->non_key_columns(t).size());
  }
  const auto width = cfg.vertex_width();
  cfg.norm_min.assign(width, std::numeric_limits<double>::infinity());
  cfg.norm_max.assign(width, -std::numeric_limits<double>::infinity());
  for (const Dataset* d : corpus) {
    const FeatureGraph g = raw_feature_graph(*d, cfg.m_max_cols);
    for (Eigen::Index r = 0; r < g.V.rows(); ++r)
      for (std::size_t c = 0; c < width; ++c) {
        cfg.norm_min[c] = std::min(cfg.norm_min[c], g.V(r, static_cast<Eigen::Index>(c)));
        cfg.norm_max[c] = std::max(cfg.norm_max[c], g.V(r, static_cast<Eigen::Index>(c)));
      }
  }
  for (std::size_t c = 0; c < width; ++c)
    if (!std::isfinite(cfg.norm_min[c])) cfg.norm_min[c] = cfg.norm_max[c] = 0.0;
  return cfg;
}

inline FeatureConfig fit_normalization(const std::vector<Dataset>& corpus) {
  std::vector<const Dataset*> ptrs;
  for (const auto& d : corpus) ptrs.push_back(&d);
  return fit_normalization(ptrs);
}

// V rows padded to n_max_tables, then E padded to n_max_tables^2, row-major.
inline Vector flatten(const FeatureGraph& g, std::size_t n_max_tables) {
  require(static_cast<std::size_t>(g.V.rows()) <= n_max_tables, "flatten: graph has more tables than n_max_tables");
  const auto n = static_cast<Eigen::Index>(n_max_tables);
  const auto w = g.V.cols();
  Vector out = Vector::Zero(n * w + n * n);
  for (Eigen::Index r = 0; r < g.V.rows(); ++r)
    for (Eigen::Index c = 0; c < w; ++c) out(r * w + c) = g.V(r, c);
  for (Eigen::Index r = 0; r < g.E.rows(); ++r)
    for (Eigen::Index c = 0; c < g.E.cols(); ++c) out(n * w + r * n + c) = g.E(r, c);
  return out;
}

inline json to_json(const FeatureConfig& cfg) {
  return {{"m_max_cols", cfg.m_max_cols}, {"k_features", cfg.k_features}, {"n_max_tables", cfg.n_max_tables},
          {"norm_min", cfg.norm_min}, {"norm_max", cfg.norm_max}};
}

inline FeatureConfig feature_config_from_json(const json& j) {
  FeatureConfig cfg;
  cfg.m_max_cols = j.at("m_max_cols");
  cfg.k_features = j.at("k_features");
  cfg.n_max_tables = j.at("n_max_tables");
  cfg.norm_min = j.at("norm_min").get<std::vector<double>>();
  cfg.norm_max = j.at("norm_max").get<std::vector<double>>();
  require(cfg.k_features == kColumnFeatures, "feature config: unsupported k_features");
  require(cfg.norm_min.empty() || cfg.norm_min.size() == cfg.vertex_width(), "feature config: normalization width mismatch");
  require(cfg.norm_min.size() == cfg.norm_max.size(), "feature config: min/max size mismatch");
  return cfg;
}

inline json to_json(const FeatureGraph& g) { return {{"V", matrix_to_json(g.V)}, {"E", matrix_to_json(g.E)}}; }

inline FeatureGraph feature_graph_from_json(const json& j) {
  return {matrix_from_json(j.at("V")), matrix_from_json(j.at("E"))};
}

}  // namespace autoce
