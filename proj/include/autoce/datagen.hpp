#pragma once

// Synthetic dataset generation with controlled skewness, adjacent-column
// correlation and PK-FK join correlation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "autoce/corpus.hpp"
#include "autoce/error.hpp"
#include "autoce/rng.hpp"

namespace autoce {

struct GenParams {
  int n_tables = 1;
  std::pair<int, int> rows_range{1000, 3000};
  std::pair<int, int> cols_range{2, 4};
  int domain_size = 100;
  std::pair<double, double> skew_range{0.0, 1.0};
  std::pair<double, double> corr_range{0.0, 1.0};
  std::pair<double, double> join_corr_range{0.2, 1.0};
  int n_main_tables = 1;
  std::uint64_t seed = 0;

  void check() const {
    require(n_tables >= 1, "GenParams: n_tables must be >= 1");
    require(rows_range.first >= 0 && rows_range.first <= rows_range.second, "GenParams: bad rows_range");
    require(cols_range.first >= 1 && cols_range.first <= cols_range.second, "GenParams: bad cols_range");
    require(domain_size >= 2, "GenParams: domain_size must be >= 2");
    auto unit = [](std::pair<double, double> r) { return 0.0 <= r.first && r.first <= r.second && r.second <= 1.0; };
    require(unit(skew_range), "GenParams: skew_range must be ordered within [0,1]");
    require(unit(corr_range), "GenParams: corr_range must be ordered within [0,1]");
    require(unit(join_corr_range) && join_corr_range.first > 0.0, "GenParams: join_corr_range must be within (0,1]");
    require(n_main_tables >= 1 && n_main_tables <= n_tables, "GenParams: need 1 <= n_main_tables <= n_tables");
  }
};

inline constexpr double kMaxSkew = 0.999;
inline constexpr std::size_t kSkewGridPoints = 4096;

// Inverse-CDF sampler for the column-skew density over x in [0,1]
//
//   f(x) ∝ (1 + x (skew - 1))^(-1 - 1/(skew - 1))
//
// a generalized Pareto shape with xi = skew - 1. skew = 0 is exactly uniform
// and the density tilts toward x = 0 as skew grows (ratio f(0)/f(1) -> e).
// The density is tabulated on a fixed grid and integrated by trapezoids.
class SkewSampler {
 public:
  explicit SkewSampler(double skew) : skew_(std::clamp(skew, 0.0, kMaxSkew)) {
    if (skew_ == 0.0) return;
    const double xi = skew_ - 1.0;
    const double exponent = -1.0 - 1.0 / xi;
    grid_.resize(kSkewGridPoints);
    cdf_.resize(kSkewGridPoints);
    double prev = 0.0;
    for (std::size_t g = 0; g < kSkewGridPoints; ++g) {
      const double x = static_cast<double>(g) / static_cast<double>(kSkewGridPoints - 1);
      const double f = std::pow(1.0 + x * xi, exponent);
      grid_[g] = x;
      cdf_[g] = g == 0 ? 0.0 : cdf_[g - 1] + 0.5 * (prev + f) / static_cast<double>(kSkewGridPoints - 1);
      prev = f;
    }
    const double total = cdf_.back();
    for (auto& c : cdf_) c /= total;
  }

  double skew() const { return skew_; }

  // Sample x in [0, 1).
  double sample_unit(Rng& rng) const {
    const double u = rng.uniform();
    if (cdf_.empty()) return u;
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    const std::size_t lo = hi - 1;
    const double span = cdf_[hi] - cdf_[lo];
    const double t = span > 0.0 ? (u - cdf_[lo]) / span : 0.0;
    return std::min(grid_[lo] + t * (grid_[hi] - grid_[lo]), std::nextafter(1.0, 0.0));
  }

  // Affine map of x onto the integer domain [1, domain].
  std::int64_t sample(Rng& rng, int domain) const {
    const double x = sample_unit(rng);
    const auto v = static_cast<std::int64_t>(std::floor(x * domain));
    return 1 + std::min<std::int64_t>(v, domain - 1);
  }

 private:
  double skew_;
  std::vector<double> grid_;
  std::vector<double> cdf_;
};

inline Column sample_skewed_column(std::size_t rows, int domain, double skew, Rng& rng, std::string name = "c0") {
  require(domain >= 2, "sample_skewed_column: domain must be >= 2");
  const SkewSampler sampler(skew);
  Column c;
  c.name = std::move(name);
  c.values.resize(rows);
  for (auto& v : c.values) v = sampler.sample(rng, domain);
  return c;
}

// Returns b' with b'[i] = a[i] with probability r, else b[i].
inline Column inject_column_correlation(const Column& a, const Column& b, double r, Rng& rng) {
  require(a.values.size() == b.values.size(), "inject_column_correlation: length mismatch");
  Column out = b;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    if (rng.bernoulli(r)) out.values[i] = a.values[i];
  return out;
}

inline Table gen_single_table(const GenParams& params, Rng& rng, std::string name = "t0") {
  params.check();
  Table t;
  t.name = std::move(name);
  const auto rows = static_cast<std::size_t>(rng.uniform_int(params.rows_range.first, params.rows_range.second));
  const auto cols = rng.uniform_int(params.cols_range.first, params.cols_range.second);
  for (std::int64_t c = 0; c < cols; ++c) {
    const double skew = rng.uniform(params.skew_range.first, params.skew_range.second);
    t.columns.push_back(sample_skewed_column(rows, params.domain_size, skew, rng, "c" + std::to_string(c)));
  }
  for (std::size_t c = 0; c + 1 < t.columns.size(); ++c) {
    const double r = rng.uniform(params.corr_range.first, params.corr_range.second);
    t.columns[c + 1] = inject_column_correlation(t.columns[c], t.columns[c + 1], r, rng);
  }
  return t;
}

// Fills `rows` FK values from a random ceil(p*|pk|)-subset of the PK values.
// When rows allow, every subset member is placed once before the remaining
// rows are drawn uniformly, so distinct(FK)/distinct(PK) tracks p.
inline std::vector<std::int64_t> sample_foreign_keys(const std::vector<std::int64_t>& pk_values, double p,
                                                     std::size_t rows, Rng& rng) {
  std::vector<std::int64_t> pool = pk_values;
  if (pool.empty() || rows == 0) return std::vector<std::int64_t>(rows, pool.empty() ? 0 : pool.front());
  const auto keep = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(p * static_cast<double>(pool.size()) - 1e-9)),
                                            1, pool.size());
  for (std::size_t i = 0; i < keep; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                            static_cast<std::int64_t>(pool.size()) - 1));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(keep);

  std::vector<std::int64_t> fk;
  fk.reserve(rows);
  if (rows >= keep) fk.insert(fk.end(), pool.begin(), pool.end());
  while (fk.size() < rows) fk.push_back(pool[rng.index(pool.size())]);
  rng.shuffle(fk.begin(), fk.end());
  return fk;
}

inline Dataset gen_multi_table(const GenParams& params, Rng& rng, std::string id = "d0") {
  params.check();
  Dataset d;
  d.id = std::move(id);
  for (int i = 0; i < params.n_tables; ++i) d.tables.push_back(gen_single_table(params, rng, "t" + std::to_string(i)));

  std::vector<std::size_t> order(d.tables.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  const auto n_main = static_cast<std::size_t>(params.n_main_tables);

  for (std::size_t m = 0; m < n_main; ++m) {
    Table& t = d.tables[order[m]];
    Column id_col{"id", std::vector<std::int64_t>(t.rows()), {}};
    std::iota(id_col.values.begin(), id_col.values.end(), std::int64_t{1});
    t.columns.insert(t.columns.begin(), std::move(id_col));
    t.pk = "id";
  }

  auto link = [&](std::size_t fk_index, std::size_t pk_index) {
    Table& fk_table = d.tables[fk_index];
    const Table& pk_table = d.tables[pk_index];
    const double p = rng.uniform(params.join_corr_range.first, params.join_corr_range.second);
    const std::string fk_name = "fk_" + pk_table.name;
    fk_table.columns.push_back(Column{fk_name, sample_foreign_keys(pk_table.find("id")->values, p, fk_table.rows(), rng), {}});
    d.joins.push_back(JoinEdge{pk_table.name, "id", fk_table.name, fk_name});
  };

  // Main tables may reference an earlier main table, so the schema stays a forest.
  for (std::size_t m = 1; m < n_main; ++m)
    if (rng.bernoulli(0.5)) link(order[m], order[rng.index(m)]);
  for (std::size_t k = n_main; k < order.size(); ++k) link(order[k], order[rng.index(n_main)]);
  return d;
}

}  // namespace autoce
