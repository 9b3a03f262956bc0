#pragma once

// Candidate cardinality estimators and the labeling testbed.
//
// Estimator ids are "<kind>" or "<kind>@<param>" (e.g. "sample-eval@1.0");
// the kind selects the registry entry and the optional suffix sets the
// kind's primary hyperparameter. Latency is reported either in deterministic
// cost units (primitive lookups / rows touched / multiply-adds) or in
// wall-clock milliseconds.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "autoce/corpus.hpp"
#include "autoce/error.hpp"
#include "autoce/nn.hpp"
#include "autoce/rng.hpp"
#include "autoce/workload.hpp"

namespace autoce {

enum class Family { data_driven, query_driven };

inline std::string to_string(Family f) { return f == Family::data_driven ? "data_driven" : "query_driven"; }

struct EstimatorSpec {
  std::string id;
  Family family = Family::data_driven;
  std::map<std::string, double> hyperparams;

  std::string kind() const { return id.substr(0, id.find_first_of("@#")); }

  double param(const std::string& key, double fallback) const {
    const auto it = hyperparams.find(key);
    return it == hyperparams.end() ? fallback : it->second;
  }
};

using ScoreVector = std::vector<double>;

struct Estimate {
  double card = 1.0;
  double latency = 0.0;  // cost units as produced by the model
};

// ---------------------------------------------------------------------------
// Schema snapshot used to reject queries from a different dataset.

struct SchemaInfo {
  struct ColumnInfo {
    std::string name;
    bool key = false;
    std::int64_t min = 0;
    std::int64_t max = 0;
  };
  struct TableInfo {
    std::string name;
    std::size_t rows = 0;
    std::vector<ColumnInfo> columns;
  };
  std::vector<TableInfo> tables;
  std::vector<JoinEdge> joins;

  static SchemaInfo of(const Dataset& d) {
    SchemaInfo s;
    for (const auto& t : d.tables) {
      TableInfo ti{t.name, t.rows(), {}};
      for (const auto& c : t.columns) {
        ColumnInfo ci{c.name, d.is_key_column(t.name, c.name), 0, 0};
        if (!c.values.empty()) {
          const auto [mn, mx] = std::minmax_element(c.values.begin(), c.values.end());
          ci.min = *mn;
          ci.max = *mx;
        }
        ti.columns.push_back(std::move(ci));
      }
      s.tables.push_back(std::move(ti));
    }
    s.joins = d.joins;
    return s;
  }

  std::size_t table_index(const std::string& name) const {
    for (std::size_t i = 0; i < tables.size(); ++i)
      if (tables[i].name == name) return i;
    throw Error("schema mismatch: unknown table '" + name + "'");
  }

  const ColumnInfo& column(const std::string& table, const std::string& col) const {
    for (const auto& c : tables[table_index(table)].columns)
      if (c.name == col) return c;
    throw Error("schema mismatch: unknown column '" + table + "." + col + "'");
  }

  std::size_t join_index(const JoinEdge& e) const {
    for (std::size_t i = 0; i < joins.size(); ++i)
      if (joins[i] == e) return i;
    throw Error("schema mismatch: join " + e.pk_table + "." + e.pk_column + " = " + e.fk_table + "." + e.fk_column);
  }

  void check(const Query& q) const {
    for (const auto& t : q.tables) table_index(t);
    for (const auto& e : q.joins) join_index(e);
    for (const auto& r : q.ranges) column(r.table, r.column);
  }

  json to_json() const {
    json ts = json::array();
    for (const auto& t : tables) {
      json cs = json::array();
      for (const auto& c : t.columns) cs.push_back({c.name, c.key, c.min, c.max});
      ts.push_back({{"name", t.name}, {"rows", t.rows}, {"columns", std::move(cs)}});
    }
    json js = json::array();
    for (const auto& e : joins) js.push_back({e.pk_table, e.pk_column, e.fk_table, e.fk_column});
    return {{"tables", std::move(ts)}, {"joins", std::move(js)}};
  }

  static SchemaInfo from_json(const json& j) {
    SchemaInfo s;
    for (const auto& t : j.at("tables")) {
      TableInfo ti{t.at("name"), t.at("rows"), {}};
      for (const auto& c : t.at("columns")) ti.columns.push_back(ColumnInfo{c.at(0), c.at(1), c.at(2), c.at(3)});
      s.tables.push_back(std::move(ti));
    }
    for (const auto& e : j.at("joins")) s.joins.push_back(JoinEdge{e.at(0), e.at(1), e.at(2), e.at(3)});
    return s;
  }
};

class Estimator {
 public:
  virtual ~Estimator() = default;
  // Raw estimate in cost units; callers floor the cardinality.
  virtual Estimate estimate(const Query& q) const = 0;
  virtual json state() const = 0;
};

// ---------------------------------------------------------------------------
// Data-driven estimators share the join model: per-table filtered sizes
// multiplied along the join tree, each PK-FK edge divided by
// max(ndv(pk), ndv(fk)) (containment of join key domains).

class DataDrivenEstimator : public Estimator {
 public:
  Estimate estimate(const Query& q) const final {
    schema_.check(q);
    Estimate e{1.0, 0.0};
    for (const auto& t : q.tables) {
      const auto ti = schema_.table_index(t);
      double cost = 0.0;
      const double sel = table_selectivity(ti, q, cost);
      e.card *= static_cast<double>(schema_.tables[ti].rows) * sel;
      e.latency += cost + 1.0;
    }
    for (const auto& j : q.joins) {
      e.card /= std::max(1.0, edge_ndv_[schema_.join_index(j)]);
      e.latency += 1.0;
    }
    return e;
  }

  const SchemaInfo& schema() const { return schema_; }

 protected:
  explicit DataDrivenEstimator(SchemaInfo schema, std::vector<double> edge_ndv)
      : schema_(std::move(schema)), edge_ndv_(std::move(edge_ndv)) {}

  static std::vector<double> compute_edge_ndv(const Dataset& d) {
    std::vector<double> out;
    auto ndv = [](const Column& c) {
      std::vector<std::int64_t> v = c.values;
      std::sort(v.begin(), v.end());
      return static_cast<double>(std::unique(v.begin(), v.end()) - v.begin());
    };
    for (const auto& e : d.joins)
      out.push_back(std::max(ndv(*d.find(e.pk_table)->find(e.pk_column)), ndv(*d.find(e.fk_table)->find(e.fk_column))));
    return out;
  }

  virtual double table_selectivity(std::size_t table, const Query& q, double& cost) const = 0;

  json base_state() const { return {{"schema", schema_.to_json()}, {"edge_ndv", edge_ndv_}}; }

  SchemaInfo schema_;
  std::vector<double> edge_ndv_;
};

// Integer-span overlap of [lo, hi] with [a, b] as a fraction of the span.
inline double overlap_fraction(std::int64_t lo, std::int64_t hi, std::int64_t a, std::int64_t b) {
  const auto l = std::max(lo, a), h = std::min(hi, b);
  if (h < l) return 0.0;
  return static_cast<double>(h - l + 1) / static_cast<double>(hi - lo + 1);
}

// Per-column equi-depth histograms combined under attribute-value independence.
class HistAvi final : public DataDrivenEstimator {
 public:
  struct Bucket {
    std::int64_t lo, hi;
    double count;
  };

  static std::vector<Bucket> equi_depth(std::vector<std::int64_t> values, std::size_t max_buckets) {
    std::vector<Bucket> out;
    if (values.empty()) return out;
    std::sort(values.begin(), values.end());
    const double target = static_cast<double>(values.size()) / static_cast<double>(std::max<std::size_t>(max_buckets, 1));
    std::size_t i = 0;
    double cumulative = 0.0;
    while (i < values.size()) {
      Bucket b{values[i], values[i], 0.0};
      const double limit = target * static_cast<double>(out.size() + 1);
      while (i < values.size()) {
        std::size_t j = i;
        while (j < values.size() && values[j] == values[i]) ++j;
        b.hi = values[i];
        b.count += static_cast<double>(j - i);
        cumulative += static_cast<double>(j - i);
        i = j;
        if (cumulative >= limit - 1e-9 && out.size() + 1 < max_buckets) break;
      }
      out.push_back(b);
    }
    return out;
  }

  static std::unique_ptr<HistAvi> train(const EstimatorSpec& spec, const Dataset& d) {
    const auto buckets = static_cast<std::size_t>(spec.param("buckets", 32));
    require(buckets >= 1, "hist-avi: buckets must be >= 1");
    std::vector<std::vector<std::vector<Bucket>>> hists;
    for (const auto& t : d.tables) {
      std::vector<std::vector<Bucket>> per_col;
      for (const auto& c : t.columns)
        per_col.push_back(d.is_key_column(t.name, c.name) ? std::vector<Bucket>{} : equi_depth(c.values, buckets));
      hists.push_back(std::move(per_col));
    }
    return std::unique_ptr<HistAvi>(new HistAvi(SchemaInfo::of(d), compute_edge_ndv(d), std::move(hists)));
  }

  static std::unique_ptr<HistAvi> load(const json& j) {
    std::vector<std::vector<std::vector<Bucket>>> hists;
    for (const auto& jt : j.at("hists")) {
      std::vector<std::vector<Bucket>> per_col;
      for (const auto& jc : jt) {
        std::vector<Bucket> bs;
        for (const auto& b : jc) bs.push_back(Bucket{b.at(0), b.at(1), b.at(2)});
        per_col.push_back(std::move(bs));
      }
      hists.push_back(std::move(per_col));
    }
    return std::unique_ptr<HistAvi>(new HistAvi(SchemaInfo::from_json(j.at("schema")),
                                                j.at("edge_ndv").get<std::vector<double>>(), std::move(hists)));
  }

  const std::vector<Bucket>& histogram(std::size_t table, std::size_t column) const { return hists_.at(table).at(column); }

  json state() const override {
    json j = base_state();
    json hs = json::array();
    for (const auto& t : hists_) {
      json jt = json::array();
      for (const auto& c : t) {
        json jc = json::array();
        for (const auto& b : c) jc.push_back({b.lo, b.hi, b.count});
        jt.push_back(std::move(jc));
      }
      hs.push_back(std::move(jt));
    }
    j["hists"] = std::move(hs);
    return j;
  }

 private:
  HistAvi(SchemaInfo s, std::vector<double> ndv, std::vector<std::vector<std::vector<Bucket>>> hists)
      : DataDrivenEstimator(std::move(s), std::move(ndv)), hists_(std::move(hists)) {}

  double table_selectivity(std::size_t ti, const Query& q, double& cost) const override {
    const auto& table = schema_.tables[ti];
    double sel = 1.0;
    for (const auto& r : q.ranges) {
      if (r.table != table.name) continue;
      std::size_t ci = 0;
      while (table.columns[ci].name != r.column) ++ci;
      const auto& hist = hists_[ti][ci];
      if (hist.empty()) continue;  // predicate on a key column: assume 1
      double total = 0.0, hit = 0.0;
      for (const auto& b : hist) {
        total += b.count;
        if (b.hi < r.lo || b.lo > r.hi) continue;
        hit += b.count * overlap_fraction(b.lo, b.hi, r.lo, r.hi);
        cost += 1.0;
      }
      cost += 1.0;
      sel *= total > 0.0 ? hit / total : 0.0;
    }
    return sel;
  }

  std::vector<std::vector<std::vector<Bucket>>> hists_;
};

// Chain factorization P(c0) P(c1|c0) ... over equi-width bins of the
// non-key columns, evaluated with a forward pass.
class ChainBayes final : public DataDrivenEstimator {
 public:
  struct Binning {
    std::int64_t min = 0;
    std::int64_t max = 0;
    std::size_t bins = 1;

    std::int64_t bin_lo(std::size_t b) const {
      const auto width = max - min + 1;
      return min + static_cast<std::int64_t>(b) * width / static_cast<std::int64_t>(bins);
    }
    std::int64_t bin_hi(std::size_t b) const { return bin_lo(b + 1) - 1; }
    std::size_t bin_of(std::int64_t v) const {
      const auto width = max - min + 1;
      auto b = static_cast<std::size_t>((v - min) * static_cast<std::int64_t>(bins) / width);
      while (b + 1 < bins && v > bin_hi(b)) ++b;
      while (b > 0 && v < bin_lo(b)) --b;
      return b;
    }
  };

  struct TableModel {
    std::vector<std::string> columns;  // non-key columns in chain order
    std::vector<Binning> binning;
    std::vector<double> first;              // counts of column 0 bins
    std::vector<Matrix> joint;              // joint[k](b, b') for columns k, k+1
  };

  static std::unique_ptr<ChainBayes> train(const EstimatorSpec& spec, const Dataset& d) {
    const auto bins = static_cast<std::size_t>(spec.param("bins", 16));
    require(bins >= 1, "chain-bayes: bins must be >= 1");
    std::vector<TableModel> models;
    for (const auto& t : d.tables) {
      TableModel m;
      const auto cols = d.non_key_columns(t);
      for (const Column* c : cols) {
        m.columns.push_back(c->name);
        Binning b;
        if (!c->values.empty()) {
          const auto [mn, mx] = std::minmax_element(c->values.begin(), c->values.end());
          b.min = *mn;
          b.max = *mx;
        }
        b.bins = std::min<std::size_t>(bins, static_cast<std::size_t>(b.max - b.min + 1));
        m.binning.push_back(b);
      }
      if (!cols.empty()) {
        m.first.assign(m.binning[0].bins, 0.0);
        for (auto v : cols[0]->values) m.first[m.binning[0].bin_of(v)] += 1.0;
      }
      for (std::size_t k = 0; k + 1 < cols.size(); ++k) {
        Matrix joint = Matrix::Zero(static_cast<Eigen::Index>(m.binning[k].bins),
                                    static_cast<Eigen::Index>(m.binning[k + 1].bins));
        for (std::size_t r = 0; r < t.rows(); ++r)
          joint(static_cast<Eigen::Index>(m.binning[k].bin_of(cols[k]->values[r])),
                static_cast<Eigen::Index>(m.binning[k + 1].bin_of(cols[k + 1]->values[r]))) += 1.0;
        m.joint.push_back(std::move(joint));
      }
      models.push_back(std::move(m));
    }
    return std::unique_ptr<ChainBayes>(new ChainBayes(SchemaInfo::of(d), compute_edge_ndv(d), std::move(models)));
  }

  static std::unique_ptr<ChainBayes> load(const json& j) {
    std::vector<TableModel> models;
    for (const auto& jm : j.at("models")) {
      TableModel m;
      m.columns = jm.at("columns").get<std::vector<std::string>>();
      for (const auto& b : jm.at("binning")) m.binning.push_back(Binning{b.at(0), b.at(1), b.at(2)});
      m.first = jm.at("first").get<std::vector<double>>();
      for (const auto& jj : jm.at("joint")) m.joint.push_back(matrix_from_json(jj));
      models.push_back(std::move(m));
    }
    return std::unique_ptr<ChainBayes>(new ChainBayes(SchemaInfo::from_json(j.at("schema")),
                                                      j.at("edge_ndv").get<std::vector<double>>(), std::move(models)));
  }

  json state() const override {
    json j = base_state();
    json ms = json::array();
    for (const auto& m : models_) {
      json bs = json::array();
      for (const auto& b : m.binning) bs.push_back({b.min, b.max, b.bins});
      json js = json::array();
      for (const auto& jm : m.joint) js.push_back(matrix_to_json(jm));
      ms.push_back({{"columns", m.columns}, {"binning", std::move(bs)}, {"first", m.first}, {"joint", std::move(js)}});
    }
    j["models"] = std::move(ms);
    return j;
  }

 private:
  ChainBayes(SchemaInfo s, std::vector<double> ndv, std::vector<TableModel> models)
      : DataDrivenEstimator(std::move(s), std::move(ndv)), models_(std::move(models)) {}

  double table_selectivity(std::size_t ti, const Query& q, double& cost) const override {
    const auto& m = models_[ti];
    const auto& name = schema_.tables[ti].name;
    if (m.columns.empty()) return 1.0;
    // Per-column range (intersection of all predicates on that column).
    std::vector<std::pair<std::int64_t, std::int64_t>> range(m.columns.size(),
        {std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::max()});
    bool any = false;
    for (const auto& r : q.ranges) {
      if (r.table != name) continue;
      for (std::size_t c = 0; c < m.columns.size(); ++c) {
        if (m.columns[c] != r.column) continue;
        range[c].first = std::max(range[c].first, r.lo);
        range[c].second = std::min(range[c].second, r.hi);
        any = true;
      }
    }
    if (!any) return 1.0;
    auto fractions = [&](std::size_t c) {
      const auto& b = m.binning[c];
      Vector f(static_cast<Eigen::Index>(b.bins));
      for (std::size_t k = 0; k < b.bins; ++k)
        f(static_cast<Eigen::Index>(k)) = overlap_fraction(b.bin_lo(k), b.bin_hi(k), range[c].first, range[c].second);
      return f;
    };
    const double rows = std::accumulate(m.first.begin(), m.first.end(), 0.0);
    if (rows <= 0.0) return 0.0;
    Vector alpha = Eigen::Map<const Vector>(m.first.data(), static_cast<Eigen::Index>(m.first.size())) / rows;
    alpha = alpha.cwiseProduct(fractions(0));
    cost += static_cast<double>(m.binning[0].bins);
    for (std::size_t k = 0; k < m.joint.size(); ++k) {
      const Matrix& joint = m.joint[k];
      const Vector marg = joint.rowwise().sum();
      Vector scaled = alpha;
      for (Eigen::Index b = 0; b < scaled.size(); ++b) scaled(b) = marg(b) > 0.0 ? alpha(b) / marg(b) : 0.0;
      alpha = (joint.transpose() * scaled).cwiseProduct(fractions(k + 1));
      cost += static_cast<double>(joint.size());
    }
    return alpha.sum();
  }

  std::vector<TableModel> models_;
};

// Bernoulli row sample per table; the query is evaluated exactly on the
// sample and scaled by rate^-(tables).
class SampleEval final : public Estimator {
 public:
  static std::unique_ptr<SampleEval> train(const EstimatorSpec& spec, const Dataset& d) {
    const double rate = spec.param("rate", 0.1);
    require(rate > 0.0 && rate <= 1.0, "sample-eval: rate must be in (0,1]");
    Rng rng(static_cast<std::uint64_t>(spec.param("seed", 0)));
    Dataset sample;
    sample.id = d.id;
    sample.joins = d.joins;
    for (const auto& t : d.tables) {
      Table s{t.name, {}, t.pk};
      for (const auto& c : t.columns) s.columns.push_back(Column{c.name, {}, {}});
      for (std::size_t r = 0; r < t.rows(); ++r) {
        if (!rng.bernoulli(rate)) continue;
        for (std::size_t c = 0; c < t.columns.size(); ++c) s.columns[c].values.push_back(t.columns[c].values[r]);
      }
      sample.tables.push_back(std::move(s));
    }
    return std::unique_ptr<SampleEval>(new SampleEval(SchemaInfo::of(d), rate, std::move(sample)));
  }

  static std::unique_ptr<SampleEval> load(const json& j) {
    Dataset sample;
    for (const auto& jt : j.at("tables")) {
      Table t{jt.at("name"), {}, std::nullopt};
      for (const auto& jc : jt.at("columns")) t.columns.push_back(Column{jc.at("name"), jc.at("values"), {}});
      sample.tables.push_back(std::move(t));
    }
    auto schema = SchemaInfo::from_json(j.at("schema"));
    sample.joins = schema.joins;
    return std::unique_ptr<SampleEval>(new SampleEval(std::move(schema), j.at("rate"), std::move(sample)));
  }

  Estimate estimate(const Query& q) const override {
    schema_.check(q);
    Estimate e;
    e.card = static_cast<double>(exact_card(sample_, q)) / std::pow(rate_, static_cast<double>(q.tables.size()));
    for (const auto& t : q.tables) e.latency += static_cast<double>(sample_.find(t)->rows()) + 1.0;
    return e;
  }

  json state() const override {
    json ts = json::array();
    for (const auto& t : sample_.tables) {
      json cs = json::array();
      for (const auto& c : t.columns) cs.push_back({{"name", c.name}, {"values", c.values}});
      ts.push_back({{"name", t.name}, {"columns", std::move(cs)}});
    }
    return {{"schema", schema_.to_json()}, {"rate", rate_}, {"tables", std::move(ts)}};
  }

  const Dataset& sample() const { return sample_; }

 private:
  SampleEval(SchemaInfo s, double rate, Dataset sample) : schema_(std::move(s)), rate_(rate), sample_(std::move(sample)) {}

  SchemaInfo schema_;
  double rate_;
  Dataset sample_;
};

// ---------------------------------------------------------------------------
// Query-driven estimators regress log-cardinality from a fixed query
// encoding: table one-hot | join-edge one-hot | per-column normalized range
// width (1.0 when the column is unfiltered).

class QueryEncoding {
 public:
  explicit QueryEncoding(SchemaInfo schema) : schema_(std::move(schema)) {
    for (std::size_t t = 0; t < schema_.tables.size(); ++t)
      for (std::size_t c = 0; c < schema_.tables[t].columns.size(); ++c)
        if (!schema_.tables[t].columns[c].key) columns_.emplace_back(t, c);
  }

  std::size_t width() const { return schema_.tables.size() + schema_.joins.size() + columns_.size(); }
  const SchemaInfo& schema() const { return schema_; }

  RowVector encode(const Query& q) const {
    schema_.check(q);
    RowVector x = RowVector::Zero(static_cast<Eigen::Index>(width()));
    for (const auto& t : q.tables) x(static_cast<Eigen::Index>(schema_.table_index(t))) = 1.0;
    const auto join_base = schema_.tables.size();
    for (const auto& e : q.joins) x(static_cast<Eigen::Index>(join_base + schema_.join_index(e))) = 1.0;
    const auto col_base = join_base + schema_.joins.size();
    for (std::size_t k = 0; k < columns_.size(); ++k) {
      const auto& [t, c] = columns_[k];
      const auto& tab = schema_.tables[t];
      const auto& col = tab.columns[c];
      double w = 1.0;
      for (const auto& r : q.ranges)
        if (r.table == tab.name && r.column == col.name) w = std::min(w, overlap_fraction(col.min, col.max, r.lo, r.hi));
      x(static_cast<Eigen::Index>(col_base + k)) = w;
    }
    return x;
  }

 private:
  SchemaInfo schema_;
  std::vector<std::pair<std::size_t, std::size_t>> columns_;
};

inline void require_training_queries(const Workload& w, const std::string& id) {
  require(!w.train.empty(), id + ": query-driven estimator needs training queries");
  for (const auto& q : w.train) require(q.true_card.has_value(), id + ": training query without true cardinality");
}

inline double log_card(const Query& q) { return std::log(static_cast<double>(std::max<std::int64_t>(*q.true_card, 1))); }

// Ridge regression on the query encoding (plus intercept).
class QdLinear final : public Estimator {
 public:
  static std::unique_ptr<QdLinear> train(const EstimatorSpec& spec, const Dataset& d, const Workload& w) {
    require_training_queries(w, spec.id);
    QueryEncoding enc(SchemaInfo::of(d));
    const auto n = static_cast<Eigen::Index>(w.train.size());
    const auto f = static_cast<Eigen::Index>(enc.width()) + 1;
    Matrix x(n, f);
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x.row(i) << enc.encode(w.train[static_cast<std::size_t>(i)]), 1.0;
      y(i) = log_card(w.train[static_cast<std::size_t>(i)]);
    }
    const double lambda = spec.param("ridge", 1e-2);
    Matrix gram = x.transpose() * x;
    gram.diagonal().array() += lambda;
    Vector weights = gram.ldlt().solve(x.transpose() * y);
    return std::unique_ptr<QdLinear>(new QdLinear(std::move(enc), std::move(weights)));
  }

  static std::unique_ptr<QdLinear> load(const json& j) {
    return std::unique_ptr<QdLinear>(new QdLinear(QueryEncoding(SchemaInfo::from_json(j.at("schema"))),
                                                  matrix_from_json(j.at("weights"))));
  }

  Estimate estimate(const Query& q) const override {
    const RowVector x = enc_.encode(q);
    const double z = x.dot(weights_.head(x.size()).transpose()) + weights_(weights_.size() - 1);
    return {std::exp(std::min(z, 40.0)), static_cast<double>(weights_.size())};
  }

  json state() const override { return {{"schema", enc_.schema().to_json()}, {"weights", matrix_to_json(weights_)}}; }

 private:
  QdLinear(QueryEncoding enc, Vector weights) : enc_(std::move(enc)), weights_(std::move(weights)) {}

  QueryEncoding enc_;
  Vector weights_;
};

// Two-hidden-layer perceptron on the query encoding, regressing the
// standardized log-cardinality with mini-batch SGD.
class QdMlp final : public Estimator {
 public:
  static std::unique_ptr<QdMlp> train(const EstimatorSpec& spec, const Dataset& d, const Workload& w) {
    require_training_queries(w, spec.id);
    QueryEncoding enc(SchemaInfo::of(d));
    const auto hidden = static_cast<std::size_t>(spec.param("hidden", 32));
    const auto epochs = static_cast<int>(spec.param("epochs", 100));
    const double lr = spec.param("lr", 0.02);
    const auto batch = static_cast<std::size_t>(spec.param("batch", 16));
    Rng rng(static_cast<std::uint64_t>(spec.param("seed", 0)));

    const std::size_t n = w.train.size();
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(enc.width()));
    Vector y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      x.row(static_cast<Eigen::Index>(i)) = enc.encode(w.train[i]);
      y(static_cast<Eigen::Index>(i)) = log_card(w.train[i]);
    }
    const double mean = y.mean();
    const double sd = std::max(1e-6, std::sqrt((y.array() - mean).square().mean()));
    y = (y.array() - mean) / sd;

    Mlp net({enc.width(), hidden, hidden, 1});
    net.init(rng);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Mlp::Trace trace;
    for (int epoch = 0; epoch < epochs; ++epoch) {
      rng.shuffle(order.begin(), order.end());
      for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t end = std::min(n, start + batch);
        Matrix xb(static_cast<Eigen::Index>(end - start), x.cols());
        Vector yb(static_cast<Eigen::Index>(end - start));
        for (std::size_t i = start; i < end; ++i) {
          xb.row(static_cast<Eigen::Index>(i - start)) = x.row(static_cast<Eigen::Index>(order[i]));
          yb(static_cast<Eigen::Index>(i - start)) = y(static_cast<Eigen::Index>(order[i]));
        }
        const Matrix pred = net.forward(xb, trace);
        const Matrix dy = 2.0 * (pred - yb) / static_cast<double>(end - start);
        Mlp grad = net.zeros_like();
        net.backward(trace, dy, grad);
        sgd_step(net, grad, lr);
      }
    }
    return std::unique_ptr<QdMlp>(new QdMlp(std::move(enc), std::move(net), mean, sd));
  }

  static std::unique_ptr<QdMlp> load(const json& j) {
    return std::unique_ptr<QdMlp>(new QdMlp(QueryEncoding(SchemaInfo::from_json(j.at("schema"))),
                                            mlp_from_json(j.at("net")), j.at("mean"), j.at("sd")));
  }

  Estimate estimate(const Query& q) const override {
    const Matrix x = enc_.encode(q);
    const double z = net_.forward(x)(0, 0) * sd_ + mean_;
    double mult_adds = 0.0;
    for (const auto& l : net_.layers) mult_adds += static_cast<double>(l.weight.size());
    return {std::exp(std::min(z, 40.0)), mult_adds};
  }

  json state() const override {
    return {{"schema", enc_.schema().to_json()}, {"net", to_json(net_)}, {"mean", mean_}, {"sd", sd_}};
  }

 private:
  QdMlp(QueryEncoding enc, Mlp net, double mean, double sd)
      : enc_(std::move(enc)), net_(std::move(net)), mean_(mean), sd_(sd) {}

  QueryEncoding enc_;
  Mlp net_;
  double mean_;
  double sd_;
};

// ---------------------------------------------------------------------------
// Registry

struct EstimatorKind {
  Family family;
  std::string suffix_param;  // hyperparameter set by an "@<value>" id suffix
  std::function<std::unique_ptr<Estimator>(const EstimatorSpec&, const Dataset&, const Workload&)> train;
  std::function<std::unique_ptr<Estimator>(const json&)> load;
};

inline const std::map<std::string, EstimatorKind>& estimator_registry() {
  static const std::map<std::string, EstimatorKind> registry = {
      {"hist-avi", {Family::data_driven, "buckets",
                    [](const EstimatorSpec& s, const Dataset& d, const Workload&) { return HistAvi::train(s, d); },
                    [](const json& j) { return HistAvi::load(j); }}},
      {"sample-eval", {Family::data_driven, "rate",
                       [](const EstimatorSpec& s, const Dataset& d, const Workload&) { return SampleEval::train(s, d); },
                       [](const json& j) { return SampleEval::load(j); }}},
      {"chain-bayes", {Family::data_driven, "bins",
                       [](const EstimatorSpec& s, const Dataset& d, const Workload&) { return ChainBayes::train(s, d); },
                       [](const json& j) { return ChainBayes::load(j); }}},
      {"qd-linear", {Family::query_driven, "ridge",
                     [](const EstimatorSpec& s, const Dataset& d, const Workload& w) { return QdLinear::train(s, d, w); },
                     [](const json& j) { return QdLinear::load(j); }}},
      {"qd-mlp", {Family::query_driven, "hidden",
                  [](const EstimatorSpec& s, const Dataset& d, const Workload& w) { return QdMlp::train(s, d, w); },
                  [](const json& j) { return QdMlp::load(j); }}},
  };
  return registry;
}

inline const EstimatorKind& lookup_kind(const std::string& kind) {
  const auto& reg = estimator_registry();
  const auto it = reg.find(kind);
  if (it == reg.end()) throw Error("unknown estimator '" + kind + "'");
  return it->second;
}

// Builds a spec from an id, filling the family and any "@value" suffix.
inline EstimatorSpec make_spec(const std::string& id, std::map<std::string, double> hyperparams = {}) {
  EstimatorSpec s;
  s.id = id;
  const auto& kind = lookup_kind(s.kind());
  s.family = kind.family;
  s.hyperparams = std::move(hyperparams);
  if (const auto at = id.find('@'); at != std::string::npos) {
    const auto end = id.find('#', at);
    const auto text = id.substr(at + 1, end == std::string::npos ? std::string::npos : end - at - 1);
    try {
      s.hyperparams.emplace(kind.suffix_param, std::stod(text));
    } catch (const std::exception&) {
      throw Error("estimator '" + id + "': bad parameter suffix");
    }
  }
  return s;
}

inline std::vector<EstimatorSpec> reference_pool() {
  return {make_spec("hist-avi"), make_spec("sample-eval"), make_spec("chain-bayes"), make_spec("qd-linear"),
          make_spec("qd-mlp")};
}

inline std::vector<std::string> ids_of(const std::vector<EstimatorSpec>& pool) {
  std::vector<std::string> ids;
  for (const auto& s : pool) ids.push_back(s.id);
  return ids;
}

struct TrainedEstimator {
  EstimatorSpec spec;
  std::shared_ptr<const Estimator> model;
  double train_time = 0.0;  // seconds

  // Estimate floored at 1.0; latency in the requested unit.
  Estimate estimate(const Query& q, LatencyUnit unit = LatencyUnit::cost) const {
    require(model != nullptr, "estimate on an untrained estimator");
    const auto start = std::chrono::steady_clock::now();
    Estimate e = model->estimate(q);
    const auto stop = std::chrono::steady_clock::now();
    if (!std::isfinite(e.card)) e.card = 1.0;
    e.card = std::max(1.0, e.card);
    if (unit == LatencyUnit::ms) e.latency = std::chrono::duration<double, std::milli>(stop - start).count();
    return e;
  }

  json serialize() const {
    return {{"id", spec.id}, {"family", to_string(spec.family)}, {"hyperparams", spec.hyperparams},
            {"train_time", train_time}, {"state", model->state()}};
  }

  static TrainedEstimator deserialize(const json& j) {
    TrainedEstimator t;
    t.spec = make_spec(j.at("id").get<std::string>(), j.at("hyperparams").get<std::map<std::string, double>>());
    t.model = lookup_kind(t.spec.kind()).load(j.at("state"));
    t.train_time = j.at("train_time");
    return t;
  }
};

inline TrainedEstimator train_estimator(const EstimatorSpec& spec, const Dataset& d, const Workload& w) {
  const auto& kind = lookup_kind(spec.kind());
  const auto start = std::chrono::steady_clock::now();
  TrainedEstimator t;
  t.spec = spec;
  t.spec.family = kind.family;
  t.model = kind.train(spec, d, w);
  t.train_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return t;
}

struct LabelOutcome {
  std::vector<LabelRecord> records;     // one per successfully trained estimator, pool order
  std::vector<std::string> violations;  // one per estimator that failed
};

inline LabelOutcome label_dataset(const Dataset& d, const std::vector<EstimatorSpec>& pool, const Workload& w,
                                  LatencyUnit unit = LatencyUnit::cost) {
  require(!w.test.empty(), "label_dataset: workload has no test queries");
  for (const auto& q : w.test) require(q.true_card.has_value(), "label_dataset: test query without true cardinality");
  LabelOutcome out;
  for (const auto& spec : pool) {
    try {
      const auto model = train_estimator(spec, d, w);
      double qsum = 0.0, tsum = 0.0;
      for (const auto& q : w.test) {
        const auto e = model.estimate(q, unit);
        qsum += qerror(e.card, *q.true_card);
        tsum += e.latency;
      }
      const double n = static_cast<double>(w.test.size());
      out.records.push_back(LabelRecord{d.id, spec.id, qsum / n, tsum / n, unit});
    } catch (const Error& e) {
      out.violations.push_back(d.id + "/" + spec.id + ": " + e.what());
    }
  }
  return out;
}

// Orders `records` to match `estimator_ids`; throws on a missing estimator.
inline std::vector<LabelRecord> align_records(const std::vector<LabelRecord>& records,
                                              const std::vector<std::string>& estimator_ids) {
  std::vector<LabelRecord> out;
  for (const auto& id : estimator_ids) {
    const auto it = std::find_if(records.begin(), records.end(), [&](const LabelRecord& r) { return r.estimator_id == id; });
    if (it == records.end())
      throw Error("missing label for estimator '" + id + "'" + (records.empty() ? "" : " on dataset '" + records.front().dataset_id + "'"));
    out.push_back(*it);
  }
  return out;
}

// Min-max normalized accuracy and efficiency scores blended by w_a, w_e = 1 - w_a.
// A dimension where every model ties scores 1.0 for all.
inline ScoreVector score_vector(const std::vector<LabelRecord>& records, double w_a) {
  require(records.size() >= 2, "score_vector: need at least 2 estimators");
  require(w_a >= 0.0 && w_a <= 1.0, "score_vector: w_a must be in [0,1]");
  const auto [qmin, qmax] = std::minmax_element(records.begin(), records.end(),
                                                [](const auto& a, const auto& b) { return a.qerr_mean < b.qerr_mean; });
  const auto [tmin, tmax] = std::minmax_element(records.begin(), records.end(),
                                                [](const auto& a, const auto& b) { return a.latency_mean < b.latency_mean; });
  const double w_e = 1.0 - w_a;
  ScoreVector s;
  for (const auto& r : records) {
    const double qspan = qmax->qerr_mean - qmin->qerr_mean;
    const double tspan = tmax->latency_mean - tmin->latency_mean;
    const double sa = qspan > 0.0 ? (qmax->qerr_mean - r.qerr_mean) / qspan : 1.0;
    const double se = tspan > 0.0 ? (tmax->latency_mean - r.latency_mean) / tspan : 1.0;
    s.push_back(w_a * sa + w_e * se);
  }
  return s;
}

// First index of the maximum (lowest index wins ties).
inline std::size_t argmax(const std::vector<double>& v) {
  require(!v.empty(), "argmax of empty vector");
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline constexpr double kDErrorEpsilon = 1e-6;

inline double d_error(const ScoreVector& scores, std::size_t chosen) {
  require(chosen < scores.size(), "d_error: chosen index out of range");
  const double best = *std::max_element(scores.begin(), scores.end());
  return (best - scores[chosen]) / std::max(scores[chosen], kDErrorEpsilon);
}

}  // namespace autoce
