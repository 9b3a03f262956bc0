#pragma once

// Comparison selection strategies and the evaluation harness.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "autoce/advisor.hpp"
#include "autoce/dml.hpp"
#include "autoce/encoder.hpp"
#include "autoce/error.hpp"
#include "autoce/estimators.hpp"
#include "autoce/featurizer.hpp"
#include "autoce/rng.hpp"
#include "autoce/workload.hpp"

namespace autoce {

// ---------------------------------------------------------------------------
// MLP-based: GIN + perceptron head trained as a classifier of argmax labels.

class MlpSelector {
 public:
  MlpSelector(GinEncoder encoder, std::size_t n_classes, std::vector<std::size_t> hidden = {64, 32},
              std::uint64_t seed = 0)
      : encoder_(std::move(encoder)) {
    require(n_classes >= 1, "MlpSelector: need at least one class");
    std::vector<std::size_t> widths{encoder_.config().embed_dim};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(n_classes);
    head_ = Mlp(widths);
    Rng rng(derive_seed(seed, 0x4d4c50ULL));
    head_.init(rng);
  }

  std::size_t classes() const { return static_cast<std::size_t>(head_.out()); }

  RowVector logits(const FeatureGraph& g) const { return head_.forward(encoder_.encode(g).transpose()); }

  std::size_t predict(const FeatureGraph& g) const {
    const RowVector z = logits(g);
    return static_cast<std::size_t>(std::max_element(z.data(), z.data() + z.size()) - z.data());
  }

  // Mean softmax cross-entropy per epoch; same batching/SGD as the metric learner.
  std::vector<double> train(const std::vector<LabeledGraph>& samples, const DmlConfig& cfg) {
    cfg.check();
    require(!samples.empty(), "mlp_select: empty corpus");
    std::vector<std::size_t> target;
    for (const auto& s : samples) {
      require(s.label.size() == classes(), "mlp_select: label length does not match class count");
      target.push_back(argmax(s.label));
    }
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> trace;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      rng.shuffle(order.begin(), order.end());
      double total = 0.0;
      int batches = 0;
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        const double m = static_cast<double>(end - start);
        EncoderParams genc = encoder_.zero_grads();
        Mlp ghead = head_.zeros_like();
        double loss = 0.0;
        for (std::size_t b = start; b < end; ++b) {
          const auto i = order[b];
          EncodeTrace et;
          const RowVector x = encoder_.forward(samples[i].graph, et).transpose();
          Mlp::Trace ht;
          const RowVector z = head_.forward(x, ht);
          const double top = z.maxCoeff();
          RowVector p = (z.array() - top).exp().matrix();
          const double sum = p.sum();
          p /= sum;
          loss -= std::log(std::max(p(static_cast<Eigen::Index>(target[i])), 1e-300)) / m;
          RowVector dz = p / m;
          dz(static_cast<Eigen::Index>(target[i])) -= 1.0 / m;
          const Matrix dx = head_.backward(ht, dz, ghead);
          encoder_.backward(et, dx.transpose(), genc);
        }
        clip_gradients(genc, cfg.grad_clip);
        clip_gradients(ghead, cfg.grad_clip);
        sgd_step(encoder_.params(), genc, cfg.lr);
        sgd_step(head_, ghead, cfg.lr);
        total += loss;
        ++batches;
      }
      trace.push_back(total / batches);
    }
    return trace;
  }

 private:
  GinEncoder encoder_;
  Mlp head_;
};

// ---------------------------------------------------------------------------
// Rule-based: random data-driven model for one table, query-driven otherwise.

inline std::size_t rule_select(const Dataset& d, const std::vector<EstimatorSpec>& pool, Rng& rng) {
  const Family want = d.tables.size() <= 1 ? Family::data_driven : Family::query_driven;
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool[i].family == want) members.push_back(i);
  if (members.empty()) throw Error("rule_select: pool has no " + to_string(want) + " estimator");
  return members[rng.index(members.size())];
}

// ---------------------------------------------------------------------------
// Raw-feature KNN: the advisor's KNN with the flattened feature graph as embedding.

inline auto raw_embedder(std::size_t n_max_tables) {
  return [n_max_tables](const FeatureGraph& g) -> Embedding { return flatten(g, n_max_tables); };
}

inline Rcs build_raw_rcs(std::vector<CorpusItem> corpus, double w_a, std::vector<std::string> estimator_ids,
                         FeatureConfig features) {
  const auto n = features.n_max_tables;
  return build_rcs(std::move(corpus), raw_embedder(n), w_a, std::move(estimator_ids), std::move(features));
}

inline Recommendation rawknn_select(const Rcs& raw_rcs, const Dataset& d, std::size_t k, double w_a) {
  return recommend_with(d, raw_rcs, raw_embedder(raw_rcs.features.n_max_tables), k, w_a);
}

// ---------------------------------------------------------------------------
// Sampling-based: label a Bernoulli row sample with the full pool.

// Keeps each row with probability `rate`, then drops FK rows whose key was not
// kept until no dangling reference remains.
inline Dataset sample_dataset(const Dataset& d, double rate, Rng& rng) {
  require(rate > 0.0 && rate <= 1.0, "sampling_select: sample_rate must be in (0,1]");
  std::vector<std::vector<char>> keep(d.tables.size());
  for (std::size_t t = 0; t < d.tables.size(); ++t) {
    keep[t].resize(d.tables[t].rows());
    for (auto& k : keep[t]) k = rate >= 1.0 || rng.bernoulli(rate);
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& e : d.joins) {
      const auto pt = d.table_index(e.pk_table), ft = d.table_index(e.fk_table);
      const auto& pk = d.tables[pt].find(e.pk_column)->values;
      const auto& fk = d.tables[ft].find(e.fk_column)->values;
      std::set<std::int64_t> live;
      for (std::size_t r = 0; r < pk.size(); ++r)
        if (keep[pt][r]) live.insert(pk[r]);
      for (std::size_t r = 0; r < fk.size(); ++r)
        if (keep[ft][r] && !live.count(fk[r])) {
          keep[ft][r] = 0;
          changed = true;
        }
    }
  }
  Dataset out{d.id, {}, d.joins};
  for (std::size_t t = 0; t < d.tables.size(); ++t) {
    Table nt{d.tables[t].name, {}, d.tables[t].pk};
    for (const auto& c : d.tables[t].columns) {
      Column nc{c.name, {}, c.dictionary};
      for (std::size_t r = 0; r < c.values.size(); ++r)
        if (keep[t][r]) nc.values.push_back(c.values[r]);
      nt.columns.push_back(std::move(nc));
    }
    if (nt.rows() == 0) throw Error("sampling_select: empty sample of table '" + nt.name + "'");
    out.tables.push_back(std::move(nt));
  }
  return out;
}

struct SamplingOptions {
  double rate = 0.1;
  WorkloadParams workload;
  LatencyUnit unit = LatencyUnit::cost;
};

inline std::size_t sampling_select(const Dataset& d, const std::vector<EstimatorSpec>& pool,
                                   const SamplingOptions& opt, double w_a, Rng& rng) {
  const Dataset s = sample_dataset(d, opt.rate, rng);
  const Workload w = gen_workload(s, opt.workload, rng);
  const LabelOutcome labels = label_dataset(s, pool, w, opt.unit);
  if (!labels.violations.empty()) throw Error("sampling_select: " + labels.violations.front());
  return argmax(score_vector(align_records(labels.records, ids_of(pool)), w_a));
}

// ---------------------------------------------------------------------------
// Evaluation

inline const std::vector<double> kAccuracyThresholds = {0.1, 0.15, 0.2};

struct StrategyResult {
  std::string strategy;
  double w_a = 1.0;
  std::vector<std::string> dataset_ids;
  std::vector<std::size_t> chosen;
  std::vector<double> d_errors;

  double mean() const {
    return d_errors.empty() ? 0.0 : std::accumulate(d_errors.begin(), d_errors.end(), 0.0) / static_cast<double>(d_errors.size());
  }

  double accuracy(double eps) const {
    if (d_errors.empty()) return 0.0;
    const auto hits = std::count_if(d_errors.begin(), d_errors.end(), [&](double e) { return e <= eps; });
    return static_cast<double>(hits) / static_cast<double>(d_errors.size());
  }

  double percentile(double p) const { return nearest_rank_percentile(d_errors, p); }
};

struct EvalReport {
  std::vector<StrategyResult> results;

  const StrategyResult& find(const std::string& strategy, double w_a) const {
    for (const auto& r : results)
      if (r.strategy == strategy && std::abs(r.w_a - w_a) < 1e-12) return r;
    throw Error("no result for strategy '" + strategy + "'");
  }
};

// Strategy: (test index, w_a) -> chosen pool index.
using Strategy = std::function<std::size_t(std::size_t, double)>;

inline EvalReport evaluate(const std::vector<std::pair<std::string, Strategy>>& strategies,
                           const std::vector<CorpusItem>& test, const std::vector<double>& w_grid) {
  EvalReport report;
  for (double w_a : w_grid)
    for (const auto& [name, strategy] : strategies) {
      StrategyResult r{name, w_a, {}, {}, {}};
      for (std::size_t i = 0; i < test.size(); ++i) {
        const auto chosen = strategy(i, w_a);
        r.dataset_ids.push_back(test[i].id);
        r.chosen.push_back(chosen);
        r.d_errors.push_back(d_error(test[i].scores(w_a), chosen));
      }
      report.results.push_back(std::move(r));
    }
  return report;
}

namespace detail {

inline std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << std::fixed << v;
  return os.str();
}

}  // namespace detail

// One row per (strategy, w_a).
inline std::string report_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "strategy,w_a,n,mean_d_error,median_d_error,p90_d_error,max_d_error";
  for (double eps : kAccuracyThresholds) os << ",acc@" << eps;
  os << "\n";
  for (const auto& s : r.results) {
    os << s.strategy << "," << detail::fmt(s.w_a, 2) << "," << s.d_errors.size() << "," << detail::fmt(s.mean(), 6);
    if (s.d_errors.empty()) {
      os << ",,,";
    } else {
      os << "," << detail::fmt(s.percentile(50), 6) << "," << detail::fmt(s.percentile(90), 6) << ","
         << detail::fmt(*std::max_element(s.d_errors.begin(), s.d_errors.end()), 6);
    }
    for (double eps : kAccuracyThresholds) os << "," << detail::fmt(s.accuracy(eps), 4);
    os << "\n";
  }
  return os.str();
}

// One row per (strategy, w_a, dataset).
inline std::string report_detail_csv(const EvalReport& r, const std::vector<std::string>& estimator_ids) {
  std::ostringstream os;
  os << "strategy,w_a,dataset,chosen,d_error\n";
  for (const auto& s : r.results)
    for (std::size_t i = 0; i < s.d_errors.size(); ++i)
      os << s.strategy << "," << detail::fmt(s.w_a, 2) << "," << s.dataset_ids[i] << "," << estimator_ids[s.chosen[i]]
         << "," << detail::fmt(s.d_errors[i], 6) << "\n";
  return os.str();
}

inline std::string report_table(const EvalReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %5s %5s %12s %9s %9s %9s\n", "strategy", "w_a", "n", "mean_derr", "acc@0.1",
                "acc@0.15", "acc@0.2");
  os << line;
  for (const auto& s : r.results) {
    std::snprintf(line, sizeof line, "%-12s %5.2f %5zu %12.4f %9.3f %9.3f %9.3f\n", s.strategy.c_str(), s.w_a,
                  s.d_errors.size(), s.mean(), s.accuracy(0.1), s.accuracy(0.15), s.accuracy(0.2));
    os << line;
  }
  return os.str();
}

}  // namespace autoce
