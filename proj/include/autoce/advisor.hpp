#pragma once

// Recommendation candidate set (RCS), KNN recommendation over embeddings,
// and drift detection / online adaptation for out-of-distribution datasets.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "autoce/dml.hpp"
#include "autoce/encoder.hpp"
#include "autoce/error.hpp"
#include "autoce/estimators.hpp"
#include "autoce/featurizer.hpp"
#include "autoce/workload.hpp"

namespace autoce {

// A labeled dataset reduced to what the advisor needs.
struct CorpusItem {
  std::string id;
  FeatureGraph graph;  // normalized
  Vector raw;          // unnormalized flattened graph, padded; drift space
  std::vector<LabelRecord> labels;  // aligned with the RCS estimator order

  ScoreVector scores(double w_a) const { return score_vector(labels, w_a); }
};

inline CorpusItem make_corpus_item(const Dataset& d, const std::vector<LabelRecord>& labels, const FeatureConfig& cfg,
                                   const std::vector<std::string>& estimator_ids) {
  check_bounds(d, cfg);
  const FeatureGraph raw = raw_feature_graph(d, cfg.m_max_cols);
  return CorpusItem{d.id, normalize(raw, cfg), flatten(raw, cfg.n_max_tables), align_records(labels, estimator_ids)};
}

struct RcsEntry {
  CorpusItem item;
  Embedding embedding;
};

struct Rcs {
  double w_a = 1.0;
  std::vector<std::string> estimator_ids;
  FeatureConfig features;
  std::vector<RcsEntry> entries;

  std::size_t size() const { return entries.size(); }
};

struct Recommendation {
  std::string chosen;
  std::size_t chosen_index = 0;
  ScoreVector averaged_scores;
  std::vector<std::string> neighbor_ids;
  std::size_t k = 0;
  double w_a = 1.0;
};

// Embedder: any callable FeatureGraph -> Embedding.
template <class Embedder>
Rcs build_rcs(std::vector<CorpusItem> corpus, Embedder&& embed, double w_a, std::vector<std::string> estimator_ids,
              FeatureConfig features) {
  Rcs rcs{w_a, std::move(estimator_ids), std::move(features), {}};
  for (auto& item : corpus) {
    require(item.labels.size() == rcs.estimator_ids.size(), "build_rcs: dataset '" + item.id + "' is missing labels");
    Embedding e = embed(item.graph);
    rcs.entries.push_back(RcsEntry{std::move(item), std::move(e)});
  }
  return rcs;
}

inline Rcs build_rcs(std::vector<CorpusItem> corpus, const ModelFile& model, std::vector<std::string> estimator_ids) {
  return build_rcs(std::move(corpus), [&](const FeatureGraph& g) { return model.encoder.encode(g); }, model.w_a,
                   std::move(estimator_ids), model.features);
}

template <class Embedder>
void reembed(Rcs& rcs, Embedder&& embed) {
  for (auto& e : rcs.entries) e.embedding = embed(e.item.graph);
}

// Indices of the k nearest entries; equal distances keep RCS order.
inline std::vector<std::size_t> nearest_entries(const Rcs& rcs, const Embedding& query, std::size_t k) {
  require(!rcs.entries.empty(), "recommend: empty RCS");
  require(k >= 1 && k <= rcs.entries.size(),
          "recommend: k=" + std::to_string(k) + " outside [1, " + std::to_string(rcs.entries.size()) + "]");
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < rcs.entries.size(); ++i) dist.emplace_back(embed_distance(rcs.entries[i].embedding, query), i);
  std::stable_sort(dist.begin(), dist.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(dist[i].second);
  return out;
}

inline Recommendation recommend_embedding(const Embedding& query, const Rcs& rcs, std::size_t k, double w_a) {
  const auto neighbors = nearest_entries(rcs, query, k);
  Recommendation r;
  r.k = k;
  r.w_a = w_a;
  r.averaged_scores.assign(rcs.estimator_ids.size(), 0.0);
  for (auto i : neighbors) {
    const auto s = rcs.entries[i].item.scores(w_a);
    for (std::size_t j = 0; j < s.size(); ++j) r.averaged_scores[j] += s[j] / static_cast<double>(k);
    r.neighbor_ids.push_back(rcs.entries[i].item.id);
  }
  r.chosen_index = argmax(r.averaged_scores);
  r.chosen = rcs.estimator_ids[r.chosen_index];
  return r;
}

template <class Embedder>
Recommendation recommend_with(const Dataset& d, const Rcs& rcs, Embedder&& embed, std::size_t k, double w_a) {
  return recommend_embedding(embed(build_feature_graph(d, rcs.features)), rcs, k, w_a);
}

inline Recommendation recommend(const Dataset& d, const Rcs& rcs, const GinEncoder& encoder, std::size_t k, double w_a) {
  return recommend_with(d, rcs, [&](const FeatureGraph& g) { return encoder.encode(g); }, k, w_a);
}

// The trained weight closest to w_a (lower key on ties).
inline double nearest_key(const std::vector<double>& keys, double w_a) {
  require(!keys.empty(), "no trained models");
  double best = keys.front();
  for (double k : keys)
    if (std::abs(k - w_a) < std::abs(best - w_a) - 1e-12 || (std::abs(std::abs(k - w_a) - std::abs(best - w_a)) <= 1e-12 && k < best))
      best = k;
  return best;
}

// ---------------------------------------------------------------------------
// Drift

// Nearest-rank percentile of `values`, p in (0, 100].
inline double nearest_rank_percentile(std::vector<double> values, double p) {
  require(!values.empty(), "percentile of empty set");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

inline std::vector<double> leave_one_out_distances(const Rcs& rcs) {
  std::vector<double> out;
  for (std::size_t i = 0; i < rcs.entries.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < rcs.entries.size(); ++j)
      if (i != j) best = std::min(best, (rcs.entries[i].item.raw - rcs.entries[j].item.raw).norm());
    out.push_back(best);
  }
  return out;
}

inline double drift_threshold(const Rcs& rcs) {
  require(rcs.entries.size() >= 2, "drift_threshold: RCS needs at least 2 members");
  return nearest_rank_percentile(leave_one_out_distances(rcs), 90.0);
}

inline double distance_to_rcs(const Vector& raw, const Rcs& rcs) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : rcs.entries) {
    require(e.item.raw.size() == raw.size(), "drift: feature layout mismatch");
    best = std::min(best, (e.item.raw - raw).norm());
  }
  return best;
}

inline Vector drift_features(const Dataset& d, const FeatureConfig& cfg) {
  check_bounds(d, cfg);
  return flatten(raw_feature_graph(d, cfg.m_max_cols), cfg.n_max_tables);
}

inline bool detect_drift(const Dataset& d, const Rcs& rcs, double threshold) {
  return distance_to_rcs(drift_features(d, rcs.features), rcs) > threshold;
}

// ---------------------------------------------------------------------------
// Online adaptation

struct AdaptOptions {
  WorkloadParams workload;
  DmlConfig dml;  // epochs = fine-tune epochs
  std::uint64_t seed = 0;
  LatencyUnit unit = LatencyUnit::cost;
};

inline std::vector<LabeledGraph> labeled_graphs(const Rcs& rcs) {
  std::vector<LabeledGraph> out;
  for (const auto& e : rcs.entries) out.push_back(LabeledGraph{e.item.id, e.item.graph, e.item.scores(rcs.w_a)});
  return out;
}

// Labels d with the full testbed, appends it to the RCS, fine-tunes the
// encoder on every RCS member and refreshes all embeddings.
inline GinEncoder online_adapt(const Dataset& d, Rcs& rcs, GinEncoder encoder, const std::vector<EstimatorSpec>& pool,
                               const AdaptOptions& opt) {
  require(ids_of(pool) == rcs.estimator_ids, "online_adapt: pool does not match the RCS estimators");
  Rng rng(opt.seed);
  const Workload w = gen_workload(d, opt.workload, rng);
  const LabelOutcome labels = label_dataset(d, pool, w, opt.unit);
  if (!labels.violations.empty()) throw Error("online_adapt: labeling failed: " + labels.violations.front());
  rcs.entries.push_back(RcsEntry{make_corpus_item(d, labels.records, rcs.features, rcs.estimator_ids), {}});
  DmlConfig cfg = opt.dml;
  cfg.w_a = rcs.w_a;
  TrainResult tuned = train_encoder(labeled_graphs(rcs), cfg, std::move(encoder));
  reembed(rcs, [&](const FeatureGraph& g) { return tuned.encoder.encode(g); });
  return std::move(tuned.encoder);
}

}  // namespace autoce
