#pragma once

// Incremental learning: cross-validated feedback collection, Mixup
// augmentation of poorly predicted samples, and encoder fine-tuning.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "autoce/dml.hpp"
#include "autoce/encoder.hpp"
#include "autoce/error.hpp"
#include "autoce/estimators.hpp"
#include "autoce/rng.hpp"

namespace autoce {

struct IncrementalConfig {
  std::size_t folds = 5;
  double derr_threshold = 0.1;
  double alpha = 1.0;
  double beta = 1.0;
  int extra_epochs = 20;
  std::size_t k = 2;
  std::uint64_t seed = 0;

  void check() const {
    require(folds >= 2, "IncrementalConfig: folds must be >= 2");
    require(derr_threshold > 0.0, "IncrementalConfig: derr_threshold must be positive");
    require(alpha > 0.0 && beta > 0.0, "IncrementalConfig: Beta parameters must be positive");
    require(extra_epochs >= 1, "IncrementalConfig: extra_epochs must be >= 1");
    require(k >= 1, "IncrementalConfig: k must be >= 1");
  }
};

struct Feedback {
  std::vector<std::size_t> feedback;   // D-error > threshold
  std::vector<std::size_t> reference;  // the rest
  std::vector<std::size_t> fold;       // fold of each corpus index
  std::vector<double> d_errors;        // validation D-error per corpus index

  double mean_d_error() const {
    return d_errors.empty() ? 0.0 : std::accumulate(d_errors.begin(), d_errors.end(), 0.0) / static_cast<double>(d_errors.size());
  }
};

// Seeded shuffle, then round-robin fold assignment.
inline std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  std::vector<std::size_t> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[order[i]] = i % folds;
  return fold;
}

// KNN over a candidate subset: average the neighbors' labels, return argmax.
inline std::size_t knn_choice(const Embedding& query, const std::vector<Embedding>& embeddings,
                              const std::vector<ScoreVector>& labels, const std::vector<std::size_t>& candidates,
                              std::size_t k) {
  require(!candidates.empty(), "knn: no candidates");
  std::vector<std::pair<double, std::size_t>> dist;
  for (auto c : candidates) dist.emplace_back(embed_distance(embeddings[c], query), c);
  std::stable_sort(dist.begin(), dist.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const std::size_t kk = std::min(k, dist.size());
  ScoreVector avg(labels[candidates.front()].size(), 0.0);
  for (std::size_t i = 0; i < kk; ++i)
    for (std::size_t j = 0; j < avg.size(); ++j) avg[j] += labels[dist[i].second][j] / static_cast<double>(kk);
  return argmax(avg);
}

inline Feedback collect_feedback(const std::vector<LabeledGraph>& corpus, const GinEncoder& encoder,
                                 const IncrementalConfig& cfg) {
  cfg.check();
  require(corpus.size() >= cfg.folds, "collect_feedback: corpus of " + std::to_string(corpus.size()) +
                                          " is smaller than the fold count " + std::to_string(cfg.folds));
  std::vector<Embedding> emb;
  std::vector<ScoreVector> labels;
  for (const auto& s : corpus) {
    emb.push_back(encoder.encode(s.graph));
    labels.push_back(s.label);
  }
  Feedback fb;
  fb.fold = assign_folds(corpus.size(), cfg.folds, cfg.seed);
  fb.d_errors.assign(corpus.size(), 0.0);
  for (std::size_t v = 0; v < cfg.folds; ++v) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < corpus.size(); ++i)
      if (fb.fold[i] != v) candidates.push_back(i);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (fb.fold[i] != v) continue;
      const auto chosen = knn_choice(emb[i], emb, labels, candidates, cfg.k);
      fb.d_errors[i] = d_error(labels[i], chosen);
    }
  }
  for (std::size_t i = 0; i < corpus.size(); ++i)
    (fb.d_errors[i] > cfg.derr_threshold ? fb.feedback : fb.reference).push_back(i);
  return fb;
}

// Zero-pads V rows and E rows/cols up to n vertices.
inline FeatureGraph pad_graph(const FeatureGraph& g, Eigen::Index n) {
  require(n >= g.tables(), "pad_graph: cannot shrink");
  FeatureGraph out{Matrix::Zero(n, g.V.cols()), Matrix::Zero(n, n)};
  out.V.topRows(g.V.rows()) = g.V;
  out.E.topLeftCorner(g.E.rows(), g.E.cols()) = g.E;
  return out;
}

// Convex combination lambda * a + (1 - lambda) * b of graphs and labels.
inline LabeledGraph mixup(const LabeledGraph& a, const LabeledGraph& b, double lambda) {
  require(lambda >= 0.0 && lambda <= 1.0, "mixup: lambda must be in [0,1]");
  require(a.graph.V.cols() == b.graph.V.cols(), "mixup: vertex widths differ");
  require(a.label.size() == b.label.size(), "mixup: label lengths differ");
  const auto n = std::max(a.graph.tables(), b.graph.tables());
  const FeatureGraph ga = pad_graph(a.graph, n), gb = pad_graph(b.graph, n);
  LabeledGraph out;
  out.id = a.id + "+" + b.id;
  out.graph.V = lambda * ga.V + (1.0 - lambda) * gb.V;
  out.graph.E = lambda * ga.E + (1.0 - lambda) * gb.E;
  for (std::size_t j = 0; j < a.label.size(); ++j) out.label.push_back(lambda * a.label[j] + (1.0 - lambda) * b.label[j]);
  return out;
}

struct IncrementalResult {
  GinEncoder encoder;
  Feedback feedback;
  std::vector<LabeledGraph> synthetic;
  std::vector<double> loss_trace;
};

// One Mixup sample per feedback member with its nearest reference member
// (embedding space), then extra_epochs of metric learning on the original
// corpus plus the synthetic samples. The corpus itself is never modified.
inline IncrementalResult incremental_train(const std::vector<LabeledGraph>& corpus, GinEncoder encoder,
                                           const IncrementalConfig& cfg, DmlConfig dml) {
  IncrementalResult result;
  result.feedback = collect_feedback(corpus, encoder, cfg);
  if (result.feedback.feedback.empty()) {
    result.encoder = std::move(encoder);
    return result;
  }
  require(!result.feedback.reference.empty(),
          "incremental_train: every sample was poorly predicted; use a larger corpus or a looser D-error threshold");

  std::vector<Embedding> emb;
  for (const auto& s : corpus) emb.push_back(encoder.encode(s.graph));
  Rng rng(derive_seed(cfg.seed, 0x9e3779b97f4a7c15ULL));
  for (auto i : result.feedback.feedback) {
    std::size_t best = result.feedback.reference.front();
    double best_d = embed_distance(emb[i], emb[best]);
    for (auto j : result.feedback.reference) {
      const double dist = embed_distance(emb[i], emb[j]);
      if (dist < best_d) {
        best_d = dist;
        best = j;
      }
    }
    result.synthetic.push_back(mixup(corpus[i], corpus[best], rng.beta(cfg.alpha, cfg.beta)));
  }

  std::vector<LabeledGraph> train = corpus;
  train.insert(train.end(), result.synthetic.begin(), result.synthetic.end());
  dml.epochs = cfg.extra_epochs;
  TrainResult tuned = train_encoder(train, dml, std::move(encoder));
  result.encoder = std::move(tuned.encoder);
  result.loss_trace = std::move(tuned.loss_trace);
  return result;
}

}  // namespace autoce
