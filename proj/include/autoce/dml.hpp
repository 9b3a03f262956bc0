#pragma once

// Deep metric learning of the graph encoder from score-vector labels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "autoce/encoder.hpp"
#include "autoce/error.hpp"
#include "autoce/estimators.hpp"
#include "autoce/rng.hpp"

namespace autoce {

enum class LossKind { weighted, basic };

struct DmlConfig {
  double tau = 0.95;
  double margin = 1.0;
  std::size_t batch_size = 32;
  int epochs = 100;
  double lr = 1e-3;
  double w_a = 1.0;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::weighted;
  double grad_clip = 0.0;  // max global gradient norm per step; 0 disables

  void check() const {
    require(tau >= -1.0 && tau <= 1.0, "DmlConfig: tau must be in [-1,1]");
    require(batch_size >= 2, "DmlConfig: batch_size must be >= 2");
    require(epochs >= 1, "DmlConfig: epochs must be >= 1");
    require(lr > 0.0, "DmlConfig: lr must be positive");
    require(w_a >= 0.0 && w_a <= 1.0, "DmlConfig: w_a must be in [0,1]");
    require(grad_clip >= 0.0, "DmlConfig: grad_clip must be non-negative");
  }
};

// Cosine similarity; a zero vector is dissimilar to everything.
inline double cosine_sim(const ScoreVector& a, const ScoreVector& b) {
  require(a.size() == b.size(), "cosine_sim: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline Matrix similarity_matrix(const std::vector<ScoreVector>& labels) {
  const auto m = static_cast<Eigen::Index>(labels.size());
  Matrix sim(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      sim(i, j) = cosine_sim(labels[static_cast<std::size_t>(i)], labels[static_cast<std::size_t>(j)]);
  return sim;
}

struct Partition {
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
};

// j is positive for anchor i iff Sim_ij >= tau; the anchor itself is in neither set.
inline Partition partition(const Matrix& sim, std::size_t anchor, double tau) {
  require(sim.rows() >= 2 && sim.rows() == sim.cols(), "partition: need a square batch of size >= 2");
  Partition p;
  for (Eigen::Index j = 0; j < sim.cols(); ++j) {
    if (static_cast<std::size_t>(j) == anchor) continue;
    (sim(static_cast<Eigen::Index>(anchor), j) >= tau ? p.positives : p.negatives).push_back(static_cast<std::size_t>(j));
  }
  return p;
}

inline double embed_distance(const Vector& a, const Vector& b) {
  require(a.size() == b.size(), "embed_distance: dimension mismatch");
  return (a - b).norm();
}

// Rows of `x` are embeddings.
inline Matrix distance_matrix(const Matrix& x) {
  const auto m = x.rows();
  Matrix u = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j) u(i, j) = u(j, i) = (x.row(i) - x.row(j)).norm();
  return u;
}

// Loss value and dL/dU where U(i, k) is the distance as seen from anchor i
// (anchor i and anchor k hold separate copies of the same distance).
struct DistanceLoss {
  double loss = 0.0;
  Matrix d_distance;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

namespace detail {

// log sum_k exp(a_k) and its softmax weights.
inline double log_sum_exp(const std::vector<double>& a, std::vector<double>& weights) {
  const double top = *std::max_element(a.begin(), a.end());
  double s = 0.0;
  weights.resize(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) s += (weights[k] = std::exp(a[k] - top));
  for (auto& w : weights) w /= s;
  return top + std::log(s);
}

}  // namespace detail

// L = 1/m sum_i [ log sum_{P_i} e^{U_ik + Sim_ik} + log sum_{N_i} e^{margin - U_ik - Sim_ik} ]
// An empty P_i or N_i contributes nothing.
inline DistanceLoss weighted_loss_on_distances(const Matrix& u, const Matrix& sim, double tau, double margin) {
  const auto m = u.rows();
  DistanceLoss out;
  out.d_distance = Matrix::Zero(m, m);
  const double scale = 1.0 / static_cast<double>(m);
  std::vector<double> args, weights;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Partition p = partition(sim, static_cast<std::size_t>(i), tau);
    out.positives += p.positives.size();
    out.negatives += p.negatives.size();
    if (!p.positives.empty()) {
      args.clear();
      for (auto k : p.positives) args.push_back(u(i, static_cast<Eigen::Index>(k)) + sim(i, static_cast<Eigen::Index>(k)));
      out.loss += scale * detail::log_sum_exp(args, weights);
      for (std::size_t t = 0; t < p.positives.size(); ++t)
        out.d_distance(i, static_cast<Eigen::Index>(p.positives[t])) += scale * weights[t];
    }
    if (!p.negatives.empty()) {
      args.clear();
      for (auto k : p.negatives)
        args.push_back(margin - u(i, static_cast<Eigen::Index>(k)) - sim(i, static_cast<Eigen::Index>(k)));
      out.loss += scale * detail::log_sum_exp(args, weights);
      for (std::size_t t = 0; t < p.negatives.size(); ++t)
        out.d_distance(i, static_cast<Eigen::Index>(p.negatives[t])) -= scale * weights[t];
    }
  }
  return out;
}

// L = 1/m sum_i [ sum_{P_i} U_ik - sum_{N_i} U_ik ]
inline DistanceLoss basic_loss_on_distances(const Matrix& u, const Matrix& sim, double tau) {
  const auto m = u.rows();
  DistanceLoss out;
  out.d_distance = Matrix::Zero(m, m);
  const double scale = 1.0 / static_cast<double>(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Partition p = partition(sim, static_cast<std::size_t>(i), tau);
    out.positives += p.positives.size();
    out.negatives += p.negatives.size();
    for (auto k : p.positives) {
      out.loss += scale * u(i, static_cast<Eigen::Index>(k));
      out.d_distance(i, static_cast<Eigen::Index>(k)) += scale;
    }
    for (auto k : p.negatives) {
      out.loss -= scale * u(i, static_cast<Eigen::Index>(k));
      out.d_distance(i, static_cast<Eigen::Index>(k)) -= scale;
    }
  }
  return out;
}

// Chains dL/dU into dL/dX through U_ik = ||x_i - x_k||. Zero distances
// take the zero subgradient.
inline Matrix distance_grad_to_embeddings(const Matrix& x, const Matrix& u, const Matrix& d_distance) {
  Matrix dx = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index k = 0; k < x.rows(); ++k) {
      const double g = d_distance(i, k);
      if (g == 0.0 || u(i, k) <= 0.0) continue;
      const RowVector dir = (x.row(i) - x.row(k)) / u(i, k);
      dx.row(i) += g * dir;
      dx.row(k) -= g * dir;
    }
  return dx;
}

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // dL/dX, same shape as the embedding batch
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

inline LossResult contrastive_loss(const Matrix& x, const std::vector<ScoreVector>& labels, const DmlConfig& cfg) {
  require(x.rows() >= 2, "contrastive loss: batch must hold at least 2 samples");
  require(static_cast<std::size_t>(x.rows()) == labels.size(), "contrastive loss: label count mismatch");
  const Matrix sim = similarity_matrix(labels);
  const Matrix u = distance_matrix(x);
  const DistanceLoss dl = cfg.loss == LossKind::weighted ? weighted_loss_on_distances(u, sim, cfg.tau, cfg.margin)
                                                         : basic_loss_on_distances(u, sim, cfg.tau);
  return {dl.loss, distance_grad_to_embeddings(x, u, dl.d_distance), dl.positives, dl.negatives};
}

inline LossResult weighted_contrastive_loss(const Matrix& x, const std::vector<ScoreVector>& labels, DmlConfig cfg) {
  cfg.loss = LossKind::weighted;
  return contrastive_loss(x, labels, cfg);
}

inline double basic_contrastive_loss(const Matrix& x, const std::vector<ScoreVector>& labels, DmlConfig cfg) {
  cfg.loss = LossKind::basic;
  return contrastive_loss(x, labels, cfg).loss;
}

// ---------------------------------------------------------------------------
// Trainer

struct LabeledGraph {
  std::string id;
  FeatureGraph graph;
  ScoreVector label;
};

struct TrainResult {
  GinEncoder encoder;
  std::vector<double> loss_trace;  // mean batch loss per epoch
  double positive_fraction = 0.0;  // positives / (positives + negatives) over all batches
};

// Mini-batch SGD over shuffled batches of ceil(n / batch_size); batches
// holding a single sample carry no pairs and are skipped.
inline TrainResult train_encoder(const std::vector<LabeledGraph>& samples, const DmlConfig& cfg, GinEncoder encoder) {
  cfg.check();
  require(samples.size() >= 2,
          "train_encoder: need at least 2 labeled graphs (have " + std::to_string(samples.size()) + ")");
  Rng rng(cfg.seed);
  TrainResult result;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t positives = 0, negatives = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      if (end - start < 2) continue;
      const auto m = static_cast<Eigen::Index>(end - start);
      std::vector<EncodeTrace> traces(end - start);
      std::vector<ScoreVector> labels;
      Matrix x(m, static_cast<Eigen::Index>(encoder.config().embed_dim));
      for (std::size_t b = 0; b < end - start; ++b) {
        const auto& s = samples[order[start + b]];
        x.row(static_cast<Eigen::Index>(b)) = encoder.forward(s.graph, traces[b]).transpose();
        labels.push_back(s.label);
      }
      const LossResult loss = contrastive_loss(x, labels, cfg);
      positives += loss.positives;
      negatives += loss.negatives;
      EncoderParams grads = encoder.zero_grads();
      for (std::size_t b = 0; b < end - start; ++b)
        encoder.backward(traces[b], loss.grad.row(static_cast<Eigen::Index>(b)).transpose(), grads);
      clip_gradients(grads, cfg.grad_clip);
      sgd_step(encoder.params(), grads, cfg.lr);
      epoch_loss += loss.loss;
      ++batches;
    }
    result.loss_trace.push_back(batches ? epoch_loss / batches : 0.0);
  }
  result.positive_fraction =
      positives + negatives ? static_cast<double>(positives) / static_cast<double>(positives + negatives) : 0.0;
  result.encoder = std::move(encoder);
  return result;
}

}  // namespace autoce
