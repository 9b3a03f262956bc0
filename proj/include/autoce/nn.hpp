#pragma once

// Dense layers and small perceptrons with hand-written reverse mode. Row
// convention: a batch is a matrix with one sample per row, y = x W + b.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "autoce/corpus.hpp"
#include "autoce/error.hpp"
#include "autoce/rng.hpp"

namespace autoce {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline Eigen::Map<Vector> flat(Matrix& m) { return {m.data(), m.size()}; }

struct Dense {
  Matrix weight;  // [in, out]
  RowVector bias;  // [out]

  Dense() = default;
  Dense(std::size_t in, std::size_t out)
      : weight(Matrix::Zero(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out))),
        bias(RowVector::Zero(static_cast<Eigen::Index>(out))) {}

  Eigen::Index in() const { return weight.rows(); }
  Eigen::Index out() const { return weight.cols(); }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero bias.
  void init(Rng& rng) {
    const double a = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(in(), 1)));
    for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = rng.uniform(-a, a);
    bias.setZero();
  }

  Matrix forward(const Matrix& x) const {
    require(x.cols() == in(), "Dense: input width " + std::to_string(x.cols()) + " != " + std::to_string(in()));
    Matrix y = x * weight;
    y.rowwise() += bias;
    return y;
  }

  // Accumulates parameter gradients into `grad`; returns dL/dx.
  Matrix backward(const Matrix& x, const Matrix& dy, Dense& grad) const {
    grad.weight.noalias() += x.transpose() * dy;
    grad.bias += dy.colwise().sum();
    return dy * weight.transpose();
  }

  Dense zeros_like() const { return Dense(static_cast<std::size_t>(in()), static_cast<std::size_t>(out())); }
};

inline Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

// Affine layers with ReLU between consecutive layers and none after the last.
struct Mlp {
  std::vector<Dense> layers;

  Mlp() = default;
  explicit Mlp(const std::vector<std::size_t>& widths) {
    require(widths.size() >= 2, "Mlp: need at least input and output widths");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) layers.emplace_back(widths[i], widths[i + 1]);
  }

  void init(Rng& rng) {
    for (auto& l : layers) l.init(rng);
  }

  Eigen::Index in() const { return layers.front().in(); }
  Eigen::Index out() const { return layers.back().out(); }

  struct Trace {
    std::vector<Matrix> inputs;  // input of each layer (post-activation of the previous)
    std::vector<Matrix> pre;     // pre-activation output of each layer
  };

  Matrix forward(const Matrix& x) const {
    Matrix h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      h = layers[i].forward(h);
      if (i + 1 < layers.size()) h = relu(h);
    }
    return h;
  }

  Matrix forward(const Matrix& x, Trace& trace) const {
    trace.inputs.clear();
    trace.pre.clear();
    Matrix h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      trace.inputs.push_back(h);
      trace.pre.push_back(layers[i].forward(h));
      h = i + 1 < layers.size() ? relu(trace.pre.back()) : trace.pre.back();
    }
    return h;
  }

  Matrix backward(const Trace& trace, const Matrix& dy, Mlp& grad) const {
    require(trace.inputs.size() == layers.size(), "Mlp: backward without forward");
    Matrix d = dy;
    for (std::size_t i = layers.size(); i-- > 0;) {
      if (i + 1 < layers.size()) d = d.cwiseProduct((trace.pre[i].array() > 0.0).cast<double>().matrix());
      d = layers[i].backward(trace.inputs[i], d, grad.layers[i]);
    }
    return d;
  }

  Mlp zeros_like() const {
    Mlp g;
    for (const auto& l : layers) g.layers.push_back(l.zeros_like());
    return g;
  }
};

// ---------------------------------------------------------------------------
// Parameter traversal. Every parameter container exposes its tensors in a
// fixed order so that params and gradients can be zipped.

inline void collect_tensors(Dense& d, std::vector<std::span<double>>& out) {
  out.emplace_back(d.weight.data(), static_cast<std::size_t>(d.weight.size()));
  out.emplace_back(d.bias.data(), static_cast<std::size_t>(d.bias.size()));
}

inline void collect_tensors(Mlp& m, std::vector<std::span<double>>& out) {
  for (auto& l : m.layers) collect_tensors(l, out);
}

template <class Params>
std::vector<std::span<double>> tensors(Params& p) {
  std::vector<std::span<double>> out;
  collect_tensors(p, out);
  return out;
}

// p <- p - lr * g for matching containers.
template <class Params>
void sgd_step(Params& params, Params& grads, double lr) {
  auto p = tensors(params);
  auto g = tensors(grads);
  require(p.size() == g.size(), "sgd_step: parameter/gradient shape mismatch");
  for (std::size_t t = 0; t < p.size(); ++t)
    for (std::size_t i = 0; i < p[t].size(); ++i) p[t][i] -= lr * g[t][i];
}

// Rescales g so its global L2 norm is at most max_norm (0 leaves g alone).
template <class Params>
void clip_gradients(Params& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (auto t : tensors(grads))
    for (double v : t) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  for (auto t : tensors(grads))
    for (double& v : t) v *= max_norm / norm;
}

template <class Params>
std::size_t parameter_count(Params& p) {
  std::size_t n = 0;
  for (auto s : tensors(p)) n += s.size();
  return n;
}

// ---------------------------------------------------------------------------
// JSON encoding of matrices: shape plus flat row-major data.

inline json matrix_to_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  require(static_cast<Eigen::Index>(data.size()) == rows * cols, "matrix payload size mismatch");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  return m;
}

inline json to_json(const Dense& d) { return {{"weight", matrix_to_json(d.weight)}, {"bias", matrix_to_json(d.bias)}}; }

inline Dense dense_from_json(const json& j) {
  Dense d;
  d.weight = matrix_from_json(j.at("weight"));
  d.bias = matrix_from_json(j.at("bias"));
  require(d.bias.size() == d.weight.cols(), "dense layer bias/weight mismatch");
  return d;
}

inline json to_json(const Mlp& m) {
  json layers = json::array();
  for (const auto& l : m.layers) layers.push_back(to_json(l));
  return layers;
}

inline Mlp mlp_from_json(const json& j) {
  Mlp m;
  for (const auto& l : j) m.layers.push_back(dense_from_json(l));
  require(!m.layers.empty(), "empty perceptron");
  return m;
}

}  // namespace autoce
