#pragma once

// Graph isomorphism network encoder for feature graphs.
//
// Layer l:   Z = (1 + eps_l) H + A^T H,   H' = f_l(Z),   f_l = affine -> ReLU -> affine
// Readout:   x = (sum_i H^L_i) W_out + b_out
// A is the symmetrized edge matrix max(E, E^T); A(j, i) weighs the message j -> i.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "autoce/error.hpp"
#include "autoce/featurizer.hpp"
#include "autoce/nn.hpp"
#include "autoce/rng.hpp"

namespace autoce {

using Embedding = Vector;

struct EncoderConfig {
  std::size_t n_layers = 3;
  std::size_t hidden = 64;
  std::size_t embed_dim = 32;
  std::uint64_t init_seed = 0;

  void check() const {
    require(n_layers >= 1, "EncoderConfig: n_layers must be >= 1");
    require(hidden >= 1 && embed_dim >= 1, "EncoderConfig: dimensions must be >= 1");
  }

  bool operator==(const EncoderConfig&) const = default;
};

struct GinLayer {
  Mlp f;
  double eps = 0.0;
};

struct EncoderParams {
  std::vector<GinLayer> layers;
  Dense out;
};

inline void collect_tensors(GinLayer& l, std::vector<std::span<double>>& out) {
  collect_tensors(l.f, out);
  out.emplace_back(&l.eps, 1);
}

inline void collect_tensors(EncoderParams& p, std::vector<std::span<double>>& out) {
  for (auto& l : p.layers) collect_tensors(l, out);
  collect_tensors(p.out, out);
}

inline EncoderParams zeros_like(const EncoderParams& p) {
  EncoderParams g;
  for (const auto& l : p.layers) g.layers.push_back(GinLayer{l.f.zeros_like(), 0.0});
  g.out = p.out.zeros_like();
  return g;
}

inline Matrix symmetrize(const Matrix& e) { return e.cwiseMax(e.transpose()); }

// One GINConv layer; `adj(j, i)` is the weight of the message from j to i.
inline Matrix ginconv_forward(const Matrix& h, const Matrix& adj, const GinLayer& layer) {
  require(adj.rows() == h.rows() && adj.cols() == h.rows(), "ginconv_forward: adjacency/feature shape mismatch");
  const Matrix z = (1.0 + layer.eps) * h + adj.transpose() * h;
  return layer.f.forward(z);
}

struct EncodeTrace {
  Matrix adj;
  std::vector<Matrix> inputs;  // H^l entering layer l
  std::vector<Mlp::Trace> mlp;
  RowVector pooled;

  bool empty() const { return inputs.empty(); }
};

class GinEncoder {
 public:
  GinEncoder() = default;

  GinEncoder(EncoderConfig cfg, std::size_t input_dim) : cfg_(cfg), input_dim_(input_dim) {
    cfg_.check();
    require(input_dim >= 1, "GinEncoder: input_dim must be >= 1");
    Rng rng(cfg_.init_seed);
    std::size_t in = input_dim;
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      GinLayer layer{Mlp({in, cfg_.hidden, cfg_.hidden}), 0.0};
      layer.f.init(rng);
      params_.layers.push_back(std::move(layer));
      in = cfg_.hidden;
    }
    params_.out = Dense(cfg_.hidden, cfg_.embed_dim);
    params_.out.init(rng);
  }

  const EncoderConfig& config() const { return cfg_; }
  std::size_t input_dim() const { return input_dim_; }
  EncoderParams& params() { return params_; }
  const EncoderParams& params() const { return params_; }

  Embedding encode(const FeatureGraph& g) const {
    EncodeTrace unused;
    return forward(g, unused);
  }

  Embedding forward(const FeatureGraph& g, EncodeTrace& trace) const {
    check_input(g);
    trace = EncodeTrace{};
    trace.adj = symmetrize(g.E);
    Matrix h = g.V;
    for (const auto& layer : params_.layers) {
      trace.inputs.push_back(h);
      const Matrix z = (1.0 + layer.eps) * h + trace.adj.transpose() * h;
      trace.mlp.emplace_back();
      h = layer.f.forward(z, trace.mlp.back());
    }
    trace.pooled = h.colwise().sum();
    return params_.out.forward(trace.pooled).transpose();
  }

  // Accumulates dL/dparams into `grads` given dL/dx for the traced graph.
  void backward(const EncodeTrace& trace, const Embedding& grad_out, EncoderParams& grads) const {
    require(!trace.empty(), "GinEncoder: backward without forward");
    require(grad_out.size() == static_cast<Eigen::Index>(cfg_.embed_dim), "GinEncoder: gradient size mismatch");
    const RowVector dx = grad_out.transpose();
    const Matrix dpool = params_.out.backward(trace.pooled, dx, grads.out);
    Matrix dh = Matrix::Ones(trace.inputs.front().rows(), 1) * dpool;
    for (std::size_t l = params_.layers.size(); l-- > 0;) {
      const auto& layer = params_.layers[l];
      const Matrix dz = layer.f.backward(trace.mlp[l], dh, grads.layers[l].f);
      grads.layers[l].eps += dz.cwiseProduct(trace.inputs[l]).sum();
      dh = (1.0 + layer.eps) * dz + trace.adj * dz;
    }
  }

  EncoderParams zero_grads() const { return zeros_like(params_); }

  json to_json() const {
    json layers = json::array();
    for (const auto& l : params_.layers) layers.push_back({{"f", autoce::to_json(l.f)}, {"eps", l.eps}});
    return {{"config", {{"n_layers", cfg_.n_layers}, {"hidden", cfg_.hidden}, {"embed_dim", cfg_.embed_dim},
                        {"init_seed", cfg_.init_seed}}},
            {"input_dim", input_dim_},
            {"layers", std::move(layers)},
            {"out", autoce::to_json(params_.out)}};
  }

  static GinEncoder from_json(const json& j) {
    GinEncoder e;
    const auto& c = j.at("config");
    e.cfg_ = EncoderConfig{c.at("n_layers"), c.at("hidden"), c.at("embed_dim"), c.at("init_seed")};
    e.cfg_.check();
    e.input_dim_ = j.at("input_dim");
    for (const auto& l : j.at("layers")) e.params_.layers.push_back(GinLayer{mlp_from_json(l.at("f")), l.at("eps")});
    e.params_.out = dense_from_json(j.at("out"));
    require(e.params_.layers.size() == e.cfg_.n_layers, "encoder: layer count disagrees with config");
    require(e.params_.layers.front().f.in() == static_cast<Eigen::Index>(e.input_dim_), "encoder: input width mismatch");
    require(e.params_.out.out() == static_cast<Eigen::Index>(e.cfg_.embed_dim), "encoder: embedding width mismatch");
    return e;
  }

 private:
  void check_input(const FeatureGraph& g) const {
    require(g.V.cols() == static_cast<Eigen::Index>(input_dim_),
            "encoder: feature width " + std::to_string(g.V.cols()) + " does not match model input " +
                std::to_string(input_dim_));
    require(g.V.rows() >= 1, "encoder: feature graph has no vertices");
    require(g.E.rows() == g.V.rows() && g.E.cols() == g.V.rows(), "encoder: edge matrix shape mismatch");
  }

  EncoderConfig cfg_;
  std::size_t input_dim_ = 0;
  EncoderParams params_;
};

inline constexpr int kModelFormatVersion = 1;

// Trained advisor model for one accuracy weight: encoder weights plus the
// feature configuration (layout bounds and normalization) they were fit on.
struct ModelFile {
  double w_a = 1.0;
  FeatureConfig features;
  GinEncoder encoder;

  json to_json() const {
    return {{"format_version", kModelFormatVersion}, {"w_a", w_a}, {"features", autoce::to_json(features)},
            {"encoder", encoder.to_json()}};
  }

  static ModelFile from_json(const json& j) {
    require(j.value("format_version", 0) == kModelFormatVersion, "model file: unsupported format_version");
    ModelFile m{j.at("w_a"), feature_config_from_json(j.at("features")), GinEncoder::from_json(j.at("encoder"))};
    require(m.encoder.input_dim() == m.features.vertex_width(), "model file: encoder input does not match feature layout");
    return m;
  }
};

inline void save_model(const ModelFile& m, const std::filesystem::path& path) {
  detail::write_file(path, m.to_json().dump(1) + "\n");
}

inline ModelFile load_model(const std::filesystem::path& path) {
  try {
    return ModelFile::from_json(json::parse(detail::read_file(path)));
  } catch (const json::exception& e) {
    throw Error("malformed model file '" + path.string() + "': " + e.what());
  }
}

}  // namespace autoce
