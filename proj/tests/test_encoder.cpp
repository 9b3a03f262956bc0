#include "helpers.hpp"

#include "autoce/dml.hpp"
#include "autoce/encoder.hpp"

using namespace autoce;

namespace {

Mlp identity_mlp(std::size_t n) {
  Mlp f({n, n, n});
  for (auto& l : f.layers) l.weight = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  return f;
}

FeatureGraph random_graph(Rng& rng, Eigen::Index n, Eigen::Index w) {
  FeatureGraph g{Matrix(n, w), Matrix::Zero(n, n)};
  for (Eigen::Index i = 0; i < g.V.size(); ++i) g.V.data()[i] = rng.uniform();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && rng.bernoulli(0.4)) g.E(i, j) = rng.uniform();
  return g;
}

FeatureGraph permute(const FeatureGraph& g, const std::vector<Eigen::Index>& p) {
  const auto n = g.tables();
  FeatureGraph out{Matrix(n, g.V.cols()), Matrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.V.row(i) = g.V.row(p[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < n; ++j) out.E(i, j) = g.E(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
  }
  return out;
}

}  // namespace

TEST(Encoder, IsolatedVertexIdentityUnchanged) {
  const GinLayer layer{identity_mlp(3), 0.0};
  const Matrix h = (Matrix(1, 3) << 0.5, 2.0, 1.0).finished();
  EXPECT_TRUE(ginconv_forward(h, Matrix::Zero(1, 1), layer).isApprox(h));
}

TEST(Encoder, ZeroWeightEdgeIsNoEdge) {
  Rng rng(1);
  GinLayer layer{Mlp({2, 4, 2}), 0.3};
  layer.f.init(rng);
  const Matrix h = (Matrix(2, 2) << 1, 2, 3, 4).finished();
  EXPECT_TRUE(ginconv_forward(h, Matrix::Zero(2, 2), layer).isApprox(ginconv_forward(h, Matrix::Zero(2, 2), layer)));
  Matrix a = Matrix::Zero(2, 2);
  a(0, 1) = 0.0;
  EXPECT_EQ(ginconv_forward(h, a, layer), ginconv_forward(h, Matrix::Zero(2, 2), layer));
}

TEST(Encoder, StarCenterIsOnePlusDegree) {
  const int n = 5;
  Matrix a = Matrix::Zero(n, n);
  for (int j = 1; j < n; ++j) a(0, j) = a(j, 0) = 1.0;
  const GinLayer layer{identity_mlp(1), 0.0};
  const Matrix out = ginconv_forward(Matrix::Ones(n, 1), a, layer);
  EXPECT_DOUBLE_EQ(out(0, 0), 1.0 + (n - 1));
  EXPECT_DOUBLE_EQ(out(1, 0), 2.0);
}

TEST(Encoder, PermutationInvariance) {
  Rng rng(2);
  GinEncoder enc(EncoderConfig{3, 8, 4, 5}, 6);
  for (int t = 0; t < 20; ++t) {
    const auto n = static_cast<Eigen::Index>(rng.uniform_int(1, 5));
    const FeatureGraph g = random_graph(rng, n, 6);
    std::vector<Eigen::Index> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    rng.shuffle(p.begin(), p.end());
    const Embedding a = enc.encode(g), b = enc.encode(permute(g, p));
    EXPECT_LE((a - b).norm(), 1e-6 * std::max(1.0, a.norm()));
  }
}

TEST(Encoder, AllZeroGraphsOfEqualSizeMatch) {
  GinEncoder enc(EncoderConfig{2, 8, 4, 1}, 5);
  EXPECT_EQ(enc.encode({Matrix::Zero(3, 5), Matrix::Zero(3, 3)}), enc.encode({Matrix::Zero(3, 5), Matrix::Zero(3, 3)}));
}

TEST(Encoder, IsolatedZeroVertexAddsConstant) {
  Rng rng(3);
  GinEncoder enc(EncoderConfig{2, 8, 4, 9}, 5);
  for (auto& l : enc.params().layers)
    for (auto& d : l.f.layers) d.bias.setConstant(0.1);
  auto pad = [](const FeatureGraph& g) {
    FeatureGraph out{Matrix::Zero(g.tables() + 1, g.V.cols()), Matrix::Zero(g.tables() + 1, g.tables() + 1)};
    out.V.topRows(g.tables()) = g.V;
    out.E.topLeftCorner(g.tables(), g.tables()) = g.E;
    return out;
  };
  const FeatureGraph a = random_graph(rng, 2, 5), b = random_graph(rng, 3, 5);
  // Readout is affine in the pooled sum, so the shift from one extra zero
  // vertex is the same for every graph.
  const Embedding da = enc.encode(pad(a)) - enc.encode(a), db = enc.encode(pad(b)) - enc.encode(b);
  EXPECT_LE((da - db).norm(), 1e-12);
  EXPECT_GT(da.norm(), 0.0);
}

TEST(Encoder, ZeroUpstreamGradientGivesZeroGrads) {
  Rng rng(4);
  GinEncoder enc(EncoderConfig{2, 4, 3, 2}, 5);
  EncodeTrace tr;
  enc.forward(random_graph(rng, 3, 5), tr);
  EncoderParams g = enc.zero_grads();
  enc.backward(tr, Embedding::Zero(3), g);
  for (auto t : tensors(g))
    for (double v : t) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, DenseGradientClosedForm) {
  Rng rng(5);
  Dense d(3, 2);
  d.init(rng);
  const Matrix x = (Matrix(1, 3) << 1.0, -2.0, 0.5).finished();
  const Matrix target = (Matrix(1, 2) << 0.3, 0.7).finished();
  const Matrix delta = d.forward(x) - target;  // L = 0.5 |y - t|^2
  Dense g = d.zeros_like();
  d.backward(x, delta, g);
  EXPECT_TRUE(g.weight.isApprox(x.transpose() * delta));
  EXPECT_TRUE(g.bias.isApprox(delta));
}

TEST(Encoder, FullGradientMatchesFiniteDifferences) {
  Rng rng(6);
  GinEncoder enc(EncoderConfig{2, 6, 3, 7}, 4);
  for (auto& l : enc.params().layers) l.eps = 0.2;
  const FeatureGraph g = random_graph(rng, 4, 4);
  const Vector w = Vector::Random(3);
  auto loss = [&](const GinEncoder& e) { return w.dot(e.encode(g)) + 0.5 * e.encode(g).squaredNorm(); };
  EncodeTrace tr;
  const Embedding x = enc.forward(g, tr);
  EncoderParams grads = enc.zero_grads();
  enc.backward(tr, w + x, grads);
  auto p = tensors(enc.params());
  auto gr = tensors(grads);
  for (std::size_t t = 0; t < p.size(); ++t)
    for (std::size_t i = 0; i < p[t].size(); ++i) {
      const double keep = p[t][i], h = 1e-5;
      p[t][i] = keep + h;
      const double up = loss(enc);
      p[t][i] = keep - h;
      const double down = loss(enc);
      p[t][i] = keep;
      const double fd = (up - down) / (2 * h);
      EXPECT_NEAR(gr[t][i], fd, 1e-6 + 1e-4 * std::abs(fd)) << "tensor " << t << " index " << i;
    }
}

TEST(Encoder, WidthMismatchRejected) {
  GinEncoder enc(EncoderConfig{}, 4);
  EXPECT_THROW(enc.encode({Matrix::Zero(1, 5), Matrix::Zero(1, 1)}), Error);
}

TEST(Encoder, ModelFileRoundTrip) {
  test::TempDir dir("model");
  FeatureConfig f;
  f.m_max_cols = 1;
  f.n_max_tables = 2;
  ModelFile m{0.7, f, GinEncoder(EncoderConfig{2, 4, 3, 1}, f.vertex_width())};
  save_model(m, dir.path / "m.json");
  const ModelFile back = load_model(dir.path / "m.json");
  EXPECT_EQ(back.w_a, 0.7);
  const FeatureGraph g{Matrix::Ones(2, static_cast<Eigen::Index>(f.vertex_width())), Matrix::Zero(2, 2)};
  EXPECT_EQ(back.encoder.encode(g), m.encoder.encode(g));
}
