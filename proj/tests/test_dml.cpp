#include "helpers.hpp"

#include <cmath>

#include "autoce/dml.hpp"

using namespace autoce;

namespace {

std::vector<LabeledGraph> two_clusters(std::size_t per, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledGraph> out;
  for (std::size_t i = 0; i < 2 * per; ++i) {
    const bool second = i % 2;
    FeatureGraph g{Matrix(1, 4), Matrix::Zero(1, 1)};
    for (int c = 0; c < 4; ++c) g.V(0, c) = rng.uniform(0.0, 0.3) + (second && c < 2 ? 0.4 : 0.0);
    out.push_back({"s" + std::to_string(i), g, second ? ScoreVector{0, 1} : ScoreVector{1, 0}});
  }
  return out;
}

std::pair<double, double> intra_inter(const GinEncoder& enc, const std::vector<LabeledGraph>& s) {
  double intra = 0, inter = 0;
  int ni = 0, ne = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      const double d = embed_distance(enc.encode(s[i].graph), enc.encode(s[j].graph));
      if (s[i].label == s[j].label) intra += d, ++ni;
      else inter += d, ++ne;
    }
  return {intra / ni, inter / ne};
}

}  // namespace

TEST(Dml, CosineSimilarity) {
  EXPECT_DOUBLE_EQ(cosine_sim({0.5, 0.2}, {0.5, 0.2}), 1.0);
  EXPECT_DOUBLE_EQ(cosine_sim({1, 0}, {0, 1}), 0.0);
  EXPECT_NEAR(cosine_sim({1, 1, 0}, {1, 0, 0}), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(cosine_sim({0, 0}, {1, 0}), 0.0);
}

TEST(Dml, PartitionRules) {
  const Matrix sim = (Matrix(3, 3) << 1.0, 0.97, 0.90, 0.97, 1.0, 0.5, 0.90, 0.5, 1.0).finished();
  const Partition p = partition(sim, 0, 0.95);
  EXPECT_EQ(p.positives, (std::vector<std::size_t>{1}));
  EXPECT_EQ(p.negatives, (std::vector<std::size_t>{2}));

  const Matrix distinct = similarity_matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  EXPECT_TRUE(partition(distinct, 1, 1.0).positives.empty());
  const Matrix nonneg = similarity_matrix({{1, 0}, {0, 1}, {0.3, 0.2}});
  EXPECT_EQ(partition(nonneg, 0, 0.0).positives.size(), 2u);
}

TEST(Dml, Distances) {
  const Matrix x = (Matrix(3, 2) << 0, 0, 3, 4, 0, 0).finished();
  const Matrix u = distance_matrix(x);
  EXPECT_DOUBLE_EQ(u(0, 1), 5.0);
  EXPECT_DOUBLE_EQ(u(0, 2), 0.0);
  EXPECT_EQ(u, u.transpose());
}

TEST(Dml, SinglePositiveLossIsOne) {
  // Two identical samples: each anchor has one positive at U=0, Sim=1.
  const Matrix x = Matrix::Zero(2, 3);
  const auto r = weighted_contrastive_loss(x, {{1, 0}, {1, 0}}, DmlConfig{});
  EXPECT_DOUBLE_EQ(r.loss, 1.0);
}

TEST(Dml, NegativeTermDecreasesWithDistance) {
  DmlConfig cfg;
  double prev = std::numeric_limits<double>::infinity();
  for (double far : {1.0, 2.0, 5.0, 20.0}) {
    const Matrix x = (Matrix(3, 1) << 0, 0, far).finished();
    const double loss = weighted_contrastive_loss(x, {{1, 0}, {1, 0}, {0, 1}}, cfg).loss;
    EXPECT_LT(loss, prev);
    prev = loss;
  }
}

TEST(Dml, PairWeightsMatchClosedForm) {
  Rng rng(1);
  const int m = 8;
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x(m, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    std::vector<ScoreVector> labels;
    for (int i = 0; i < m; ++i) labels.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
    const double tau = 0.9, gamma = 1.0;
    const Matrix sim = similarity_matrix(labels), u = distance_matrix(x);
    const DistanceLoss dl = weighted_loss_on_distances(u, sim, tau, gamma);
    for (int i = 0; i < m; ++i) {
      const Partition p = partition(sim, static_cast<std::size_t>(i), tau);
      for (auto j : p.positives) {
        double s = 0;
        for (auto k : p.positives) s += std::exp((u(i, k) - u(i, j)) + (sim(i, k) - sim(i, j)));
        EXPECT_NEAR(m * std::abs(dl.d_distance(i, j)), 1.0 / s, 1e-12);
      }
      for (auto j : p.negatives) {
        double s = 0;
        for (auto k : p.negatives) s += std::exp((u(i, j) - u(i, k)) + (sim(i, j) - sim(i, k)));
        EXPECT_NEAR(m * std::abs(dl.d_distance(i, j)), 1.0 / s, 1e-12);
      }
    }
  }
}

TEST(Dml, EqualContextPositivesShareWeight) {
  // Anchor 0 sees three positives at equal distance and similarity.
  const Matrix x = (Matrix(4, 2) << 0, 0, 1, 0, -1, 0, 0, 1).finished();
  const DistanceLoss dl = weighted_loss_on_distances(distance_matrix(x), similarity_matrix({{1, 0}, {1, 0}, {1, 0}, {1, 0}}), 0.95, 1.0);
  for (int j = 1; j < 4; ++j) EXPECT_NEAR(4 * dl.d_distance(0, j), 1.0 / 3.0, 1e-15);
}

TEST(Dml, LossGradientMatchesFiniteDifferences) {
  Rng rng(2);
  Matrix x(6, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const std::vector<ScoreVector> labels{{1, 0}, {0.9, 0.1}, {0, 1}, {0.2, 1}, {1, 0.05}, {0.5, 0.5}};
  DmlConfig cfg;
  cfg.tau = 0.9;
  const LossResult r = weighted_contrastive_loss(x, labels, cfg);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix a = x, b = x;
    a.data()[i] += 1e-6;
    b.data()[i] -= 1e-6;
    const double fd = (weighted_contrastive_loss(a, labels, cfg).loss - weighted_contrastive_loss(b, labels, cfg).loss) / 2e-6;
    EXPECT_NEAR(r.grad.data()[i], fd, 1e-6);
  }
}

TEST(Dml, BasicLossArithmetic) {
  EXPECT_DOUBLE_EQ(basic_contrastive_loss(Matrix::Zero(3, 2), {{1, 0}, {1, 0}, {0, 1}}, DmlConfig{}), 0.0);
  // 1-D points 0, 2, 5; anchor 0 alone gives 2 - 5 = -3. Anchor 1: 2 - 3.
  // Anchor 2: -(5 + 3). Mean over the three anchors is -4.
  const Matrix x = (Matrix(3, 1) << 0, 2, 5).finished();
  const std::vector<ScoreVector> labels{{1, 0}, {1, 0}, {0, 1}};
  EXPECT_DOUBLE_EQ(basic_contrastive_loss(x, labels, DmlConfig{}), -4.0);
  EXPECT_DOUBLE_EQ(basic_contrastive_loss(2.5 * x, labels, DmlConfig{}), -10.0);
}

TEST(Dml, ConfigChecks) {
  DmlConfig c;
  c.lr = 0.0;
  EXPECT_THROW(c.check(), Error);
  c = DmlConfig{};
  c.batch_size = 1;
  EXPECT_THROW(c.check(), Error);
  c = DmlConfig{};
  c.tau = 1.5;
  EXPECT_THROW(c.check(), Error);
}

TEST(Dml, ZeroStepLeavesParameters) {
  GinEncoder enc(EncoderConfig{2, 4, 3, 1}, 4);
  const json before = enc.to_json();
  EncoderParams g = enc.zero_grads();
  for (auto t : tensors(g))
    for (double& v : t) v = 1.0;
  sgd_step(enc.params(), g, 0.0);
  EXPECT_EQ(enc.to_json(), before);
}

TEST(Dml, GradientClippingBoundsNorm) {
  GinEncoder enc(EncoderConfig{1, 2, 2, 1}, 2);
  EncoderParams g = enc.zero_grads();
  for (auto t : tensors(g))
    for (double& v : t) v = 3.0;
  clip_gradients(g, 0.5);
  double sq = 0;
  for (auto t : tensors(g))
    for (double v : t) sq += v * v;
  EXPECT_NEAR(std::sqrt(sq), 0.5, 1e-12);
}

TEST(Dml, TrainingSeparatesTwoClusters) {
  const auto samples = two_clusters(20, 3);
  DmlConfig cfg;
  cfg.epochs = 50;
  cfg.lr = 0.01;
  cfg.batch_size = 16;
  const TrainResult r = train_encoder(samples, cfg, GinEncoder(EncoderConfig{2, 16, 8, 4}, 4));
  const auto [intra, inter] = intra_inter(r.encoder, samples);
  EXPECT_LT(intra, inter);
  EXPECT_EQ(r.loss_trace.size(), 50u);
}

TEST(Dml, TrainingIsDeterministic) {
  const auto samples = two_clusters(10, 4);
  DmlConfig cfg;
  cfg.epochs = 5;
  const auto a = train_encoder(samples, cfg, GinEncoder(EncoderConfig{2, 8, 4, 4}, 4));
  const auto b = train_encoder(samples, cfg, GinEncoder(EncoderConfig{2, 8, 4, 4}, 4));
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  EXPECT_EQ(a.encoder.to_json(), b.encoder.to_json());
}

TEST(Dml, TooFewSamplesRejected) {
  EXPECT_THROW(train_encoder({two_clusters(1, 1)[0]}, DmlConfig{}, GinEncoder(EncoderConfig{}, 4)), Error);
}
