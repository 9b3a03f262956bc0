#include "helpers.hpp"

#include <cmath>

#include "autoce/datagen.hpp"
#include "autoce/featurizer.hpp"

using namespace autoce;
using namespace autoce::test;

TEST(Featurizer, ConstantColumnStats) {
  const auto s = extract_column_stats(col("c", {7, 7, 7}));
  EXPECT_EQ(s, (std::array<double, 6>{0, 1, 0, 0, 0, 7}));
}

TEST(Featurizer, HandComputedMoments) {
  const auto s = extract_column_stats(col("c", {1, 2, 3}));
  EXPECT_DOUBLE_EQ(s[0], 0.0);
  EXPECT_DOUBLE_EQ(s[1], 3.0);
  EXPECT_DOUBLE_EQ(s[2], -1.5);  // m4/m2^2 - 3 = (2/3)/(4/9) - 3
  EXPECT_DOUBLE_EQ(s[3], 2.0);
  EXPECT_DOUBLE_EQ(s[4], std::sqrt(2.0 / 3.0));
  EXPECT_DOUBLE_EQ(s[5], 2.0);
  EXPECT_DOUBLE_EQ(extract_column_stats(col("c", {1, 1, 9, 9}))[0], 0.0);
}

TEST(Featurizer, EmptyColumnRejected) { EXPECT_THROW(extract_column_stats(col("c", {})), Error); }

TEST(Featurizer, CorrelationBlock) {
  const Table same = table("t", {col("a", {1, 5, 2, 8}), col("b", {1, 5, 2, 8})});
  const Matrix c = extract_correlation_block(same, 4);
  EXPECT_DOUBLE_EQ(c(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(c(0, 0), 1.0);
  int zeros = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) zeros += (i >= 2 || j >= 2) && c(i, j) == 0.0;
  EXPECT_EQ(zeros, 12);

  Rng rng(1);
  const Table ind = table("t", {sample_skewed_column(10000, 100, 0, rng, "a"), sample_skewed_column(10000, 100, 0, rng, "b")});
  EXPECT_LE(extract_correlation_block(ind, 2)(0, 1), 0.05);
}

TEST(Featurizer, NegativeCorrelationIsAbsolute) {
  const Table t = table("t", {col("a", {1, 2, 3}), col("b", {3, 2, 1})});
  EXPECT_DOUBLE_EQ(extract_correlation_block(t, 2)(0, 1), 1.0);
}

TEST(Featurizer, FiveTableShapeIs5x42) {
  GenParams p;
  p.n_tables = 5;
  p.cols_range = {4, 4};
  p.rows_range = {50, 100};
  Rng rng(2);
  const Dataset d = gen_multi_table(p, rng);
  FeatureConfig cfg;
  const FeatureGraph g = build_feature_graph(d, cfg);
  EXPECT_EQ(g.V.rows(), 5);
  EXPECT_EQ(g.V.cols(), 42);
  EXPECT_EQ(g.E.rows(), 5);
}

TEST(Featurizer, EdgeWeightIsJoinCoverage) {
  std::vector<std::int64_t> pk(10000);
  for (std::size_t i = 0; i < pk.size(); ++i) pk[i] = static_cast<std::int64_t>(i + 1);
  Rng rng(3);
  const auto fk = sample_foreign_keys(pk, 0.54, 10000, rng);
  const Dataset d = parent_child(std::vector<std::int64_t>(10000, 0), fk, std::vector<std::int64_t>(10000, 0));
  const FeatureGraph g = raw_feature_graph(d, 1);
  EXPECT_NEAR(g.E(0, 1), 0.54, 0.05);
  EXPECT_DOUBLE_EQ(g.E(1, 0), 0.0);
}

TEST(Featurizer, SingleTableZeroEdge) {
  const Dataset d{"s", {table("t", {col("a", {1, 2})})}, {}};
  const FeatureGraph g = raw_feature_graph(d, 1);
  EXPECT_EQ(g.E.rows(), 1);
  EXPECT_DOUBLE_EQ(g.E(0, 0), 0.0);
}

TEST(Featurizer, LayoutTail) {
  const Dataset d{"s", {table("t", {col("a", {1, 2, 4}), col("b", {0, 0, 1})})}, {}};
  const FeatureGraph g = raw_feature_graph(d, 3);
  const auto w = g.V.cols();
  EXPECT_EQ(w, (6 + 3) * 3 + 2);
  EXPECT_DOUBLE_EQ(g.V(0, w - 2), 3.0);
  EXPECT_DOUBLE_EQ(g.V(0, w - 1), 2.0);
  EXPECT_DOUBLE_EQ(g.V(0, 3), 3.0);      // range of a
  EXPECT_DOUBLE_EQ(g.V(0, 6 + 1), 2.0);  // column b starts at k; distinct is slot 1
}

TEST(Featurizer, SingleDatasetCorpusNormalizesToOne) {
  const Dataset d{"s", {table("t", {col("a", {1, 2, 4})})}, {}};
  const FeatureConfig cfg = fit_normalization(std::vector<Dataset>{d});
  const FeatureGraph g = build_feature_graph(d, cfg);
  for (Eigen::Index c = 0; c < g.V.cols(); ++c) EXPECT_DOUBLE_EQ(g.V(0, c), 1.0);
}

TEST(Featurizer, MinMaxIsScaleInvariant) {
  auto make = [](std::int64_t scale) {
    std::vector<Dataset> out;
    for (std::int64_t k = 1; k <= 3; ++k)
      out.push_back(Dataset{"d" + std::to_string(k), {table("t", {col("a", {0, k * scale, 2 * k * scale})})}, {}});
    return out;
  };
  const auto a = make(1), b = make(10);
  const FeatureGraph ga = build_feature_graph(a[1], fit_normalization(a));
  const FeatureGraph gb = build_feature_graph(b[1], fit_normalization(b));
  EXPECT_TRUE(ga.V.isApprox(gb.V, 1e-12));
}

TEST(Featurizer, OutOfRangeIsClamped) {
  std::vector<Dataset> corpus{Dataset{"a", {table("t", {col("a", {0, 1})})}, {}},
                              Dataset{"b", {table("t", {col("a", {0, 2, 4})})}, {}}};
  const FeatureConfig cfg = fit_normalization(corpus);
  const Dataset big{"c", {table("t", {col("a", {0, 1000, 5000, 9000, 1})})}, {}};
  const FeatureGraph g = build_feature_graph(big, cfg);
  EXPECT_GE(g.V.minCoeff(), 0.0);
  EXPECT_LE(g.V.maxCoeff(), 1.0);
}

TEST(Featurizer, BoundsEnforced) {
  std::vector<Dataset> corpus{Dataset{"a", {table("t", {col("a", {0, 1})})}, {}}};
  const FeatureConfig cfg = fit_normalization(corpus);
  const Dataset wide{"w", {table("t", {col("a", {0}), col("b", {1})})}, {}};
  EXPECT_THROW(build_feature_graph(wide, cfg), Error);
}

TEST(Featurizer, ConfigJsonRoundTrip) {
  std::vector<Dataset> corpus{Dataset{"a", {table("t", {col("a", {0, 1}), col("b", {3, 1})})}, {}}};
  const FeatureConfig cfg = fit_normalization(corpus);
  EXPECT_EQ(feature_config_from_json(json::parse(to_json(cfg).dump())), cfg);
}
