#include "helpers.hpp"

#include "autoce/baselines.hpp"
#include "autoce/datagen.hpp"
#include "autoce/pipeline.hpp"

using namespace autoce;
using namespace autoce::test;

namespace {

std::vector<LabeledGraph> clusters(std::size_t per, std::uint64_t seed, double gap) {
  Rng rng(seed);
  std::vector<LabeledGraph> out;
  for (std::size_t i = 0; i < 2 * per; ++i) {
    const bool b = i % 2;
    FeatureGraph g{Matrix(1, 3), Matrix::Zero(1, 1)};
    for (int c = 0; c < 3; ++c) g.V(0, c) = rng.uniform(0, 0.3) + (b ? gap : 0.0);
    out.push_back({"s" + std::to_string(i), g, b ? ScoreVector{0.1, 1.0} : ScoreVector{1.0, 0.2}});
  }
  return out;
}

Dataset small(std::uint64_t seed, int tables) {
  GenParams p;
  p.n_tables = tables;
  p.rows_range = {200, 400};
  Rng rng(seed);
  return gen_multi_table(p, rng, "s" + std::to_string(seed));
}

}  // namespace

TEST(Baselines, MlpSingleClassAlwaysPredictsIt) {
  auto s = clusters(8, 1, 0.5);
  for (auto& x : s) x.label = {0.2, 1.0};
  MlpSelector m(GinEncoder(EncoderConfig{1, 8, 4, 1}, 3), 2, {8}, 1);
  DmlConfig cfg;
  cfg.epochs = 30;
  cfg.lr = 0.05;
  m.train(s, cfg);
  for (const auto& x : s) EXPECT_EQ(m.predict(x.graph), 1u);
}

TEST(Baselines, MlpSeparatesClustersAndIsDeterministic) {
  const auto train = clusters(30, 2, 0.6), held = clusters(10, 3, 0.6);
  DmlConfig cfg;
  cfg.epochs = 60;
  cfg.lr = 0.05;
  MlpSelector a(GinEncoder(EncoderConfig{2, 16, 8, 2}, 3), 2, {16}, 4), b = a;
  a.train(train, cfg);
  b.train(train, cfg);
  int hits = 0;
  for (const auto& x : held) {
    hits += a.predict(x.graph) == argmax(x.label);
    EXPECT_EQ(a.predict(x.graph), b.predict(x.graph));
  }
  EXPECT_GE(hits, 16);
}

TEST(Baselines, RuleSelectFamilies) {
  const auto pool = reference_pool();
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng rng(s);
    EXPECT_EQ(pool[rule_select(small(s, 1), pool, rng)].family, Family::data_driven);
    EXPECT_EQ(pool[rule_select(small(s, 3), pool, rng)].family, Family::query_driven);
  }
  Rng a(9), b(9);
  EXPECT_EQ(rule_select(small(1, 1), pool, a), rule_select(small(1, 1), pool, b));
  EXPECT_THROW(([&] { Rng r(0); return rule_select(small(1, 3), {make_spec("hist-avi"), make_spec("chain-bayes")}, r); })(), Error);
}

TEST(Baselines, SampleDatasetKeepsIntegrity) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng rng(s);
    const Dataset d = small(s, 3);
    const Dataset x = sample_dataset(d, 0.3, rng);
    EXPECT_TRUE(validate(x).empty());
    EXPECT_LT(x.total_rows(), d.total_rows());
  }
  Rng rng(1);
  EXPECT_EQ(sample_dataset(small(1, 2), 1.0, rng), small(1, 2));
}

TEST(Baselines, FullRateSamplingMatchesFullLabeling) {
  const auto pool = std::vector<EstimatorSpec>{make_spec("hist-avi"), make_spec("chain-bayes"), make_spec("sample-eval@1")};
  const Dataset d = small(4, 2);
  SamplingOptions opt;
  opt.rate = 1.0;
  opt.workload = {20, 30, 0.5};
  Rng a(5), b(5);
  const auto chosen = sampling_select(d, pool, opt, 1.0, a);
  Rng c(5);
  Dataset same = sample_dataset(d, 1.0, c);
  const Workload w = gen_workload(same, opt.workload, c);
  EXPECT_EQ(chosen, argmax(score_vector(label_dataset(d, pool, w).records, 1.0)));
  EXPECT_EQ(chosen, sampling_select(d, pool, opt, 1.0, b));

  opt.rate = 0.2;
  Rng r(6);
  EXPECT_LT(sampling_select(d, pool, opt, 1.0, r), pool.size());
}

TEST(Baselines, EvaluateOracleAndMonotoneAccuracy) {
  std::vector<CorpusItem> test;
  for (int i = 0; i < 6; ++i) {
    CorpusItem it;
    it.id = "t" + std::to_string(i);
    it.labels = {{it.id, "e0", 1.0 + i, 1.0}, {it.id, "e1", 3.0, 1.0}, {it.id, "e2", 2.5, 1.0}};
    test.push_back(it);
  }
  std::vector<std::pair<std::string, Strategy>> s{
      {"oracle", [&](std::size_t i, double w) { return argmax(test[i].scores(w)); }},
      {"fixed", [](std::size_t, double) { return std::size_t{2}; }}};
  const auto r = evaluate(s, test, {1.0, 0.5});
  EXPECT_EQ(r.results.size(), 4u);
  EXPECT_DOUBLE_EQ(r.find("oracle", 1.0).mean(), 0.0);
  EXPECT_DOUBLE_EQ(r.find("oracle", 0.5).accuracy(0.1), 1.0);
  const auto& f = r.find("fixed", 1.0);
  EXPECT_LE(f.accuracy(0.1), f.accuracy(0.15));
  EXPECT_LE(f.accuracy(0.15), f.accuracy(0.2));
  EXPECT_NE(report_csv(r).find("fixed,0.50,6,"), std::string::npos);
  EXPECT_NE(report_table(r).find("oracle"), std::string::npos);
  EXPECT_NE(report_detail_csv(r, {"e0", "e1", "e2"}).find("fixed,1.00,t0,e2,"), std::string::npos);
}
