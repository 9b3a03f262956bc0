#include "helpers.hpp"

#include <cmath>

#include "autoce/datagen.hpp"
#include "autoce/estimators.hpp"

using namespace autoce;
using namespace autoce::test;

namespace {

Dataset uniform_two_columns(std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d{"u", {table("t", {sample_skewed_column(rows, 100, 0.0, rng, "a"), sample_skewed_column(rows, 100, 0.0, rng, "b")})}, {}};
  return d;
}

Dataset small_multi(std::uint64_t seed) {
  GenParams p;
  p.n_tables = 3;
  p.rows_range = {100, 300};
  Rng rng(seed);
  return gen_multi_table(p, rng, "m" + std::to_string(seed));
}

}  // namespace

TEST(Estimators, RegistryIdsAndSuffix) {
  const auto s = make_spec("hist-avi@8");
  EXPECT_EQ(s.kind(), "hist-avi");
  EXPECT_DOUBLE_EQ(s.param("buckets", 0), 8.0);
  EXPECT_EQ(make_spec("qd-mlp").family, Family::query_driven);
  EXPECT_THROW(make_spec("nope"), Error);
  EXPECT_EQ(ids_of(reference_pool()).size(), 5u);
}

TEST(Estimators, HistogramBucketBound) {
  Rng rng(1);
  Dataset d{"h", {table("t", {sample_skewed_column(5000, 1000, 0.3, rng, "a")})}, {}};
  const auto t = train_estimator(make_spec("hist-avi@16"), d, {});
  const auto& h = dynamic_cast<const HistAvi&>(*t.model).histogram(0, 0);
  EXPECT_LE(h.size(), 16u);
  double total = 0.0;
  for (const auto& b : h) total += b.count;
  EXPECT_DOUBLE_EQ(total, 5000.0);
}

TEST(Estimators, QueryDrivenNeedsTrainingQueries) {
  const Dataset d = uniform_two_columns(100, 2);
  EXPECT_THROW(train_estimator(make_spec("qd-linear"), d, Workload{}), Error);
}

TEST(Estimators, FullSampleMatchesOracle) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Dataset d = small_multi(s);
    Rng rng(s + 10);
    const Workload w = gen_workload(d, {0, 40, 0.6}, rng);
    const auto t = train_estimator(make_spec("sample-eval@1"), d, w);
    for (const auto& q : w.test)
      EXPECT_DOUBLE_EQ(t.estimate(q).card, std::max<double>(1.0, static_cast<double>(nested_loop_count(d, q))));
  }
}

TEST(Estimators, HistogramFullDomainIsRowCount) {
  const Dataset d = uniform_two_columns(2000, 3);
  const auto t = train_estimator(make_spec("hist-avi"), d, {});
  EXPECT_NEAR(t.estimate(Query{{"t"}, {}, {{"t", "a", 1, 100}}, {}}).card, 2000.0, 1e-9);
}

TEST(Estimators, HistogramIndependenceOnUniformData) {
  const Dataset d = uniform_two_columns(10000, 4);
  const auto t = train_estimator(make_spec("hist-avi"), d, {});
  const Query q{{"t"}, {}, {{"t", "a", 0, 49}, {"t", "b", 0, 49}}, {}};
  const double truth = static_cast<double>(exact_card(d, q));
  EXPECT_NEAR(t.estimate(q).card, truth, 0.1 * truth);
  EXPECT_NEAR(truth, 2500.0, 250.0);
}

TEST(Estimators, EstimatesFlooredAtOne) {
  const Dataset d = uniform_two_columns(100, 5);
  const auto t = train_estimator(make_spec("hist-avi"), d, {});
  EXPECT_GE(t.estimate(Query{{"t"}, {}, {{"t", "a", 500, 600}}, {}}).card, 1.0);
}

TEST(Estimators, SerializeRoundTripPreservesEstimates) {
  const Dataset d = small_multi(6);
  Rng rng(6);
  const Workload w = gen_workload(d, {60, 20, 0.5}, rng);
  for (const auto& spec : reference_pool()) {
    const auto t = train_estimator(spec, d, w);
    const auto back = TrainedEstimator::deserialize(json::parse(t.serialize().dump()));
    for (const auto& q : w.test) EXPECT_DOUBLE_EQ(back.estimate(q).card, t.estimate(q).card) << spec.id;
  }
}

TEST(Estimators, WrongDatasetQueryRejected) {
  const Dataset d = uniform_two_columns(100, 7);
  const auto t = train_estimator(make_spec("hist-avi"), d, {});
  EXPECT_THROW(t.estimate(Query{{"other"}, {}, {}, {}}), Error);
}

TEST(Estimators, LabelDatasetRecordCounts) {
  const Dataset d = small_multi(8);
  Rng rng(8);
  const Workload w = gen_workload(d, {50, 30, 0.5}, rng);
  EXPECT_EQ(label_dataset(d, {make_spec("hist-avi")}, w).records.size(), 1u);
  const auto twice = label_dataset(d, {make_spec("chain-bayes"), make_spec("chain-bayes")}, w);
  ASSERT_EQ(twice.records.size(), 2u);
  EXPECT_EQ(twice.records[0].qerr_mean, twice.records[1].qerr_mean);
  EXPECT_EQ(twice.records[0].latency_mean, twice.records[1].latency_mean);
}

TEST(Estimators, ExactSamplerBeatsHistogramOnCorrelatedData) {
  GenParams p;
  p.rows_range = {3000, 3000};
  p.cols_range = {3, 3};
  p.corr_range = {0.9, 0.9};
  Rng rng(9);
  Dataset d{"c", {gen_single_table(p, rng)}, {}};
  const Workload w = gen_workload(d, {0, 60, 1.0}, rng);
  const auto out = label_dataset(d, {make_spec("sample-eval@1"), make_spec("hist-avi")}, w);
  ASSERT_TRUE(out.violations.empty());
  EXPECT_DOUBLE_EQ(out.records[0].qerr_mean, 1.0);
  EXPECT_GT(out.records[1].qerr_mean, 1.0);
}

TEST(Estimators, FailuresBecomeViolations) {
  const Dataset d = uniform_two_columns(50, 10);
  Rng rng(10);
  Workload w = gen_workload(d, {0, 5, 0.5}, rng);
  const auto out = label_dataset(d, {make_spec("hist-avi"), make_spec("qd-linear")}, w);
  EXPECT_EQ(out.records.size(), 1u);
  EXPECT_EQ(out.violations.size(), 1u);
}

TEST(Estimators, ScoreVectorArithmetic) {
  auto rec = [](double q, double t) { return LabelRecord{"d", "e", q, t, LatencyUnit::cost}; };
  const auto s = score_vector({rec(2, 1), rec(6, 2), rec(10, 3)}, 1.0);
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
  EXPECT_DOUBLE_EQ(s[2], 0.0);
  for (double v : score_vector({rec(2, 5), rec(3, 5)}, 0.0)) EXPECT_DOUBLE_EQ(v, 1.0);
  EXPECT_DOUBLE_EQ(score_vector({rec(1, 1), rec(3, 4), rec(2, 9)}, 0.5)[0], 1.0);
}

TEST(Estimators, DErrorArithmetic) {
  EXPECT_DOUBLE_EQ(d_error({0.3, 1.0, 0.8}, 1), 0.0);
  EXPECT_DOUBLE_EQ(d_error({1.0, 0.8}, 1), 0.25);
  EXPECT_DOUBLE_EQ(d_error({1.0, 0.0}, 1), 1e6);
}

TEST(Estimators, ArgmaxLowestIndexOnTie) { EXPECT_EQ(argmax({0.5, 0.9, 0.9}), 1u); }
