#pragma once

// Run configuration, corpus directories, and the end-to-end bench.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "autoce/advisor.hpp"
#include "autoce/baselines.hpp"
#include "autoce/corpus.hpp"
#include "autoce/datagen.hpp"
#include "autoce/dml.hpp"
#include "autoce/encoder.hpp"
#include "autoce/estimators.hpp"
#include "autoce/featurizer.hpp"
#include "autoce/incremental.hpp"
#include "autoce/parallel.hpp"
#include "autoce/workload.hpp"

namespace autoce {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

// A family of generated datasets. Table count and domain size are drawn
// per dataset; everything else comes from `gen`. shuffle_columns permutes the
// stored order of non-key columns, so correlated columns need not be adjacent.
struct Regime {
  std::string name;
  GenParams gen;
  std::pair<int, int> tables_range{1, 1};
  std::pair<int, int> domain_range{100, 100};
  bool shuffle_columns = false;

  void check() const {
    require(!name.empty(), "regime: empty name");
    require(tables_range.first >= 1 && tables_range.first <= tables_range.second, "regime '" + name + "': bad tables_range");
    require(domain_range.first >= 2 && domain_range.first <= domain_range.second, "regime '" + name + "': bad domain_range");
    GenParams g = gen;
    g.n_tables = tables_range.second;
    g.n_main_tables = std::min(g.n_main_tables, g.n_tables);
    g.check();
  }
};

inline std::vector<Regime> default_regimes() {
  Regime uniform{"uniform-independent", {}, {1, 4}, {10, 5000}};
  uniform.gen.corr_range = {0.0, 0.05};
  Regime correlated{"correlated", {}, {1, 4}, {10, 5000}};
  correlated.gen.corr_range = {0.5, 1.0};
  for (auto* r : {&uniform, &correlated}) {
    r->gen.rows_range = {500, 3000};
    r->gen.cols_range = {2, 6};
  }
  Regime large{"correlated-shuffled-large", {}, {1, 1}, {10, 5000}, true};
  large.gen.rows_range = {20000, 40000};
  large.gen.cols_range = {3, 6};
  large.gen.corr_range = {0.5, 1.0};
  for (auto* r : {&uniform, &correlated, &large}) r->gen.skew_range = {0.0, 1.0};
  return {uniform, correlated, large};
}

// Picked by 5-fold CV on training corpora only.
inline DmlConfig default_dml() {
  DmlConfig d;
  d.epochs = 300;
  d.lr = 0.01;
  d.tau = 0.95;
  d.grad_clip = 1.0;
  return d;
}

struct BenchConfig {
  int n_train = 200;
  int n_test = 40;
  double sampling_rate = 0.1;
  std::vector<std::string> strategies{"autoce", "mlp", "rule", "rawknn", "sampling", "oracle"};
};

struct RunConfig {
  std::uint64_t seed = 0;
  unsigned jobs = 0;  // 0: all cores
  std::vector<Regime> regimes = default_regimes();
  WorkloadParams workload{300, 100, 0.5};
  std::vector<std::string> pool = ids_of(reference_pool());
  LatencyUnit unit = LatencyUnit::cost;
  EncoderConfig encoder;
  DmlConfig dml = default_dml();
  IncrementalConfig incremental;
  std::size_t k = 2;
  std::vector<double> w_grid{1.0};
  BenchConfig bench;

  unsigned effective_jobs() const { return jobs ? jobs : default_jobs(); }

  std::vector<EstimatorSpec> pool_specs() const {
    std::vector<EstimatorSpec> out;
    std::set<std::string> seen;
    for (const auto& id : pool) {
      require(seen.insert(id).second, "pool: duplicate estimator id '" + id + "'");
      out.push_back(make_spec(id));
    }
    require(out.size() >= 2, "pool: need at least 2 estimators");
    return out;
  }

  void check() const {
    require(!regimes.empty(), "config: no regimes");
    for (const auto& r : regimes) r.check();
    require(workload.n_train >= 0 && workload.n_test >= 1, "config: workload needs at least one test query");
    require(workload.pred_prob >= 0.0 && workload.pred_prob <= 1.0, "config: workload.pred_prob must be in [0,1]");
    pool_specs();
    encoder.check();
    dml.check();
    incremental.check();
    require(k >= 1, "config: k must be >= 1");
    require(!w_grid.empty(), "config: empty w_grid");
    for (double w : w_grid) require(w >= 0.0 && w <= 1.0, "config: w_grid values must be in [0,1]");
    require(bench.n_train >= 2 && bench.n_test >= 1, "config: bench needs >= 2 train and >= 1 test datasets");
    require(bench.sampling_rate > 0.0 && bench.sampling_rate <= 1.0, "config: bench.sampling_rate must be in (0,1]");
  }
};

// ---------------------------------------------------------------------------
// Strict JSON reading: every key must be known, missing keys keep defaults.

namespace detail {

class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error("config: '" + path_ + "' must be an object");
  }

  template <class T>
  Fields& opt(const char* key, T& out) {
    seen_.insert(key);
    if (const auto it = j_.find(key); it != j_.end()) {
      try {
        out = it->template get<T>();
      } catch (const json::exception&) {
        throw Error("config: bad value for '" + where(key) + "'");
      }
    }
    return *this;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void done() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw Error("config: unknown key '" + where(key) + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline json gen_to_json(const GenParams& g) {
  return {{"rows_range", {g.rows_range.first, g.rows_range.second}},
          {"cols_range", {g.cols_range.first, g.cols_range.second}},
          {"skew_range", {g.skew_range.first, g.skew_range.second}},
          {"corr_range", {g.corr_range.first, g.corr_range.second}},
          {"join_corr_range", {g.join_corr_range.first, g.join_corr_range.second}},
          {"n_main_tables", g.n_main_tables}};
}

inline void gen_from_json(const json& j, const std::string& path, GenParams& g) {
  Fields f(j, path);
  f.opt("rows_range", g.rows_range)
      .opt("cols_range", g.cols_range)
      .opt("skew_range", g.skew_range)
      .opt("corr_range", g.corr_range)
      .opt("join_corr_range", g.join_corr_range)
      .opt("n_main_tables", g.n_main_tables);
  f.done();
}

inline std::string loss_name(LossKind k) { return k == LossKind::weighted ? "weighted" : "basic"; }

inline LossKind loss_from_name(const std::string& s) {
  if (s == "weighted") return LossKind::weighted;
  if (s == "basic") return LossKind::basic;
  throw Error("config: dml.loss must be 'weighted' or 'basic'");
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
  json regimes = json::array();
  for (const auto& r : c.regimes)
    regimes.push_back({{"name", r.name}, {"tables_range", {r.tables_range.first, r.tables_range.second}},
                       {"domain_range", {r.domain_range.first, r.domain_range.second}},
                       {"shuffle_columns", r.shuffle_columns},
                       {"gen", detail::gen_to_json(r.gen)}});
  return {
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"regimes", std::move(regimes)},
      {"workload", {{"n_train", c.workload.n_train}, {"n_test", c.workload.n_test}, {"pred_prob", c.workload.pred_prob}}},
      {"pool", c.pool},
      {"latency_unit", to_string(c.unit)},
      {"encoder", {{"n_layers", c.encoder.n_layers}, {"hidden", c.encoder.hidden}, {"embed_dim", c.encoder.embed_dim},
                   {"init_seed", c.encoder.init_seed}}},
      {"dml", {{"tau", c.dml.tau}, {"margin", c.dml.margin}, {"batch_size", c.dml.batch_size}, {"epochs", c.dml.epochs},
               {"lr", c.dml.lr}, {"seed", c.dml.seed}, {"loss", detail::loss_name(c.dml.loss)}, {"grad_clip", c.dml.grad_clip}}},
      {"incremental", {{"folds", c.incremental.folds}, {"derr_threshold", c.incremental.derr_threshold},
                       {"alpha", c.incremental.alpha}, {"beta", c.incremental.beta},
                       {"extra_epochs", c.incremental.extra_epochs}, {"k", c.incremental.k},
                       {"seed", c.incremental.seed}}},
      {"k", c.k},
      {"w_grid", c.w_grid},
      {"bench", {{"n_train", c.bench.n_train}, {"n_test", c.bench.n_test}, {"sampling_rate", c.bench.sampling_rate},
                 {"strategies", c.bench.strategies}}},
  };
}

inline RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  detail::Fields f(j, "");
  f.opt("seed", c.seed).opt("jobs", c.jobs).opt("pool", c.pool).opt("k", c.k).opt("w_grid", c.w_grid);
  if (const json* r = f.child("regimes")) {
    if (!r->is_array()) throw Error("config: 'regimes' must be an array");
    c.regimes.clear();
    for (std::size_t i = 0; i < r->size(); ++i) {
      const std::string path = "regimes[" + std::to_string(i) + "]";
      Regime reg;
      detail::Fields rf((*r)[i], path);
      rf.opt("name", reg.name).opt("tables_range", reg.tables_range).opt("domain_range", reg.domain_range)
          .opt("shuffle_columns", reg.shuffle_columns);
      if (const json* g = rf.child("gen")) detail::gen_from_json(*g, path + ".gen", reg.gen);
      rf.done();
      c.regimes.push_back(std::move(reg));
    }
  }
  if (const json* w = f.child("workload"))
    detail::Fields(*w, "workload").opt("n_train", c.workload.n_train).opt("n_test", c.workload.n_test)
        .opt("pred_prob", c.workload.pred_prob).done();
  if (const json* u = f.child("latency_unit")) {
    if (!u->is_string()) throw Error("config: 'latency_unit' must be a string");
    c.unit = latency_unit_from_string(u->get<std::string>());
  }
  if (const json* e = f.child("encoder"))
    detail::Fields(*e, "encoder").opt("n_layers", c.encoder.n_layers).opt("hidden", c.encoder.hidden)
        .opt("embed_dim", c.encoder.embed_dim).opt("init_seed", c.encoder.init_seed).done();
  if (const json* d = f.child("dml")) {
    std::string loss = detail::loss_name(c.dml.loss);
    detail::Fields(*d, "dml").opt("tau", c.dml.tau).opt("margin", c.dml.margin).opt("batch_size", c.dml.batch_size)
        .opt("epochs", c.dml.epochs).opt("lr", c.dml.lr).opt("seed", c.dml.seed).opt("loss", loss)
        .opt("grad_clip", c.dml.grad_clip).done();
    c.dml.loss = detail::loss_from_name(loss);
  }
  if (const json* i = f.child("incremental"))
    detail::Fields(*i, "incremental").opt("folds", c.incremental.folds)
        .opt("derr_threshold", c.incremental.derr_threshold).opt("alpha", c.incremental.alpha)
        .opt("beta", c.incremental.beta).opt("extra_epochs", c.incremental.extra_epochs).opt("k", c.incremental.k)
        .opt("seed", c.incremental.seed).done();
  if (const json* b = f.child("bench"))
    detail::Fields(*b, "bench").opt("n_train", c.bench.n_train).opt("n_test", c.bench.n_test)
        .opt("sampling_rate", c.bench.sampling_rate).opt("strategies", c.bench.strategies).done();
  f.done();
  c.check();
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  try {
    return run_config_from_json(json::parse(detail::read_file(path)));
  } catch (const json::parse_error& e) {
    throw Error("malformed config '" + path.string() + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Corpus generation and storage

inline std::string dataset_name(const std::string& prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return prefix + buf;
}

// Dataset i comes from regime i mod |regimes| with its own derived seed.
inline Dataset gen_regime_dataset(const Regime& r, std::uint64_t seed, std::string id) {
  Rng rng(seed);
  GenParams g = r.gen;
  g.n_tables = static_cast<int>(rng.uniform_int(r.tables_range.first, r.tables_range.second));
  g.domain_size = static_cast<int>(rng.uniform_int(r.domain_range.first, r.domain_range.second));
  g.n_main_tables = std::clamp(g.n_main_tables, 1, g.n_tables);
  g.seed = seed;
  Dataset d = gen_multi_table(g, rng, std::move(id));
  if (r.shuffle_columns)
    for (auto& t : d.tables) {
      std::vector<Column> keys, rest;
      for (auto& c : t.columns) (d.is_key_column(t.name, c.name) ? keys : rest).push_back(std::move(c));
      rng.shuffle(rest.begin(), rest.end());
      t.columns = std::move(keys);
      for (auto& c : rest) t.columns.push_back(std::move(c));
    }
  return d;
}

inline std::vector<Dataset> gen_corpus(const std::vector<Regime>& regimes, std::size_t n, std::uint64_t seed,
                                       const std::string& prefix, unsigned jobs = 1) {
  require(!regimes.empty(), "gen_corpus: no regimes");
  std::vector<Dataset> out(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    out[i] = gen_regime_dataset(regimes[i % regimes.size()], derive_seed(seed, i), dataset_name(prefix, i));
  });
  return out;
}

// Every subdirectory holding a manifest, in name order.
inline std::vector<fs::path> corpus_dirs(const fs::path& root) {
  if (fs::exists(root / "manifest.json")) return {root};
  if (!fs::is_directory(root)) throw Error("corpus directory '" + root.string() + "' does not exist");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error("no datasets under '" + root.string() + "'");
  return out;
}

inline std::vector<Dataset> load_corpus(const fs::path& root) {
  std::vector<Dataset> out;
  for (const auto& p : corpus_dirs(root)) out.push_back(load_dataset(p));
  return out;
}

// ---------------------------------------------------------------------------
// Labeling

inline std::uint64_t workload_seed(std::uint64_t seed, std::size_t i) { return derive_seed(seed ^ 0x776f726bULL, i); }

// Labels each dataset with its own seeded workload; throws on the first
// estimator failure so a corpus is never silently partial.
inline std::vector<std::vector<LabelRecord>> label_corpus(const std::vector<Dataset>& corpus,
                                                          const std::vector<EstimatorSpec>& pool,
                                                          const WorkloadParams& wp, LatencyUnit unit,
                                                          std::uint64_t seed, unsigned jobs) {
  std::vector<std::vector<LabelRecord>> out(corpus.size());
  parallel_for(corpus.size(), unit == LatencyUnit::ms ? 1u : jobs, [&](std::size_t i) {
    Rng rng(workload_seed(seed, i));
    const Workload w = gen_workload(corpus[i], wp, rng);
    LabelOutcome lo = label_dataset(corpus[i], pool, w, unit);
    if (!lo.violations.empty()) throw Error("labeling failed: " + lo.violations.front());
    out[i] = std::move(lo.records);
  });
  return out;
}

inline std::vector<CorpusItem> make_items(const std::vector<Dataset>& corpus,
                                          const std::vector<std::vector<LabelRecord>>& labels,
                                          const FeatureConfig& cfg, const std::vector<std::string>& ids) {
  require(corpus.size() == labels.size(), "make_items: label count mismatch");
  std::vector<CorpusItem> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) out.push_back(make_corpus_item(corpus[i], labels[i], cfg, ids));
  return out;
}

// Looks up each dataset's records in a label file's contents.
inline std::vector<std::vector<LabelRecord>> labels_for(const std::vector<Dataset>& corpus,
                                                        const std::vector<LabelRecord>& records) {
  const auto grouped = group_by_dataset(records);
  std::vector<std::vector<LabelRecord>> out;
  for (const auto& d : corpus) {
    const auto it = grouped.find(d.id);
    if (it == grouped.end()) throw Error("no labels for dataset '" + d.id + "'");
    out.push_back(it->second);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

inline std::vector<LabeledGraph> labeled_graphs(const std::vector<CorpusItem>& items, double w_a) {
  std::vector<LabeledGraph> out;
  for (const auto& it : items) out.push_back(LabeledGraph{it.id, it.graph, it.scores(w_a)});
  return out;
}

inline ModelFile train_model(const std::vector<CorpusItem>& items, const FeatureConfig& features,
                             const EncoderConfig& enc, DmlConfig dml, double w_a) {
  dml.w_a = w_a;
  GinEncoder encoder(enc, features.vertex_width());
  TrainResult r = train_encoder(labeled_graphs(items, w_a), dml, std::move(encoder));
  return ModelFile{w_a, features, std::move(r.encoder)};
}

// Model plus the labeled corpus it was trained on; together they form the RCS.
struct Bundle {
  ModelFile model;
  std::vector<std::string> estimator_ids;
  std::vector<CorpusItem> items;

  Rcs rcs() const { return build_rcs(items, model, estimator_ids); }

  json to_json() const {
    json its = json::array();
    for (const auto& it : items) {
      json labels = json::array();
      for (const auto& r : it.labels) labels.push_back(autoce::to_json(r));
      std::vector<double> raw(it.raw.data(), it.raw.data() + it.raw.size());
      its.push_back({{"id", it.id}, {"graph", autoce::to_json(it.graph)}, {"raw", raw}, {"labels", std::move(labels)}});
    }
    json j = model.to_json();
    j["estimators"] = estimator_ids;
    j["rcs"] = std::move(its);
    return j;
  }

  static Bundle from_json(const json& j) {
    Bundle b{ModelFile::from_json(j), j.at("estimators").get<std::vector<std::string>>(), {}};
    for (const auto& ji : j.at("rcs")) {
      CorpusItem it;
      it.id = ji.at("id");
      it.graph = feature_graph_from_json(ji.at("graph"));
      const auto raw = ji.at("raw").get<std::vector<double>>();
      it.raw = Eigen::Map<const Vector>(raw.data(), static_cast<Eigen::Index>(raw.size()));
      for (const auto& jl : ji.at("labels")) it.labels.push_back(label_from_json(jl));
      require(it.labels.size() == b.estimator_ids.size(), "model file: RCS member '" + it.id + "' has wrong label count");
      b.items.push_back(std::move(it));
    }
    return b;
  }
};

inline void save_bundle(const Bundle& b, const fs::path& path) { detail::write_file(path, b.to_json().dump(1) + "\n"); }

inline Bundle load_bundle(const fs::path& path) {
  try {
    return Bundle::from_json(json::parse(detail::read_file(path)));
  } catch (const json::exception& e) {
    throw Error("malformed model file '" + path.string() + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Bench

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
};

struct BenchTimings {
  double generate = 0.0;
  double label = 0.0;
  double train = 0.0;                 // all w_a models
  double autoce_inference = 0.0;      // mean per test dataset
  double sampling_inference = 0.0;    // mean per test dataset
};

struct BenchResult {
  EvalReport report;
  std::vector<Bundle> models;  // one per w_a
  BenchTimings timings;
  std::vector<std::string> estimator_ids;
};

inline std::string wa_tag(double w_a) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", w_a);
  return buf;
}

inline BenchResult run_bench(const RunConfig& cfg, std::FILE* log = nullptr) {
  cfg.check();
  auto say = [&](const std::string& s) {
    if (log) std::fprintf(log, "%s\n", s.c_str()), std::fflush(log);
  };
  const auto pool = cfg.pool_specs();
  const auto ids = ids_of(pool);
  const unsigned jobs = cfg.effective_jobs();
  BenchResult out;
  out.estimator_ids = ids;

  Timer t;
  const auto train = gen_corpus(cfg.regimes, static_cast<std::size_t>(cfg.bench.n_train), derive_seed(cfg.seed, 1), "train", jobs);
  const auto test = gen_corpus(cfg.regimes, static_cast<std::size_t>(cfg.bench.n_test), derive_seed(cfg.seed, 2), "test", jobs);
  out.timings.generate = t.seconds();
  say("generated " + std::to_string(train.size()) + " train + " + std::to_string(test.size()) + " test datasets");

  t = Timer{};
  const auto train_labels = label_corpus(train, pool, cfg.workload, cfg.unit, derive_seed(cfg.seed, 3), jobs);
  const auto test_labels = label_corpus(test, pool, cfg.workload, cfg.unit, derive_seed(cfg.seed, 4), jobs);
  out.timings.label = t.seconds();
  say("labeled in " + detail::fmt(out.timings.label, 1) + " s");

  const FeatureConfig features = fit_normalization(train);
  const auto train_items = make_items(train, train_labels, features, ids);
  const auto test_items = make_items(test, test_labels, features, ids);

  const bool want_sampling = std::count(cfg.bench.strategies.begin(), cfg.bench.strategies.end(), "sampling") > 0;
  std::vector<std::vector<LabelRecord>> sampled(test.size());
  if (want_sampling) {
    t = Timer{};
    parallel_for(test.size(), cfg.unit == LatencyUnit::ms ? 1u : jobs, [&](std::size_t i) {
      Rng rng(derive_seed(cfg.seed ^ 0x73616d70ULL, i));
      const Dataset s = sample_dataset(test[i], cfg.bench.sampling_rate, rng);
      const Workload w = gen_workload(s, cfg.workload, rng);
      LabelOutcome lo = label_dataset(s, pool, w, cfg.unit);
      if (!lo.violations.empty()) throw Error("sampling baseline: " + lo.violations.front());
      sampled[i] = std::move(lo.records);
    });
    out.timings.sampling_inference = t.seconds() / static_cast<double>(test.size());
  }

  std::vector<std::pair<std::string, Strategy>> strategies;
  std::map<double, Rcs> rcs_by_w, raw_by_w;
  std::map<double, std::shared_ptr<MlpSelector>> mlp_by_w;
  std::map<double, std::vector<Embedding>> test_emb;
  t = Timer{};
  for (double w_a : cfg.w_grid) {
    Bundle b{train_model(train_items, features, cfg.encoder, cfg.dml, w_a), ids, train_items};
    rcs_by_w[w_a] = b.rcs();
    raw_by_w[w_a] = build_raw_rcs(train_items, w_a, ids, features);
    say("trained w_a=" + wa_tag(w_a));
    out.models.push_back(std::move(b));
  }
  out.timings.train = t.seconds();

  t = Timer{};
  for (std::size_t m = 0; m < out.models.size(); ++m) {
    const double w_a = cfg.w_grid[m];
    auto& emb = test_emb[w_a];
    for (const auto& d : test) emb.push_back(out.models[m].model.encoder.encode(build_feature_graph(d, features)));
  }
  out.timings.autoce_inference = t.seconds() / static_cast<double>(test.size() * cfg.w_grid.size());

  for (const auto& name : cfg.bench.strategies) {
    if (name == "autoce") {
      strategies.emplace_back(name, [&](std::size_t i, double w_a) {
        return recommend_embedding(test_emb.at(w_a)[i], rcs_by_w.at(w_a), std::min(cfg.k, train.size()), w_a).chosen_index;
      });
    } else if (name == "rawknn") {
      strategies.emplace_back(name, [&](std::size_t i, double w_a) {
        return recommend_embedding(flatten(test_items[i].graph, features.n_max_tables), raw_by_w.at(w_a),
                                   std::min(cfg.k, train.size()), w_a).chosen_index;
      });
    } else if (name == "rule") {
      strategies.emplace_back(name, [&](std::size_t i, double) {
        Rng rng(derive_seed(cfg.seed ^ 0x72756c65ULL, i));
        return rule_select(test[i], pool, rng);
      });
    } else if (name == "mlp") {
      for (double w_a : cfg.w_grid) {
        DmlConfig dml = cfg.dml;
        dml.w_a = w_a;
        auto sel = std::make_shared<MlpSelector>(GinEncoder(cfg.encoder, features.vertex_width()), ids.size(),
                                                 std::vector<std::size_t>{64, 32}, cfg.seed);
        sel->train(labeled_graphs(train_items, w_a), dml);
        mlp_by_w[w_a] = sel;
      }
      strategies.emplace_back(name, [&](std::size_t i, double w_a) { return mlp_by_w.at(w_a)->predict(test_items[i].graph); });
    } else if (name == "sampling") {
      strategies.emplace_back(name, [&](std::size_t i, double w_a) {
        return argmax(score_vector(align_records(sampled[i], ids), w_a));
      });
    } else if (name == "oracle") {
      strategies.emplace_back(name, [&](std::size_t i, double w_a) { return argmax(test_items[i].scores(w_a)); });
    } else {
      throw Error("unknown strategy '" + name + "'");
    }
  }
  out.report = evaluate(strategies, test_items, cfg.w_grid);
  return out;
}

inline json run_manifest(const RunConfig& cfg, const std::string& command) {
  return {{"tool", "autoce"}, {"version", kVersion}, {"command", command}, {"seed", cfg.seed}, {"config", to_json(cfg)}};
}

// Deterministic reports plus a separate wall-clock timings file.
inline void write_bench(const BenchResult& r, const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir / "models");
  detail::write_file(dir / "report.csv", report_csv(r.report));
  detail::write_file(dir / "report_detail.csv", report_detail_csv(r.report, r.estimator_ids));
  detail::write_file(dir / "summary.txt", report_table(r.report));
  for (std::size_t m = 0; m < r.models.size(); ++m)
    save_bundle(r.models[m], dir / "models" / ("model_wa" + wa_tag(cfg.w_grid[m]) + ".json"));
  detail::write_file(dir / "manifest.json", run_manifest(cfg, "bench").dump(1) + "\n");
  const auto& tm = r.timings;
  detail::write_file(dir / "timings.csv",
                     "phase,seconds\ngenerate," + detail::fmt(tm.generate, 4) + "\nlabel," + detail::fmt(tm.label, 4) +
                         "\ntrain," + detail::fmt(tm.train, 4) + "\nautoce_inference_per_dataset," +
                         detail::fmt(tm.autoce_inference, 6) + "\nsampling_inference_per_dataset," +
                         detail::fmt(tm.sampling_inference, 6) + "\n");
}

}  // namespace autoce
