// autoce: command-line front end for the model advisor pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "autoce/pipeline.hpp"

using namespace autoce;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
};

RunConfig resolve(const Globals& g) {
  RunConfig c = g.config.empty() ? RunConfig{} : load_run_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (g.jobs) c.jobs = *g.jobs;
  c.check();
  return c;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + detail::fmt(v[i], 6);
  return out;
}

// A model path is a single file or a directory of model_wa*.json files.
std::map<double, Bundle> load_models(const fs::path& path) {
  std::map<double, Bundle> out;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.path().extension() == ".json" && e.path().filename().string().rfind("model_wa", 0) == 0) {
        Bundle b = load_bundle(e.path());
        const double w = b.model.w_a;
        out.emplace(w, std::move(b));
      }
    if (out.empty()) throw Error("no model files in '" + path.string() + "'");
  } else {
    Bundle b = load_bundle(path);
    const double w = b.model.w_a;
    out.emplace(w, std::move(b));
  }
  return out;
}

const Bundle& pick_model(const std::map<double, Bundle>& models, double w_a) {
  std::vector<double> keys;
  for (const auto& [w, b] : models) keys.push_back(w);
  return models.at(nearest_key(keys, w_a));
}

void write_manifest(const fs::path& dir, const RunConfig& cfg, const std::string& command) {
  fs::create_directories(dir);
  detail::write_file(dir / "run_manifest.json", run_manifest(cfg, command).dump(1) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AutoCE model advisor for cardinality estimation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "seed (overrides config)");
  app.add_option("--jobs", g.jobs, "worker threads for dataset fan-out (default: all cores)");
  app.set_version_flag("--version", kVersion);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  std::string gen_out, gen_prefix = "d", gen_regime;
  std::size_t gen_n = 10;
  gen->add_option("--out", gen_out, "corpus directory")->required();
  gen->add_option("--n", gen_n, "number of datasets");
  gen->add_option("--prefix", gen_prefix, "dataset id prefix");
  gen->add_option("--regime", gen_regime, "only this regime (default: cycle all)");

  // gen-workload
  auto* gw = app.add_subcommand("gen-workload", "generate a workload for one dataset");
  std::string gw_dataset, gw_out;
  std::optional<int> gw_train, gw_test;
  gw->add_option("--dataset", gw_dataset, "dataset directory")->required();
  gw->add_option("--out", gw_out, "workload JSONL")->required();
  gw->add_option("--n-train", gw_train, "training queries");
  gw->add_option("--n-test", gw_test, "test queries");

  // label
  auto* lab = app.add_subcommand("label", "label datasets with every pool estimator");
  std::string lab_corpus, lab_out, lab_workload, lab_unit;
  lab->add_option("--corpus", lab_corpus, "corpus or dataset directory")->required();
  lab->add_option("--out", lab_out, "label JSONL (overwritten)")->required();
  lab->add_option("--workload", lab_workload, "workload JSONL (single dataset only)");
  lab->add_option("--unit", lab_unit, "latency unit")->check(CLI::IsMember({"cost", "ms"}));

  // train
  auto* tr = app.add_subcommand("train", "train the advisor for one or more accuracy weights");
  std::string tr_corpus, tr_labels, tr_out;
  std::vector<double> tr_wa;
  std::optional<int> tr_epochs;
  std::optional<double> tr_lr;
  tr->add_option("--corpus", tr_corpus, "corpus directory")->required();
  tr->add_option("--labels", tr_labels, "label JSONL")->required();
  tr->add_option("--wa", tr_wa, "accuracy weight(s); default: config w_grid")->check(CLI::Range(0.0, 1.0));
  tr->add_option("--out", tr_out, "model file (one w_a) or directory (grid)")->required();
  tr->add_option("--epochs", tr_epochs, "training epochs");
  tr->add_option("--lr", tr_lr, "learning rate");

  // cross-train
  auto* ct = app.add_subcommand("cross-train", "incremental learning with Mixup on poorly predicted samples");
  std::string ct_model, ct_out, ct_report;
  std::optional<double> ct_b;
  ct->add_option("--model", ct_model, "model file")->required()->check(CLI::ExistingFile);
  ct->add_option("--out", ct_out, "updated model file")->required();
  ct->add_option("--report", ct_report, "before/after CSV");
  ct->add_option("--threshold", ct_b, "D-error threshold b");

  // recommend
  auto* rec = app.add_subcommand("recommend", "recommend an estimator for a dataset");
  std::string rec_model = "model.json", rec_dataset;
  double rec_wa = 1.0;
  std::optional<std::size_t> rec_k;
  rec->add_option("--model", rec_model, "model file or directory")->check(CLI::ExistingPath);
  rec->add_option("--dataset", rec_dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  rec->add_option("--wa", rec_wa, "accuracy weight")->check(CLI::Range(0.0, 1.0));
  rec->add_option("--k", rec_k, "neighbors");

  // drift-check
  auto* dc = app.add_subcommand("drift-check", "test a dataset for drift and optionally adapt");
  std::string dc_model, dc_dataset, dc_out;
  bool dc_adapt = false;
  dc->add_option("--model", dc_model, "model file")->required()->check(CLI::ExistingFile);
  dc->add_option("--dataset", dc_dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  dc->add_flag("--adapt", dc_adapt, "label the dataset and fine-tune when drift is detected");
  dc->add_option("--out", dc_out, "adapted model file (with --adapt)");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "compare selection strategies on a labeled test corpus");
  std::string ev_model, ev_corpus, ev_labels, ev_out;
  std::vector<double> ev_wa;
  std::vector<std::string> ev_strategies{"autoce", "rule", "rawknn", "oracle"};
  ev->add_option("--model", ev_model, "model file or directory")->required()->check(CLI::ExistingPath);
  ev->add_option("--corpus", ev_corpus, "test corpus directory")->required();
  ev->add_option("--labels", ev_labels, "test label JSONL")->required();
  ev->add_option("--wa", ev_wa, "accuracy weight grid (default: config w_grid)")->check(CLI::Range(0.0, 1.0));
  ev->add_option("--strategies", ev_strategies, "autoce, mlp, rule, rawknn, sampling, oracle");
  ev->add_option("--out", ev_out, "report directory")->required();

  // bench
  auto* be = app.add_subcommand("bench", "generate, label, train and evaluate end to end");
  std::string be_out;
  be->add_option("--out", be_out, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    std::cerr << "usage error: " << msg << "\n" << app.help();
    return 2;
  }

  try {
    const RunConfig cfg = resolve(g);
    const unsigned jobs = cfg.effective_jobs();

    if (*gen) {
      std::vector<Regime> regimes = cfg.regimes;
      if (!gen_regime.empty()) {
        std::erase_if(regimes, [&](const Regime& r) { return r.name != gen_regime; });
        if (regimes.empty()) throw Error("unknown regime '" + gen_regime + "'");
      }
      const auto corpus = gen_corpus(regimes, gen_n, cfg.seed, gen_prefix, jobs);
      for (const auto& d : corpus) save_dataset(d, fs::path(gen_out) / d.id);
      write_manifest(gen_out, cfg, "gen-data");
      std::printf("wrote %zu datasets to %s\n", corpus.size(), gen_out.c_str());
    } else if (*gw) {
      const Dataset d = load_dataset(gw_dataset);
      WorkloadParams wp = cfg.workload;
      if (gw_train) wp.n_train = *gw_train;
      if (gw_test) wp.n_test = *gw_test;
      Rng rng(workload_seed(cfg.seed, 0));
      const Workload w = gen_workload(d, wp, rng);
      save_workload(w, gw_out);
      std::printf("wrote %zu train + %zu test queries to %s\n", w.train.size(), w.test.size(), gw_out.c_str());
    } else if (*lab) {
      const auto corpus = load_corpus(lab_corpus);
      const LatencyUnit unit = lab_unit.empty() ? cfg.unit : latency_unit_from_string(lab_unit);
      const auto pool = cfg.pool_specs();
      std::vector<std::vector<LabelRecord>> labels;
      if (!lab_workload.empty()) {
        if (corpus.size() != 1) throw Error("--workload requires a single dataset");
        const Workload w = load_workload(lab_workload);
        LabelOutcome lo = label_dataset(corpus.front(), pool, w, unit);
        if (!lo.violations.empty()) throw Error("labeling failed: " + lo.violations.front());
        labels.push_back(std::move(lo.records));
      } else {
        labels = label_corpus(corpus, pool, cfg.workload, unit, cfg.seed, jobs);
      }
      if (fs::exists(lab_out)) fs::remove(lab_out);
      for (const auto& l : labels) append_labels(lab_out, l);
      std::printf("labeled %zu datasets x %zu estimators -> %s\n", corpus.size(), pool.size(), lab_out.c_str());
    } else if (*tr) {
      const auto corpus = load_corpus(tr_corpus);
      const auto ids = cfg.pool;
      const FeatureConfig features = fit_normalization(corpus);
      const auto items = make_items(corpus, labels_for(corpus, read_labels(tr_labels)), features, ids);
      DmlConfig dml = cfg.dml;
      if (tr_epochs) dml.epochs = *tr_epochs;
      if (tr_lr) dml.lr = *tr_lr;
      const auto grid = tr_wa.empty() ? cfg.w_grid : tr_wa;
      for (double w_a : grid) {
        Bundle b{train_model(items, features, cfg.encoder, dml, w_a), ids, items};
        const fs::path out = grid.size() == 1 ? fs::path(tr_out) : fs::path(tr_out) / ("model_wa" + wa_tag(w_a) + ".json");
        if (out.has_parent_path()) fs::create_directories(out.parent_path());
        save_bundle(b, out);
        std::printf("trained w_a=%s on %zu datasets -> %s\n", wa_tag(w_a).c_str(), items.size(), out.string().c_str());
      }
    } else if (*ct) {
      Bundle b = load_bundle(ct_model);
      IncrementalConfig ic = cfg.incremental;
      if (ct_b) ic.derr_threshold = *ct_b;
      const auto samples = labeled_graphs(b.items, b.model.w_a);
      DmlConfig dml = cfg.dml;
      dml.w_a = b.model.w_a;
      const double before = collect_feedback(samples, b.model.encoder, ic).mean_d_error();
      IncrementalResult r = incremental_train(samples, b.model.encoder, ic, dml);
      const double after = collect_feedback(samples, r.encoder, ic).mean_d_error();
      b.model.encoder = std::move(r.encoder);
      save_bundle(b, ct_out);
      const std::string csv = "metric,value\nmean_cv_d_error_before," + detail::fmt(before, 6) +
                              "\nmean_cv_d_error_after," + detail::fmt(after, 6) + "\nfeedback," +
                              std::to_string(r.feedback.feedback.size()) + "\nreference," +
                              std::to_string(r.feedback.reference.size()) + "\nsynthetic," +
                              std::to_string(r.synthetic.size()) + "\n";
      if (!ct_report.empty()) detail::write_file(ct_report, csv);
      std::fputs(csv.c_str(), stdout);
    } else if (*rec) {
      const auto models = load_models(rec_model);
      const Bundle& b = pick_model(models, rec_wa);
      const Rcs rcs = b.rcs();
      const Dataset d = load_dataset(rec_dataset);
      const Recommendation r = recommend(d, rcs, b.model.encoder, rec_k.value_or(cfg.k), rec_wa);
      std::printf("chosen=%s\nscores=%s\nneighbors=", r.chosen.c_str(), join(r.averaged_scores).c_str());
      for (std::size_t i = 0; i < r.neighbor_ids.size(); ++i) std::printf("%s%s", i ? "," : "", r.neighbor_ids[i].c_str());
      std::printf("\nestimators=");
      for (std::size_t i = 0; i < b.estimator_ids.size(); ++i) std::printf("%s%s", i ? "," : "", b.estimator_ids[i].c_str());
      std::printf("\nmodel_wa=%s\n", wa_tag(b.model.w_a).c_str());
    } else if (*dc) {
      Bundle b = load_bundle(dc_model);
      Rcs rcs = b.rcs();
      const Dataset d = load_dataset(dc_dataset);
      const double threshold = drift_threshold(rcs);
      const double dist = distance_to_rcs(drift_features(d, rcs.features), rcs);
      const bool drift = dist > threshold;
      std::printf("distance=%s\nthreshold=%s\ndrift=%s\n", detail::fmt(dist, 6).c_str(), detail::fmt(threshold, 6).c_str(),
                  drift ? "true" : "false");
      if (dc_adapt && drift) {
        if (dc_out.empty()) throw Error("--adapt requires --out");
        AdaptOptions opt{cfg.workload, cfg.dml, cfg.seed, cfg.unit};
        std::vector<EstimatorSpec> pool;
        for (const auto& id : b.estimator_ids) pool.push_back(make_spec(id));
        b.model.encoder = online_adapt(d, rcs, b.model.encoder, pool, opt);
        b.items.clear();
        for (const auto& e : rcs.entries) b.items.push_back(e.item);
        save_bundle(b, dc_out);
        std::printf("adapted=%s\n", dc_out.c_str());
      }
    } else if (*ev) {
      const auto models = load_models(ev_model);
      const Bundle& any = models.begin()->second;
      const auto& ids = any.estimator_ids;
      const auto test = load_corpus(ev_corpus);
      const auto items = make_items(test, labels_for(test, read_labels(ev_labels)), any.model.features, ids);
      const auto grid = ev_wa.empty() ? cfg.w_grid : ev_wa;
      std::vector<EstimatorSpec> pool;
      for (const auto& id : ids) pool.push_back(make_spec(id));

      std::map<double, Rcs> rcs, raw;
      std::map<double, std::shared_ptr<MlpSelector>> mlp;
      for (double w : grid) {
        const Bundle& b = pick_model(models, w);
        rcs.emplace(w, b.rcs());
        raw.emplace(w, build_raw_rcs(b.items, w, ids, b.model.features));
      }
      std::vector<std::vector<LabelRecord>> sampled(test.size());
      std::vector<std::pair<std::string, Strategy>> strategies;
      for (const auto& name : ev_strategies) {
        if (name == "autoce") {
          strategies.emplace_back(name, [&](std::size_t i, double w) {
            return recommend(test[i], rcs.at(w), pick_model(models, w).model.encoder, cfg.k, w).chosen_index;
          });
        } else if (name == "rawknn") {
          strategies.emplace_back(name, [&](std::size_t i, double w) { return rawknn_select(raw.at(w), test[i], cfg.k, w).chosen_index; });
        } else if (name == "rule") {
          strategies.emplace_back(name, [&](std::size_t i, double) {
            Rng rng(derive_seed(cfg.seed ^ 0x72756c65ULL, i));
            return rule_select(test[i], pool, rng);
          });
        } else if (name == "mlp") {
          for (double w : grid) {
            const Bundle& b = pick_model(models, w);
            DmlConfig dml = cfg.dml;
            dml.w_a = w;
            auto sel = std::make_shared<MlpSelector>(GinEncoder(cfg.encoder, b.model.features.vertex_width()), ids.size(),
                                                     std::vector<std::size_t>{64, 32}, cfg.seed);
            sel->train(labeled_graphs(b.items, w), dml);
            mlp[w] = sel;
          }
          strategies.emplace_back(name, [&](std::size_t i, double w) { return mlp.at(w)->predict(items[i].graph); });
        } else if (name == "sampling") {
          parallel_for(test.size(), cfg.unit == LatencyUnit::ms ? 1u : jobs, [&](std::size_t i) {
            Rng rng(derive_seed(cfg.seed ^ 0x73616d70ULL, i));
            const Dataset s = sample_dataset(test[i], cfg.bench.sampling_rate, rng);
            const Workload w = gen_workload(s, cfg.workload, rng);
            LabelOutcome lo = label_dataset(s, pool, w, cfg.unit);
            if (!lo.violations.empty()) throw Error("sampling baseline: " + lo.violations.front());
            sampled[i] = std::move(lo.records);
          });
          strategies.emplace_back(name, [&](std::size_t i, double w) { return argmax(score_vector(align_records(sampled[i], ids), w)); });
        } else if (name == "oracle") {
          strategies.emplace_back(name, [&](std::size_t i, double w) { return argmax(items[i].scores(w)); });
        } else {
          throw Error("unknown strategy '" + name + "'");
        }
      }
      const EvalReport report = evaluate(strategies, items, grid);
      fs::create_directories(ev_out);
      detail::write_file(fs::path(ev_out) / "report.csv", report_csv(report));
      detail::write_file(fs::path(ev_out) / "report_detail.csv", report_detail_csv(report, ids));
      detail::write_file(fs::path(ev_out) / "summary.txt", report_table(report));
      write_manifest(ev_out, cfg, "evaluate");
      std::fputs(report_table(report).c_str(), stdout);
    } else if (*be) {
      const BenchResult r = run_bench(cfg, stderr);
      write_bench(r, cfg, be_out);
      std::fputs(report_table(r.report).c_str(), stdout);
      const auto& t = r.timings;
      std::printf("timings: generate %.2f s, label %.2f s, train %.2f s, inference %.4f s/dataset (sampling %.4f s/dataset)\n",
                  t.generate, t.label, t.train, t.autoce_inference, t.sampling_inference);
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& ch : msg)
      if (ch == '\n' || ch == '\r') ch = ' ';
    std::cerr << "error: " << msg << "\n";
    return 1;
  }
  return 0;
}
