#include "helpers.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "autoce/pipeline.hpp"

using namespace autoce;
using namespace autoce::test;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(const TempDir& dir, const std::string& args) {
  const auto out = dir.path / "stdout.txt", err = dir.path / "stderr.txt";
  const std::string cmd = std::string(AUTOCE_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, detail::read_file(out), detail::read_file(err)};
}

void write_config(const TempDir& dir) {
  RunConfig c;
  c.jobs = 1;
  for (auto& r : c.regimes) r.gen.rows_range = {100, 200};
  c.workload = {30, 15, 0.5};
  c.dml.epochs = 5;
  c.encoder = EncoderConfig{2, 8, 4, 0};
  c.incremental.extra_epochs = 2;
  std::ofstream(dir.path / "cfg.json") << to_json(c).dump(1);
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  TempDir dir("cli_usage");
  EXPECT_EQ(cli(dir, "").code, 2);
  const CliRun r = cli(dir, "frobnicate");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(cli(dir, "train --wa 1.0").code, 2);
  EXPECT_EQ(cli(dir, "--help").code, 0);
}

TEST(Cli, RuntimeErrorIsOneLine) {
  TempDir dir("cli_err");
  std::filesystem::create_directories(dir.path / "nothing");
  const CliRun r = cli(dir, "label --corpus " + (dir.path / "nothing").string() + " --out " + (dir.path / "l.jsonl").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, EndToEnd) {
  TempDir dir("cli_e2e");
  write_config(dir);
  const std::string cfg = "--config " + (dir.path / "cfg.json").string() + " ";
  const auto p = [&](const char* name) { return (dir.path / name).string(); };

  ASSERT_EQ(cli(dir, cfg + "gen-data --out " + p("corpus") + " --n 8").code, 0);
  EXPECT_TRUE(std::filesystem::exists(dir.path / "corpus" / "run_manifest.json"));
  ASSERT_EQ(cli(dir, cfg + "gen-data --out " + p("test") + " --n 3 --prefix t --seed 5").code, 0);
  ASSERT_EQ(cli(dir, cfg + "gen-workload --dataset " + p("corpus/d00000") + " --out " + p("w.jsonl")).code, 0);
  ASSERT_EQ(cli(dir, cfg + "label --corpus " + p("corpus") + " --out " + p("labels.jsonl")).code, 0);
  EXPECT_EQ(read_labels(dir.path / "labels.jsonl").size(), 8u * 5u);
  ASSERT_EQ(cli(dir, cfg + "label --corpus " + p("test") + " --out " + p("test_labels.jsonl") + " --seed 5").code, 0);

  ASSERT_EQ(cli(dir, cfg + "train --corpus " + p("corpus") + " --labels " + p("labels.jsonl") + " --wa 1.0 --out " + p("m1.json")).code, 0);
  ASSERT_EQ(cli(dir, cfg + "train --corpus " + p("corpus") + " --labels " + p("labels.jsonl") + " --wa 1.0 --out " + p("m2.json")).code, 0);
  EXPECT_EQ(detail::read_file(dir.path / "m1.json"), detail::read_file(dir.path / "m2.json"));
  ASSERT_EQ(cli(dir, cfg + "train --corpus " + p("corpus") + " --labels " + p("labels.jsonl") + " --wa 1.0 0.5 --out " + p("grid")).code, 0);
  EXPECT_TRUE(std::filesystem::exists(dir.path / "grid" / "model_wa0.50.json"));

  const CliRun rec = cli(dir, cfg + "recommend --model " + p("grid") + " --dataset " + p("test/t00001") + " --wa 0.9 --k 2");
  ASSERT_EQ(rec.code, 0) << rec.err;
  EXPECT_EQ(rec.out.rfind("chosen=", 0), 0u);
  EXPECT_NE(rec.out.find("scores="), std::string::npos);
  EXPECT_NE(rec.out.find("model_wa=1.00"), std::string::npos);

  const CliRun self = cli(dir, cfg + "drift-check --model " + p("m1.json") + " --dataset " + p("corpus/d00003"));
  ASSERT_EQ(self.code, 0) << self.err;
  EXPECT_NE(self.out.find("distance=0.000000"), std::string::npos);
  EXPECT_NE(self.out.find("drift=false"), std::string::npos);

  const CliRun ct = cli(dir, cfg + "cross-train --model " + p("m1.json") + " --out " + p("m3.json") + " --report " + p("ct.csv"));
  ASSERT_EQ(ct.code, 0) << ct.err;
  EXPECT_NE(detail::read_file(dir.path / "ct.csv").find("mean_cv_d_error_after"), std::string::npos);

  const CliRun ev = cli(dir, cfg + "evaluate --model " + p("grid") + " --corpus " + p("test") + " --labels " +
                              p("test_labels.jsonl") + " --wa 1.0 0.5 --out " + p("eval"));
  ASSERT_EQ(ev.code, 0) << ev.err;
  const std::string csv = detail::read_file(dir.path / "eval" / "report.csv");
  EXPECT_NE(csv.find("oracle,0.50,3,0.000000"), std::string::npos);
  EXPECT_NE(csv.find("autoce,1.00,3,"), std::string::npos);
}
