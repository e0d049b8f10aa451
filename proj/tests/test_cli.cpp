#include <gtest/gtest.h>

#include <sstream>

#include "r2n2/cli.hpp"
#include "test_util.hpp"

using namespace r2n2;
using r2n2::testing::TempDir;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "r2n2");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void write_generator(const std::filesystem::path& path, Index length) {
  io::write_json(path, nlohmann::json{{"kind", "hybrid"}, {"length", length}, {"seed", 4}});
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(invoke({}).code, cli::kUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(invoke({"generate", "--spec", "x.json"}).code, cli::kUsage);
  EXPECT_EQ(invoke({"train", "--model", "arima", "--data", "a.csv", "--out", "m.json"}).code, cli::kUsage);
  EXPECT_EQ(invoke({"train", "--model", "var", "--data", "a.csv", "--out", "m.json", "--bogus"}).code, cli::kUsage);
  EXPECT_EQ(invoke({"train", "--model", "var", "--data", "a.csv", "--out", "m.json", "--k", "0"}).code, cli::kUsage);
  auto help = invoke({"--help"});
  EXPECT_EQ(help.code, cli::kOk);
  EXPECT_NE(help.out.find("evaluate"), std::string::npos);
}

TEST(Cli, DataErrors) {
  TempDir dir;
  EXPECT_EQ(invoke({"generate", "--spec", (dir / "missing.json").string(), "--out", (dir / "a.csv").string()}).code,
            cli::kFailure);
  io::write_text(dir / "bad.csv", "a,b\n1,2\n3,oops\n");
  auto r = invoke({"train", "--model", "var", "--data", (dir / "bad.csv").string(), "--out", (dir / "m.json").string()});
  EXPECT_EQ(r.code, cli::kFailure);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  io::write_text(dir / "spec.json", R"({"kind": "hybrid", "a": [[2.0]]})");
  EXPECT_EQ(invoke({"generate", "--spec", (dir / "spec.json").string(), "--out", (dir / "a.csv").string()}).code,
            cli::kFailure);
}

TEST(Cli, GenerateTrainEvaluateVar) {
  TempDir dir;
  write_generator(dir / "spec.json", 400);
  const auto csv = (dir / "series.csv").string();
  ASSERT_EQ(invoke({"generate", "--spec", (dir / "spec.json").string(), "--out", csv}).code, cli::kOk);
  auto ts = load_csv(csv);
  EXPECT_EQ(ts.length(), 400);
  EXPECT_EQ(ts.features(), 4);

  const auto model = (dir / "var.json").string();
  ASSERT_EQ(invoke({"train", "--model", "var", "--data", csv, "--out", model, "--k", "2", "--lambda", "0.05"}).code,
            cli::kOk);
  auto j = io::read_json(model);
  EXPECT_EQ(j["kind"], "var");
  EXPECT_EQ(j["k"], 2);

  // the CLI fits on the training split only
  auto seg = split(ts, {0.6, 0.2, 0.2});
  auto expected = var::fit_var(seg.train, 2, 1, 0.05);
  auto loaded = io::var_from_json(j);
  EXPECT_LT((loaded.coeffs[1] - expected.coeffs[1]).cwiseAbs().maxCoeff(), 1e-12);

  auto ev = invoke({"evaluate", "--model", model, "--data", csv});
  ASSERT_EQ(ev.code, cli::kOk) << ev.err;
  auto res = nlohmann::json::parse(ev.out);
  EXPECT_EQ(res["rows"], 400 - 2);
  EXPECT_EQ(res["first_row"], 2);
  auto fc = var::predict_var_series(expected, ts);
  EXPECT_NEAR(res["mrse"].get<double>(),
              metrics::mrse(ts.values().bottomRows(398), fc.predictions.values()), 1e-12);

  EXPECT_EQ(invoke({"evaluate", "--model", model, "--data", csv, "--horizon", "3"}).code, cli::kFailure);
}

TEST(Cli, TrainNeuralModelsAndEvaluate) {
  TempDir dir;
  write_generator(dir / "spec.json", 300);
  const auto csv = (dir / "series.csv").string();
  ASSERT_EQ(invoke({"generate", "--spec", (dir / "spec.json").string(), "--out", csv}).code, cli::kOk);
  for (const std::string kind : {"rnn", "r2n2"}) {
    const auto model = (dir / (kind + ".json")).string();
    const auto log = (dir / (kind + ".csv")).string();
    auto r = invoke({"train", "--model", kind, "--data", csv, "--out", model, "--log", log, "--hidden", "3", "--epochs",
                  "2", "--seq-len", "30", "--seed", "5"});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    auto j = io::read_json(model);
    EXPECT_EQ(j["kind"], kind);
    EXPECT_TRUE(j.contains("normalizer"));
    std::ifstream in(log);
    std::string header;
    std::getline(in, header);
    EXPECT_NE(header.find("epoch"), std::string::npos);
    auto ev = invoke({"evaluate", "--model", model, "--data", csv, "--horizon", "1"});
    ASSERT_EQ(ev.code, cli::kOk) << ev.err;
    auto res = nlohmann::json::parse(ev.out);
    EXPECT_EQ(res["model"], kind);
    EXPECT_TRUE(std::isfinite(res["mrse"].get<double>()));
    EXPECT_LT(res["mrse"].get<double>(), 5.0);
  }
}

TEST(Cli, CompareWritesReportAndCurves) {
  TempDir dir;
  io::write_json(dir / "cfg.json", nlohmann::json::parse(R"({
    "data": {"generator": {"length": 500, "seed": 2}},
    "var": {"k_max": 2},
    "models": ["var1", "best_var", "r2n2"],
    "r2n2": {"hidden_sizes": [3], "train": {"max_epochs": 2}},
    "sequence_length": 40,
    "seeds": [1]
  })"));
  const auto out_dir = dir / "out";
  auto r = invoke({"compare", "--config", (dir / "cfg.json").string(), "--out", out_dir.string(), "--no-wall-clock"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("r2n2-3"), std::string::npos);
  auto report = io::read_json(out_dir / "report.json");
  EXPECT_EQ(report["kind"], "compare");
  EXPECT_EQ(report["cells"].size(), 3u);
  EXPECT_FALSE(report["cells"][0].contains("train_seconds"));
  EXPECT_TRUE(std::filesystem::exists(out_dir / "curves.csv"));

  EXPECT_EQ(invoke({"timing", "--config", (dir / "cfg.json").string(), "--out", out_dir.string()}).code, cli::kFailure);
  io::write_text(dir / "broken.json", "{");
  EXPECT_EQ(invoke({"sweep", "--config", (dir / "broken.json").string(), "--out", out_dir.string()}).code, cli::kFailure);
}
