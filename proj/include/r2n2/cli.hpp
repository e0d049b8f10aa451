#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "r2n2/baseline.hpp"
#include "r2n2/experiment.hpp"
#include "r2n2/experiment_io.hpp"
#include "r2n2/hybrid.hpp"
#include "r2n2/serialization.hpp"
#include "r2n2/timeseries.hpp"
#include "r2n2/var.hpp"

// Command-line front end. Exit codes: 0 success, 1 usage error, 2 data or
// model error.
namespace r2n2::cli {

inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kFailure = 2;

namespace detail {

using io::Json;

inline Json normalizer_to_json(const Normalizer& n) {
  return Json{{"means", io::vector_to_json(n.means.transpose())}, {"stds", io::vector_to_json(n.stds.transpose())}};
}

inline Normalizer normalizer_from_json(const Json& j, Index p) {
  Normalizer n;
  n.means = io::vector_from_json(j.at("means"), p, "normalizer means").transpose();
  n.stds = io::vector_from_json(j.at("stds"), p, "normalizer stds").transpose();
  if (!(n.stds.array() > 0.0).all()) throw DataError("normalizer stds must be positive");
  return n;
}

inline SplitSpec parse_split(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DataError("--split expects three comma-separated fractions, got '" + text + "'");
    }
  }
  if (parts.size() != 3) throw DataError("--split expects three comma-separated fractions, got '" + text + "'");
  SplitSpec s{parts[0], parts[1], parts[2]};
  s.validate();
  return s;
}

struct TrainArgs {
  std::string model;
  std::string data;
  std::string out;
  std::string log;
  Index k = 1;
  double lambda = 0.5;
  Index horizon = 1;
  Index hidden = 16;
  Index epochs = 100;
  double lr = 1e-2;
  std::optional<double> min_lr;
  Index patience = 3;
  std::uint64_t seed = 0;
  Index seq_len = 100;
  double l2 = 0.0;
  bool no_augment = false;
  bool zero_init = false;
  std::string split = "0.6,0.2,0.2";
};

struct ExperimentArgs {
  std::string config;
  std::string out;
  std::optional<Index> threads;
  bool no_wall_clock = false;
};

// Neural models see z-scored data; the normalizer is stored with the model.
inline int run_train(const TrainArgs& a, std::ostream& out) {
  auto raw = load_csv(a.data);
  auto seg = split(raw, parse_split(a.split));
  Json model;
  lstm::TrainLog log;

  if (a.model == "var") {
    auto m = var::fit_var(seg.train, a.k, a.horizon, a.lambda);
    model = io::to_json(m);
    model["kind"] = "var";
  } else {
    lstm::TrainConfig tc;
    tc.initial_lr = a.lr;
    tc.min_lr = a.min_lr;
    tc.plateau_patience = a.patience;
    tc.max_epochs = a.epochs;
    tc.l2_recurrent = a.l2;
    tc.seed = a.seed;
    tc.validate();

    const auto norm = zscore_fit(seg.train);
    const auto train = zscore_apply(norm, seg.train);
    const auto val = zscore_apply(norm, seg.val);
    const auto test = zscore_apply(norm, seg.test);
    auto original_mrse = [&](const TimeSeries& pred) {
      const auto p = zscore_invert(norm, pred);
      const auto truth = raw.slice(p.origin(), p.length());
      return metrics::mrse(truth.values(), p.values());
    };

    if (a.model == "rnn") {
      auto probe = [&](const baseline::RnnForecaster& m) {
        return original_mrse(baseline::predict_rnn_series(m, test).predictions);
      };
      auto res = baseline::train_rnn(train, val, a.horizon, a.hidden, a.seq_len, tc, probe);
      model = io::to_json(res.model);
      log = std::move(res.log);
    } else {
      hybrid::R2n2Config rc;
      rc.horizon = a.horizon;
      rc.augment_with_input = !a.no_augment;
      rc.base_k = a.k;
      rc.base_lambda = a.lambda;
      rc.hidden_dim = a.hidden;
      rc.sequence_length = a.seq_len;
      rc.zero_init_projection = a.zero_init;
      rc.train = tc;
      auto score = [&](const TimeSeries&, const TimeSeries& pred) { return original_mrse(pred); };
      auto res = hybrid::train_r2n2(train, val, test, rc, score);
      model = io::to_json(res.model);
      model["kind"] = "r2n2";
      log = std::move(res.log);
    }
    model["normalizer"] = normalizer_to_json(norm);
  }

  io::write_json(a.out, model);
  if (!a.log.empty()) io::write_text(a.log, lstm::train_log_csv(log));
  out << "wrote " << a.out << '\n';
  return kOk;
}

inline std::string model_kind(const Json& j) {
  if (j.contains("kind")) return j["kind"].get<std::string>();
  if (j.contains("coeffs")) return "var";
  if (j.contains("base") && j.contains("rnn")) return "r2n2";
  throw DataError("cannot tell which kind of model this file holds");
}

inline int run_evaluate(const std::string& model_path, const std::string& data_path, std::optional<Index> horizon,
                        std::ostream& out) {
  const auto j = io::read_json(model_path);
  const auto kind = model_kind(j);
  const auto raw = load_csv(data_path);
  Index h = 0;
  std::optional<Normalizer> norm;
  TimeSeries pred = raw;

  auto apply = [&](const TimeSeries& ts) { return norm ? zscore_apply(*norm, ts) : ts; };
  if (kind == "var") {
    auto m = io::var_from_json(j);
    h = m.h;
    if (raw.features() != m.features()) throw DataError("data feature count does not match the model");
    pred = var::predict_var_series(m, raw).predictions;
  } else if (kind == "rnn") {
    auto m = io::rnn_forecaster_from_json(j);
    h = m.horizon;
    if (raw.features() != m.features()) throw DataError("data feature count does not match the model");
    if (j.contains("normalizer")) norm = normalizer_from_json(j["normalizer"], m.features());
    pred = baseline::predict_rnn_series(m, apply(raw)).predictions;
  } else if (kind == "r2n2") {
    auto m = io::r2n2_from_json(j);
    h = m.config.horizon;
    if (raw.features() != m.features()) throw DataError("data feature count does not match the model");
    if (j.contains("normalizer")) norm = normalizer_from_json(j["normalizer"], m.features());
    pred = hybrid::predict_r2n2_series(m, apply(raw)).combined;
  } else {
    throw DataError("unknown model kind '" + kind + "'");
  }
  if (horizon && *horizon != h) {
    throw DataError("model forecasts " + std::to_string(h) + " steps ahead, not " + std::to_string(*horizon));
  }
  if (norm) pred = zscore_invert(*norm, pred);
  const auto truth = raw.slice(pred.origin() - raw.origin(), pred.length());
  Json result{{"model", kind},
              {"horizon", h},
              {"first_row", pred.origin() - raw.origin()},
              {"rows", pred.length()},
              {"mrse", metrics::mrse(truth.values(), pred.values())},
              {"re", metrics::re(truth.values(), pred.values())}};
  out << result.dump(2) << '\n';
  return kOk;
}

inline int run_generate(const std::string& spec_path, const std::string& out_path, std::ostream& out) {
  const auto spec = io::generator_from_json(io::read_json(spec_path));
  save_csv(spec.generate(), out_path);
  out << "wrote " << out_path << '\n';
  return kOk;
}

inline int run_experiment(const std::string& which, const ExperimentArgs& a, std::ostream& out) {
  auto cfg = io::experiment_from_json(io::read_json(a.config));
  if (a.threads) cfg.threads = *a.threads;
  harness::EvalReport report;
  if (which == "compare") {
    report = harness::run_comparison(cfg);
  } else if (which == "sweep") {
    report = harness::run_hidden_sweep(cfg);
  } else {
    report = harness::run_timing(cfg);
  }
  const std::filesystem::path dir(a.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  io::write_json(dir / "report.json", io::to_json(report, !a.no_wall_clock));
  io::write_text(dir / "curves.csv", harness::curves_csv(report, !a.no_wall_clock));
  for (const auto& agg : report.aggregates) {
    out << agg.model;
    if (agg.hidden > 0) out << '-' << agg.hidden;
    out << "  mrse " << r2n2::detail::format_double(agg.mrse_mean) << " +- "
        << r2n2::detail::format_double(agg.mrse_std) << "  (n=" << agg.n << ")\n";
  }
  out << "wrote " << (dir / "report.json").string() << '\n';
  return kOk;
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Residual recurrent forecasting: VAR, LSTM and R2N2 models", "r2n2"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Write a synthetic CSV from a generator spec");
  std::string spec_path, gen_out;
  gen->add_option("--spec", spec_path, "Generator spec JSON")->required();
  gen->add_option("--out", gen_out, "Output CSV")->required();

  detail::TrainArgs ta;
  auto* train = app.add_subcommand("train", "Fit one model on the training split");
  train->add_option("--model", ta.model, "var, rnn or r2n2")->required()->check(CLI::IsMember({"var", "rnn", "r2n2"}));
  train->add_option("--data", ta.data, "Input CSV")->required();
  train->add_option("--out", ta.out, "Model JSON to write")->required();
  train->add_option("--log", ta.log, "Training log CSV (rnn, r2n2)");
  train->add_option("--k", ta.k, "VAR lag order (base model for r2n2)")->check(CLI::PositiveNumber);
  train->add_option("--lambda", ta.lambda, "VAR ridge coefficient")->check(CLI::NonNegativeNumber);
  train->add_option("--horizon", ta.horizon, "Steps ahead")->check(CLI::PositiveNumber);
  train->add_option("--hidden", ta.hidden, "LSTM hidden size")->check(CLI::PositiveNumber);
  train->add_option("--epochs", ta.epochs, "Maximum epochs")->check(CLI::NonNegativeNumber);
  train->add_option("--lr", ta.lr, "Initial learning rate")->check(CLI::PositiveNumber);
  train->add_option("--min-lr", ta.min_lr, "Stop once the rate falls below this");
  train->add_option("--patience", ta.patience, "Epochs without improvement before decaying")->check(CLI::PositiveNumber);
  train->add_option("--seed", ta.seed, "Initialization and shuffle seed");
  train->add_option("--seq-len", ta.seq_len, "Training sequence length")->check(CLI::NonNegativeNumber);
  train->add_option("--l2", ta.l2, "L2 penalty on recurrent weights")->check(CLI::NonNegativeNumber);
  train->add_flag("--no-augment", ta.no_augment, "R2N2: feed residuals only, without the raw series");
  train->add_flag("--zero-init", ta.zero_init, "R2N2: start with a zero output projection");
  train->add_option("--split", ta.split, "train,val,test fractions");

  auto* eval = app.add_subcommand("evaluate", "Score a model JSON on a CSV");
  std::string eval_model, eval_data;
  std::optional<Index> eval_h;
  eval->add_option("--model", eval_model, "Model JSON")->required();
  eval->add_option("--data", eval_data, "Input CSV")->required();
  eval->add_option("--horizon", eval_h, "Expected horizon; must match the model")->check(CLI::PositiveNumber);

  detail::ExperimentArgs ea;
  std::vector<CLI::App*> experiments;
  for (const auto& [name, help] : {std::pair{"compare", "VAR-1, best VAR, RNN-only and R2N2 on one dataset"},
                                   std::pair{"sweep", "RNN-only and R2N2 across hidden sizes"},
                                   std::pair{"timing", "Per-epoch learning curves at matched hidden sizes"}}) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", ea.config, "Experiment config JSON")->required();
    sub->add_option("--out", ea.out, "Output directory")->required();
    sub->add_option("--threads", ea.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--no-wall-clock", ea.no_wall_clock, "Omit timing fields from the outputs");
    experiments.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == static_cast<int>(CLI::ExitCodes::Success) ? kOk : kUsage;
  }

  try {
    if (*gen) return detail::run_generate(spec_path, gen_out, out);
    if (*train) return detail::run_train(ta, out);
    if (*eval) return detail::run_evaluate(eval_model, eval_data, eval_h, out);
    for (auto* sub : experiments)
      if (*sub) return detail::run_experiment(sub->get_name(), ea, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  err << app.help();
  return kUsage;
}

}  // namespace r2n2::cli
