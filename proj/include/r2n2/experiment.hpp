#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "r2n2/baseline.hpp"
#include "r2n2/hybrid.hpp"
#include "r2n2/metrics.hpp"
#include "r2n2/synthetic.hpp"
#include "r2n2/timeseries.hpp"
#include "r2n2/var.hpp"

namespace r2n2::harness {

inline constexpr const char* kVar1 = "var1";
inline constexpr const char* kBestVar = "best_var";
inline constexpr const char* kRnn = "rnn";
inline constexpr const char* kR2n2 = "r2n2";

struct DataSource {
  std::optional<std::filesystem::path> csv;
  std::optional<synthetic::HybridProcessSpec> generator;

  TimeSeries load() const {
    if (csv) return load_csv(*csv);
    if (generator) return synthetic::gen_hybrid_data(*generator);
    throw DataError("experiment has no data source");
  }
};

struct VarSearchSettings {
  Index k_max = 8;
  std::vector<double> lambda_grid = var::default_lambda_grid();
};

struct RnnSettings {
  std::vector<Index> hidden_sizes{16};
  lstm::TrainConfig train;
};

struct R2n2Settings {
  std::vector<Index> hidden_sizes{16};
  bool augment_with_input = true;
  Index base_k = 1;
  std::optional<double> base_lambda;  // absent: best k=1 lambda from the order search
  bool zero_init_projection = false;
  lstm::TrainConfig train;
};

struct ExperimentConfig {
  DataSource data;
  SplitSpec split;
  Index horizon = 1;
  Index deseasonalize_period = 0;  // 0 disables
  std::vector<std::string> models{kVar1, kBestVar, kRnn, kR2n2};
  VarSearchSettings var;
  RnnSettings rnn;
  R2n2Settings r2n2;
  Index sequence_length = 100;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  Index threads = 1;

  bool has_model(const std::string& m) const { return std::find(models.begin(), models.end(), m) != models.end(); }

  void validate() const {
    if (models.empty()) throw DataError("experiment lists no models");
    for (const auto& m : models) {
      if (m != kVar1 && m != kBestVar && m != kRnn && m != kR2n2) throw DataError("unknown model '" + m + "'");
    }
    if (seeds.empty()) throw DataError("experiment lists no seeds");
    if (horizon < 1) throw DataError("horizon must be >= 1");
    if (deseasonalize_period < 0) throw DataError("deseasonalize period must be >= 0");
    if (has_model(kRnn) && rnn.hidden_sizes.empty()) throw DataError("rnn model listed without hidden sizes");
    if (has_model(kR2n2) && r2n2.hidden_sizes.empty()) throw DataError("r2n2 model listed without hidden sizes");
    for (auto n : rnn.hidden_sizes)
      if (n < 1) throw DataError("hidden sizes must be positive");
    for (auto n : r2n2.hidden_sizes)
      if (n < 1) throw DataError("hidden sizes must be positive");
    split.validate();
    rnn.train.validate();
    r2n2.train.validate();
  }
};

/// Hybrid process defaults used by the desk-scale benchmark.
inline synthetic::HybridProcessSpec benchmark_process(double amplitude = 0.5, double noise_std = 0.1,
                                                      std::uint64_t seed = 7) {
  synthetic::HybridProcessSpec spec;
  spec.a = synthetic::benchmark_coefficients();
  spec.amplitude = amplitude;
  spec.lag = 1;
  spec.noise = synthetic::NoiseSpec{{noise_std}, seed};
  spec.length = 6000;
  spec.burn_in = 100;
  return spec;
}

inline lstm::TrainConfig benchmark_train_config() {
  lstm::TrainConfig c;
  c.initial_lr = 1e-2;
  c.lr_decay_factor = 10.0;
  c.plateau_patience = 3;
  c.min_lr = 1e-5;
  c.max_epochs = 40;
  c.l2_recurrent = 0.0;
  return c;
}

/// p=4, T=6000, 60/20/20 split, h=1, hidden sizes {8,16,32}, five seeds.
inline ExperimentConfig default_benchmark(double amplitude = 0.5, double noise_std = 0.1) {
  ExperimentConfig cfg;
  cfg.data.generator = benchmark_process(amplitude, noise_std);
  cfg.rnn.hidden_sizes = {8, 16, 32};
  cfg.r2n2.hidden_sizes = {8, 16, 32};
  cfg.rnn.train = benchmark_train_config();
  cfg.r2n2.train = benchmark_train_config();
  cfg.r2n2.zero_init_projection = true;
  return cfg;
}

// ---------------------------------------------------------------------------
// Preprocessing: optional seasonal-mean removal, then z-scoring, both fit on
// the training segment.

struct Preprocessor {
  std::optional<SeasonalMeans> seasonal;
  Normalizer norm;

  static Preprocessor fit(const TimeSeries& train, Index period) {
    Preprocessor p;
    TimeSeries base = train;
    if (period > 0) {
      p.seasonal = deseasonalize_fit(train, period);
      base = deseasonalize_apply(*p.seasonal, train);
    }
    p.norm = zscore_fit(base);
    return p;
  }

  TimeSeries apply(const TimeSeries& ts) const {
    return zscore_apply(norm, seasonal ? deseasonalize_apply(*seasonal, ts) : ts);
  }

  TimeSeries invert(const TimeSeries& ts) const {
    auto out = zscore_invert(norm, ts);
    return seasonal ? deseasonalize_invert(*seasonal, out) : out;
  }
};

// ---------------------------------------------------------------------------
// Report

struct CurvePoint {
  Index epoch = 0;
  double wall_seconds = 0.0;
  double test_mrse = 0.0;
};

struct EvalCell {
  std::string model;
  Index hidden = 0;  // 0 for VAR models
  std::uint64_t seed = 0;
  double mrse = std::numeric_limits<double>::quiet_NaN();
  double re = std::numeric_limits<double>::quiet_NaN();
  double train_seconds = 0.0;
  double var_fit_seconds = 0.0;
  Index epochs_to_best = 0;
  Index epochs_run = 0;
  Index k = 0;
  double lambda = 0.0;
  std::optional<std::string> error;
  std::vector<CurvePoint> curve;

  bool ok() const { return !error.has_value(); }
};

struct Aggregate {
  std::string model;
  Index hidden = 0;
  Index n = 0;  // successful cells
  double mrse_mean = std::numeric_limits<double>::quiet_NaN();
  double mrse_std = std::numeric_limits<double>::quiet_NaN();
  double re_mean = std::numeric_limits<double>::quiet_NaN();
  double re_std = std::numeric_limits<double>::quiet_NaN();
};

struct TimingSummary {
  Index hidden = 0;
  std::string model;
  std::vector<double> epoch1_mrse;
  std::vector<double> final_mrse;
  std::vector<Index> epochs_to_within_5pct;
  double mean_epochs_to_within_5pct = 0.0;
};

struct EvalReport {
  std::string kind;
  Index eval_first_test_row = 0;
  Index eval_rows = 0;
  std::optional<var::OrderSearchResult> order_search;
  std::vector<EvalCell> cells;
  std::vector<Aggregate> aggregates;
  std::vector<TimingSummary> timing;

  const Aggregate* find(const std::string& model, Index hidden = 0) const {
    for (const auto& a : aggregates)
      if (a.model == model && a.hidden == hidden) return &a;
    return nullptr;
  }
};

/// Population mean and std of a set of values.
inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

/// One aggregate per (model, hidden), in order of first appearance.
inline std::vector<Aggregate> aggregate(const std::vector<EvalCell>& cells) {
  std::vector<std::pair<std::string, Index>> keys;
  for (const auto& c : cells) {
    auto key = std::make_pair(c.model, c.hidden);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  std::vector<Aggregate> out;
  for (const auto& [model, hidden] : keys) {
    std::vector<double> m, r;
    for (const auto& c : cells) {
      if (c.model == model && c.hidden == hidden && c.ok()) {
        m.push_back(c.mrse);
        r.push_back(c.re);
      }
    }
    Aggregate a;
    a.model = model;
    a.hidden = hidden;
    a.n = static_cast<Index>(m.size());
    std::tie(a.mrse_mean, a.mrse_std) = mean_std(m);
    std::tie(a.re_mean, a.re_std) = mean_std(r);
    out.push_back(a);
  }
  return out;
}

/// First epoch whose test MRSE is within `tolerance` (relative) of the last
/// epoch's; 0 for an empty curve.
inline Index epochs_to_within(const std::vector<CurvePoint>& curve, double tolerance = 0.05) {
  if (curve.empty()) return 0;
  const double target = curve.back().test_mrse * (1.0 + tolerance);
  for (const auto& pt : curve)
    if (pt.test_mrse <= target) return pt.epoch;
  return curve.back().epoch;
}

// ---------------------------------------------------------------------------
// Running

namespace detail {

struct Prepared {
  TimeSeries raw_test;
  TimeSeries train, val, test;  // transformed
  Preprocessor pre;
};

inline Prepared prepare(const ExperimentConfig& cfg) {
  auto raw = cfg.data.load();
  auto seg = split(raw, cfg.split);
  auto pre = Preprocessor::fit(seg.train, cfg.deseasonalize_period);
  return Prepared{seg.test, pre.apply(seg.train), pre.apply(seg.val), pre.apply(seg.test), std::move(pre)};
}

// Scores transformed-scale predictions of test rows on the original scale,
// restricted to the shared evaluation window.
struct WindowScorer {
  const Prepared* data = nullptr;
  Index first_row = 0;  // relative to the test segment

  std::pair<double, double> operator()(const TimeSeries& pred) const {
    const auto first_abs = data->raw_test.origin() + first_row;
    const auto skip = first_abs - pred.origin();
    const auto rows = pred.length() - skip;
    if (skip < 0 || rows < 1) throw DataError("predictions do not cover the evaluation window");
    const auto p = data->pre.invert(pred.slice(skip, rows));
    const auto truth = data->raw_test.slice(first_row, rows);
    return {metrics::mrse(truth.values(), p.values()), metrics::re(truth.values(), p.values())};
  }
};

inline std::vector<CurvePoint> curve_from(const lstm::TrainLog& log) {
  std::vector<CurvePoint> out;
  for (const auto& e : log) out.push_back(CurvePoint{e.epoch, e.wall_seconds, e.test_loss});
  return out;
}

inline void run_parallel(std::vector<std::function<void()>>& jobs, Index threads) {
  if (threads <= 1 || jobs.size() <= 1) {
    for (auto& j : jobs) j();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), jobs.size());
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (auto i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) jobs[i]();
    });
  }
  for (auto& t : pool) t.join();
}

inline std::vector<Index> intersect(const std::vector<Index>& a, const std::vector<Index>& b) {
  std::vector<Index> out;
  for (auto x : a)
    if (std::find(b.begin(), b.end(), x) != b.end()) out.push_back(x);
  return out;
}

struct Plan {
  bool var1 = false;
  bool best_var = false;
  std::vector<Index> rnn_hidden;
  std::vector<Index> r2n2_hidden;
};

inline EvalReport run(const ExperimentConfig& cfg, const Plan& plan, std::string kind) {
  cfg.validate();
  const auto data = prepare(cfg);
  const auto h = cfg.horizon;

  EvalReport report;
  report.kind = std::move(kind);
  report.order_search = var::select_order(data.train, data.val, h, cfg.var.k_max, cfg.var.lambda_grid);
  const auto& search = *report.order_search;

  double var1_lambda = cfg.var.lambda_grid.front();
  double var1_best = std::numeric_limits<double>::infinity();
  for (const auto& e : search.table) {
    if (e.k == 1 && e.val_mrse && *e.val_mrse < var1_best) {
      var1_best = *e.val_mrse;
      var1_lambda = e.lambda;
    }
  }
  const double base_lambda = cfg.r2n2.base_lambda.value_or(var1_lambda);

  // shared window: rows every model can forecast from within the test segment
  Index first = 0;
  if (plan.var1) first = std::max(first, h);
  if (plan.best_var) first = std::max(first, search.best_k - 1 + h);
  if (!plan.rnn_hidden.empty()) first = std::max(first, h);
  if (!plan.r2n2_hidden.empty()) first = std::max(first, cfg.r2n2.base_k - 1 + 2 * h);
  if (first >= data.test.length()) throw DataError("test segment too short for the configured models");
  report.eval_first_test_row = first;
  report.eval_rows = data.test.length() - first;
  const WindowScorer scorer{&data, first};

  auto var_cell = [&](const std::string& name, Index k, double lambda) {
    EvalCell proto;
    proto.model = name;
    proto.k = k;
    proto.lambda = lambda;
    try {
      using Clock = std::chrono::steady_clock;
      const auto t0 = Clock::now();
      auto model = var::fit_var(data.train, k, h, lambda);
      proto.var_fit_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      proto.train_seconds = proto.var_fit_seconds;
      std::tie(proto.mrse, proto.re) = scorer(var::predict_var_series(model, data.test).predictions);
    } catch (const Error& e) {
      proto.error = e.what();
    }
    for (auto seed : cfg.seeds) {
      auto c = proto;
      c.seed = seed;
      report.cells.push_back(std::move(c));
    }
  };
  if (plan.var1) var_cell(kVar1, 1, var1_lambda);
  if (plan.best_var) var_cell(kBestVar, search.best_k, search.best_lambda);

  // neural cells: fixed slots so parallel execution cannot reorder the report
  const auto first_neural = report.cells.size();
  std::vector<std::function<void()>> jobs;
  for (auto hidden : plan.rnn_hidden) {
    for (auto seed : cfg.seeds) {
      report.cells.push_back(EvalCell{kRnn, hidden, seed});
    }
  }
  for (auto hidden : plan.r2n2_hidden) {
    for (auto seed : cfg.seeds) {
      EvalCell c{kR2n2, hidden, seed};
      c.k = cfg.r2n2.base_k;
      c.lambda = base_lambda;
      report.cells.push_back(std::move(c));
    }
  }
  for (auto i = first_neural; i < report.cells.size(); ++i) {
    jobs.emplace_back([&, i] {
      auto& cell = report.cells[i];
      try {
        if (cell.model == kRnn) {
          auto tc = cfg.rnn.train;
          tc.seed = cell.seed;
          auto probe = [&](const baseline::RnnForecaster& m) {
            return scorer(baseline::predict_rnn_series(m, data.test).predictions).first;
          };
          auto res = baseline::train_rnn(data.train, data.val, h, cell.hidden, cfg.sequence_length, tc, probe);
          std::tie(cell.mrse, cell.re) = scorer(baseline::predict_rnn_series(res.model, data.test).predictions);
          cell.epochs_to_best = res.best_epoch;
          cell.epochs_run = static_cast<Index>(res.log.size());
          cell.train_seconds = res.log.empty() ? 0.0 : res.log.back().wall_seconds;
          cell.curve = curve_from(res.log);
        } else {
          hybrid::R2n2Config rc;
          rc.horizon = h;
          rc.augment_with_input = cfg.r2n2.augment_with_input;
          rc.base_k = cfg.r2n2.base_k;
          rc.base_lambda = base_lambda;
          rc.hidden_dim = cell.hidden;
          rc.sequence_length = cfg.sequence_length;
          rc.zero_init_projection = cfg.r2n2.zero_init_projection;
          rc.train = cfg.r2n2.train;
          rc.train.seed = cell.seed;
          auto score = [&](const TimeSeries&, const TimeSeries& pred) { return scorer(pred).first; };
          auto res = hybrid::train_r2n2(data.train, data.val, data.test, rc, score);
          std::tie(cell.mrse, cell.re) = scorer(hybrid::predict_r2n2_series(res.model, data.test).combined);
          cell.epochs_to_best = res.best_epoch;
          cell.epochs_run = static_cast<Index>(res.log.size());
          cell.var_fit_seconds = res.var_fit_seconds;
          cell.train_seconds = res.log.empty() ? 0.0 : res.log.back().wall_seconds;
          cell.curve = curve_from(res.log);
        }
      } catch (const Error& e) {
        cell.error = e.what();
      }
    });
  }
  run_parallel(jobs, cfg.threads);

  report.aggregates = aggregate(report.cells);
  return report;
}

inline TimingSummary summarize_timing(const EvalReport& report, const std::string& model, Index hidden) {
  TimingSummary s;
  s.model = model;
  s.hidden = hidden;
  double sum = 0.0;
  for (const auto& c : report.cells) {
    if (c.model != model || c.hidden != hidden || !c.ok() || c.curve.empty()) continue;
    s.epoch1_mrse.push_back(c.curve.front().test_mrse);
    s.final_mrse.push_back(c.curve.back().test_mrse);
    s.epochs_to_within_5pct.push_back(epochs_to_within(c.curve, 0.05));
    sum += static_cast<double>(s.epochs_to_within_5pct.back());
  }
  s.mean_epochs_to_within_5pct =
      s.epochs_to_within_5pct.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : sum / static_cast<double>(s.epochs_to_within_5pct.size());
  return s;
}

}  // namespace detail

/// VAR-1, best-VAR, RNN-only and R2N2 (each at every configured hidden size),
/// as listed in cfg.models, evaluated on the test segment.
inline EvalReport run_comparison(const ExperimentConfig& cfg) {
  detail::Plan plan;
  plan.var1 = cfg.has_model(kVar1);
  plan.best_var = cfg.has_model(kBestVar);
  if (cfg.has_model(kRnn)) plan.rnn_hidden = cfg.rnn.hidden_sizes;
  if (cfg.has_model(kR2n2)) plan.r2n2_hidden = cfg.r2n2.hidden_sizes;
  return detail::run(cfg, plan, "compare");
}

/// RNN-only vs R2N2 across each family's hidden-size grid.
inline EvalReport run_hidden_sweep(const ExperimentConfig& cfg) {
  detail::Plan plan;
  plan.rnn_hidden = cfg.rnn.hidden_sizes;
  plan.r2n2_hidden = cfg.r2n2.hidden_sizes;
  if (plan.rnn_hidden.empty() || plan.r2n2_hidden.empty()) throw DataError("sweep needs hidden sizes for both families");
  return detail::run(cfg, plan, "sweep");
}

/// RNN-only vs R2N2 at the hidden sizes both families list, with per-epoch
/// test MRSE curves.
inline EvalReport run_timing(const ExperimentConfig& cfg) {
  detail::Plan plan;
  plan.rnn_hidden = detail::intersect(cfg.rnn.hidden_sizes, cfg.r2n2.hidden_sizes);
  plan.r2n2_hidden = plan.rnn_hidden;
  if (plan.rnn_hidden.empty()) throw DataError("timing needs at least one hidden size shared by both families");
  auto report = detail::run(cfg, plan, "timing");
  for (auto hidden : plan.rnn_hidden) {
    report.timing.push_back(detail::summarize_timing(report, kRnn, hidden));
    report.timing.push_back(detail::summarize_timing(report, kR2n2, hidden));
  }
  return report;
}

/// model,hidden,seed,epoch,wall_seconds,test_mrse
inline std::string curves_csv(const EvalReport& report, bool include_wall_clock = true) {
  std::string out = include_wall_clock ? "model,hidden,seed,epoch,wall_seconds,test_mrse\n"
                                       : "model,hidden,seed,epoch,test_mrse\n";
  for (const auto& c : report.cells) {
    for (const auto& pt : c.curve) {
      out += c.model + ',' + std::to_string(c.hidden) + ',' + std::to_string(c.seed) + ',' + std::to_string(pt.epoch) + ',';
      if (include_wall_clock) out += r2n2::detail::format_double(pt.wall_seconds) + ',';
      out += r2n2::detail::format_double(pt.test_mrse) + '\n';
    }
  }
  return out;
}

}  // namespace r2n2::harness
