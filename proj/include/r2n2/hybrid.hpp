#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "r2n2/lstm.hpp"
#include "r2n2/metrics.hpp"
#include "r2n2/timeseries.hpp"
#include "r2n2/var.hpp"

// Residual composition: a linear base forecaster plus an LSTM that predicts
// the base model's error one horizon ahead of its latest observed residual.
//
// Indexing over a series x of length T with base lag k and horizon h:
//   base prediction row q forecasts x[q + k - 1 + h]     (offset o = k - 1 + h)
//   residual row r = x[r + o] - base row r               (known at time r + o)
//   RNN step r sees [e_r | x[r + o]] and is trained toward e_{r + h}
//   combined row r = base row (r + h) + RNN output r     -> forecasts x[r + o + h]
namespace r2n2::hybrid {

struct R2n2Config {
  Index horizon = 1;
  bool augment_with_input = true;
  Index base_k = 1;
  double base_lambda = 0.5;
  Index hidden_dim = 16;
  Index sequence_length = 100;  // training residual stream is cut into pieces of this many rows
  bool zero_init_projection = false;
  lstm::TrainConfig train;

  void validate() const {
    if (horizon < 1) throw DataError("R2N2 horizon must be >= 1");
    if (base_k < 1) throw DataError("R2N2 base lag must be >= 1");
    if (!(base_lambda >= 0.0)) throw DataError("R2N2 base lambda must be >= 0");
    if (hidden_dim < 1) throw DataError("R2N2 hidden size must be >= 1");
    if (sequence_length < 0) throw DataError("R2N2 sequence length must be >= 0");
    train.validate();
  }
};

struct R2n2Model {
  var::VarModel base;
  lstm::LstmParams rnn;
  R2n2Config config;

  Index features() const noexcept { return base.features(); }
  Index rnn_input_dim() const noexcept { return config.augment_with_input ? 2 * features() : features(); }
  /// Source row forecast by combined-prediction row 0.
  Index target_offset() const noexcept { return base.target_offset() + config.horizon; }

  void validate() const {
    base.validate();
    rnn.validate();
    if (base.h != config.horizon) throw DataError("base model horizon differs from R2N2 horizon");
    if (rnn.input_dim() != rnn_input_dim() || rnn.output_dim() != features()) {
      throw DataError("RNN dimensions do not match the base model and augmentation setting");
    }
  }
};

struct ResidualSeries {
  TimeSeries residuals;   // row r is the base error at source row r + target_offset
  Index target_offset = 0;
};

inline ResidualSeries compute_residuals(const var::VarModel& base, const TimeSeries& ts) {
  auto fc = var::predict_var_series(base, ts);
  Matrix e = ts.values().bottomRows(fc.predictions.length()) - fc.predictions.values();
  return ResidualSeries{ts.with_values(std::move(e), ts.origin() + fc.target_offset), fc.target_offset};
}

/// RNN inputs for every residual row: [e_r | x[r + offset]] or e_r alone.
inline Matrix rnn_inputs(const ResidualSeries& res, const TimeSeries& ts, bool augment) {
  const auto rows = res.residuals.length();
  const auto p = res.residuals.features();
  if (ts.features() != p) throw DataError("series and residual feature counts differ");
  if (res.target_offset + rows > ts.length()) throw DataError("residual series does not align with source series");
  if (!augment) return res.residuals.values();
  Matrix in(rows, 2 * p);
  in.leftCols(p) = res.residuals.values();
  in.rightCols(p) = ts.values().middleRows(res.target_offset, rows);
  return in;
}

struct RnnIo {
  Matrix inputs;   // rows with a target
  Matrix targets;  // e_{r + h}
};

inline RnnIo build_rnn_io(const ResidualSeries& res, const TimeSeries& ts, Index horizon, bool augment) {
  if (horizon < 1) throw DataError("horizon must be >= 1");
  const auto rows = res.residuals.length();
  if (rows < horizon + 1) {
    throw DataError("need at least " + std::to_string(horizon + 1) + " residual rows, have " + std::to_string(rows));
  }
  Matrix all = rnn_inputs(res, ts, augment);
  return RnnIo{all.topRows(rows - horizon), res.residuals.values().bottomRows(rows - horizon)};
}

/// Base, RNN, and combined predictions over a series, row-aligned: row r of
/// each forecasts source row r + target_offset.
struct HybridForecast {
  Matrix base;
  Matrix rnn;
  TimeSeries combined;
  Index target_offset = 0;
};

inline HybridForecast predict_r2n2_series(const R2n2Model& model, const TimeSeries& ts) {
  const auto h = model.config.horizon;
  auto fc = var::predict_var_series(model.base, ts);
  if (fc.predictions.length() < h + 1) {
    throw DataError("series of length " + std::to_string(ts.length()) + " too short for an R2N2 forecast");
  }
  Matrix e = ts.values().bottomRows(fc.predictions.length()) - fc.predictions.values();
  ResidualSeries res{ts.with_values(std::move(e), ts.origin() + fc.target_offset), fc.target_offset};
  const Matrix in = rnn_inputs(res, ts, model.config.augment_with_input);
  const auto rows = in.rows() - h;
  auto out = lstm::sequence_forward(model.rnn, in.topRows(rows));
  Matrix base = fc.predictions.values().bottomRows(rows);
  Matrix combined = base + out.outputs;
  const auto offset = model.target_offset();
  return HybridForecast{std::move(base), std::move(out.outputs),
                        ts.with_values(std::move(combined), ts.origin() + offset), offset};
}

/// Forecast of (last history row) + h. `history` is the observed series up
/// to now; its residuals are computed in place, the RNN is warmed up over all
/// of them from a zero state, and its last output corrects the base forecast.
inline Vector predict_r2n2(const R2n2Model& model, const TimeSeries& history) {
  const auto k = model.base.k;
  const auto h = model.config.horizon;
  if (history.length() < k + h) {
    throw DataError("history of length " + std::to_string(history.length()) +
                    " too short: need k + h = " + std::to_string(k + h) + " rows for one residual");
  }
  Vector base = var::predict_var(model.base, history);
  auto res = compute_residuals(model.base, history);
  auto out = lstm::sequence_forward(model.rnn, rnn_inputs(res, history, model.config.augment_with_input));
  return base + out.outputs.bottomRows(1).transpose();
}

/// Scores an aligned (truth, prediction) pair. Both carry origins, so a caller
/// can undo phase-dependent transforms before measuring.
using SegmentScorer = std::function<double(const TimeSeries& truth, const TimeSeries& pred)>;

inline double default_score(const TimeSeries& truth, const TimeSeries& pred) {
  return metrics::mrse(truth.values(), pred.values());
}

/// Combined-model score on one segment.
inline double score_r2n2(const R2n2Model& model, const TimeSeries& ts, const SegmentScorer& scorer) {
  auto fc = predict_r2n2_series(model, ts);
  auto truth = ts.slice(fc.target_offset, fc.combined.length());
  return scorer(truth, fc.combined);
}

struct R2n2TrainResult {
  R2n2Model model;
  lstm::TrainLog log;  // test_loss holds combined-model score per epoch
  Index best_epoch = 0;
  double var_fit_seconds = 0.0;
};

/// Fits the base VAR on train, then trains the LSTM on its residuals. Segments
/// are expected to be normalized already.
inline R2n2TrainResult train_r2n2(const TimeSeries& train, const TimeSeries& val, const TimeSeries& test,
                                  const R2n2Config& cfg, const SegmentScorer& scorer = default_score) {
  cfg.validate();
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  auto base = var::fit_var(train, cfg.base_k, cfg.horizon, cfg.base_lambda);
  const double var_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  auto io_for = [&](const TimeSeries& seg) {
    return build_rnn_io(compute_residuals(base, seg), seg, cfg.horizon, cfg.augment_with_input);
  };
  auto tr = io_for(train);
  auto va = io_for(val);

  const auto p = train.features();
  auto init = lstm::init_params(cfg.augment_with_input ? 2 * p : p, cfg.hidden_dim, p, cfg.train.seed);
  if (cfg.zero_init_projection) {
    init.proj_w.setZero();
    init.proj_b.setZero();
  }

  R2n2Model probe_model{base, init, cfg};
  lstm::TestProbe probe = [&](const lstm::LstmParams& rnn) {
    probe_model.rnn = rnn;
    return score_r2n2(probe_model, test, scorer);
  };

  auto result = lstm::train(init, lstm::chunk(tr.inputs, tr.targets, cfg.sequence_length),
                            {lstm::Sequence{std::move(va.inputs), std::move(va.targets)}}, {}, cfg.train, probe);
  return R2n2TrainResult{R2n2Model{std::move(base), std::move(result.params), cfg}, std::move(result.log),
                         result.best_epoch, var_seconds};
}

}  // namespace r2n2::hybrid
