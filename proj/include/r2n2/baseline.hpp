#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "r2n2/lstm.hpp"
#include "r2n2/timeseries.hpp"
#include "r2n2/var.hpp"

namespace r2n2::baseline {

/// Plain LSTM forecaster: input x_t, target x_{t+h}.
struct RnnForecaster {
  lstm::LstmParams rnn;
  Index horizon = 1;

  Index features() const noexcept { return rnn.input_dim(); }
  Index target_offset() const noexcept { return horizon; }
};

inline lstm::Sequence direct_io(const TimeSeries& ts, Index horizon) {
  if (horizon < 1) throw DataError("horizon must be >= 1");
  if (ts.length() < horizon + 1) {
    throw DataError("series of length " + std::to_string(ts.length()) + " too short for horizon " +
                    std::to_string(horizon));
  }
  const auto rows = ts.length() - horizon;
  return lstm::Sequence{ts.values().topRows(rows), ts.values().bottomRows(rows)};
}

/// Row r forecasts source row r + horizon; the state is warmed up from zero at
/// the first row of `ts`.
inline var::SeriesForecast predict_rnn_series(const RnnForecaster& model, const TimeSeries& ts) {
  if (ts.features() != model.features()) throw DataError("series feature count does not match RNN model");
  auto io = direct_io(ts, model.horizon);
  auto out = lstm::sequence_forward(model.rnn, io.inputs);
  return var::SeriesForecast{ts.with_values(std::move(out.outputs), ts.origin() + model.horizon), model.horizon};
}

struct RnnTrainResult {
  RnnForecaster model;
  lstm::TrainLog log;
  Index best_epoch = 0;
};

/// `probe`, when set, scores test predictions (source-aligned, with origin)
/// for the log's test_loss column.
inline RnnTrainResult train_rnn(const TimeSeries& train, const TimeSeries& val, Index horizon, Index hidden,
                                Index sequence_length, const lstm::TrainConfig& cfg,
                                const std::function<double(const RnnForecaster&)>& probe = {}) {
  auto tr = direct_io(train, horizon);
  auto va = direct_io(val, horizon);
  const auto p = train.features();
  auto init = lstm::init_params(p, hidden, p, cfg.seed);
  lstm::TestProbe test_probe;
  if (probe) {
    test_probe = [&probe, horizon](const lstm::LstmParams& params) { return probe(RnnForecaster{params, horizon}); };
  }
  auto result = lstm::train(init, lstm::chunk(tr.inputs, tr.targets, sequence_length), {std::move(va)}, {}, cfg,
                            test_probe);
  return RnnTrainResult{RnnForecaster{std::move(result.params), horizon}, std::move(result.log), result.best_epoch};
}

}  // namespace r2n2::baseline
