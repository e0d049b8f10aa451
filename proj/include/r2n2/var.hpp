#pragma once

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "r2n2/metrics.hpp"
#include "r2n2/timeseries.hpp"

namespace r2n2::var {

inline const std::vector<double>& default_lambda_grid() {
  static const std::vector<double> grid{0.05, 0.5, 5.0, 50.0, 500.0};
  return grid;
}

/// Direct h-step ridge VAR: x_{t+h} ~ c + sum_i A_i x_{t-i+1}.
struct VarModel {
  Index k = 1;
  Index h = 1;
  double lambda = 0.0;
  std::vector<Matrix> coeffs;  // A_1..A_k, each p x p
  Vector intercept;

  Index features() const noexcept { return intercept.size(); }
  Index target_offset() const noexcept { return k - 1 + h; }

  void validate() const {
    if (k < 1 || h < 1) throw DataError("VAR lag order and horizon must be >= 1");
    if (!(lambda >= 0.0)) throw DataError("VAR ridge coefficient must be >= 0");
    if (static_cast<Index>(coeffs.size()) != k) throw DataError("VAR model has wrong number of coefficient blocks");
    const auto p = intercept.size();
    if (p < 1 || !intercept.allFinite()) throw DataError("VAR intercept invalid");
    for (const auto& a : coeffs) {
      if (a.rows() != p || a.cols() != p || !a.allFinite()) throw DataError("VAR coefficient block invalid");
    }
  }
};

namespace detail {

/// Row r is [x_t, x_{t-1}, ..., x_{t-k+1}, 1] with last-lag row t = r + k - 1.
inline Matrix design(const Matrix& x, Index k, Index h) {
  const auto rows = x.rows() - k - h + 1;
  const auto p = x.cols();
  Matrix z(rows, k * p + 1);
  for (Index i = 0; i < k; ++i) z.middleCols(i * p, p) = x.middleRows(k - 1 - i, rows);
  z.col(k * p).setOnes();
  return z;
}

}  // namespace detail

inline VarModel fit_var(const TimeSeries& train, Index k, Index h, double lambda) {
  if (k < 1 || h < 1) throw DataError("VAR lag order and horizon must be >= 1");
  if (!(lambda >= 0.0)) throw DataError("VAR ridge coefficient must be >= 0");
  const auto& x = train.values();
  const auto p = x.cols();
  if (x.rows() < k + h) {
    throw DataError("training segment of length " + std::to_string(x.rows()) + " too short for k=" +
                    std::to_string(k) + ", h=" + std::to_string(h));
  }
  const Matrix z = detail::design(x, k, h);
  const Matrix y = x.bottomRows(z.rows());

  const auto d = z.cols();
  Matrix gram = z.transpose() * z;
  gram.diagonal().head(d - 1).array() += lambda;  // intercept column unpenalized
  const Matrix rhs = z.transpose() * y;

  Eigen::LDLT<Matrix> ldlt(gram);
  const auto& pivots = ldlt.vectorD();
  const double scale = pivots.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || !(pivots.minCoeff() > 1e-12 * std::max(scale, 1.0))) {
    throw SingularSystemError("VAR normal equations are singular (k=" + std::to_string(k) +
                              ", lambda=" + std::to_string(lambda) + "); use lambda > 0");
  }
  const Matrix b = ldlt.solve(rhs);  // d x p

  VarModel m;
  m.k = k;
  m.h = h;
  m.lambda = lambda;
  m.coeffs.reserve(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) m.coeffs.push_back(b.middleRows(i * p, p).transpose());
  m.intercept = b.row(k * p).transpose();
  return m;
}

/// Forecast of (last history row) + h.
inline Vector predict_var(const VarModel& model, const TimeSeries& history) {
  if (history.features() != model.features()) throw DataError("history feature count does not match VAR model");
  if (history.length() < model.k) {
    throw DataError("history of length " + std::to_string(history.length()) + " shorter than lag order " +
                    std::to_string(model.k));
  }
  const auto t = history.length() - 1;
  Vector out = model.intercept;
  for (Index i = 0; i < model.k; ++i) out.noalias() += model.coeffs[static_cast<std::size_t>(i)] * history.row(t - i).transpose();
  return out;
}

struct SeriesForecast {
  TimeSeries predictions;  // row r forecasts source row r + target_offset
  Index target_offset = 0;
};

inline SeriesForecast predict_var_series(const VarModel& model, const TimeSeries& ts) {
  if (ts.features() != model.features()) throw DataError("series feature count does not match VAR model");
  const auto offset = model.target_offset();
  if (ts.length() < model.k + model.h) {
    throw DataError("series of length " + std::to_string(ts.length()) + " too short for k=" +
                    std::to_string(model.k) + ", h=" + std::to_string(model.h));
  }
  const auto rows = ts.length() - model.k - model.h + 1;
  const auto& x = ts.values();
  Matrix out = Matrix::Zero(rows, ts.features());
  out.rowwise() += model.intercept.transpose();
  for (Index i = 0; i < model.k; ++i) {
    // lag i row for prediction r is x(r + k - 1 - i)
    out.noalias() += x.middleRows(model.k - 1 - i, rows) * model.coeffs[static_cast<std::size_t>(i)].transpose();
  }
  return SeriesForecast{ts.with_values(std::move(out), ts.origin() + offset), offset};
}

/// Squared Frobenius norm over all coefficient blocks.
inline double coefficient_norm2(const VarModel& m) {
  double acc = 0.0;
  for (const auto& a : m.coeffs) acc += a.squaredNorm();
  return acc;
}

// ---------------------------------------------------------------------------
// Order / ridge grid search

struct OrderSearchEntry {
  Index k = 0;
  double lambda = 0.0;
  std::optional<double> val_mrse;  // absent when the cell could not be fit or scored
  std::string note;
};

struct OrderSearchResult {
  Index best_k = 0;
  double best_lambda = 0.0;
  double best_mrse = std::numeric_limits<double>::infinity();
  std::vector<OrderSearchEntry> table;
};

/// Validation MRSE of a model on a segment, on that segment's own scale.
inline double validation_mrse(const VarModel& model, const TimeSeries& val) {
  auto fc = predict_var_series(model, val);
  const auto& truth = val.values().bottomRows(fc.predictions.length());
  return metrics::mrse(truth, fc.predictions.values());
}

/// Raises k from 1 while the best-over-lambda validation MRSE keeps improving
/// (patience 1), up to k_max. Ties go to smaller k, then smaller lambda.
inline OrderSearchResult select_order(const TimeSeries& train, const TimeSeries& val, Index h, Index k_max,
                                      const std::vector<double>& lambda_grid) {
  if (k_max < 1) throw DataError("k_max must be >= 1");
  if (lambda_grid.empty()) throw DataError("lambda grid is empty");

  OrderSearchResult out;
  double prev_best = std::numeric_limits<double>::infinity();
  for (Index k = 1; k <= k_max; ++k) {
    double best_for_k = std::numeric_limits<double>::infinity();
    for (double lambda : lambda_grid) {
      OrderSearchEntry e{k, lambda, std::nullopt, {}};
      try {
        auto model = fit_var(train, k, h, lambda);
        e.val_mrse = validation_mrse(model, val);
      } catch (const Error& err) {
        e.note = err.what();
      }
      if (e.val_mrse) {
        best_for_k = std::min(best_for_k, *e.val_mrse);
        const double v = *e.val_mrse;
        const bool better = v < out.best_mrse ||
                            (v == out.best_mrse && (k < out.best_k || (k == out.best_k && lambda < out.best_lambda)));
        if (better) {
          out.best_mrse = v;
          out.best_k = k;
          out.best_lambda = lambda;
        }
      }
      out.table.push_back(std::move(e));
    }
    if (!(best_for_k < prev_best)) break;  // no improvement, or nothing scorable at this k
    prev_best = best_for_k;
  }
  if (out.best_k == 0) throw DataError("order search found no scorable (k, lambda) cell");
  return out;
}

}  // namespace r2n2::var
