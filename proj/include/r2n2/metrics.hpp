#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "r2n2/timeseries.hpp"

namespace r2n2::metrics {

/// Aligned ground truth and predictions, rows = time steps, columns = features.
struct EvalPair {
  Eigen::Ref<const Matrix> truth;
  Eigen::Ref<const Matrix> pred;

  EvalPair(const Eigen::Ref<const Matrix>& t, const Eigen::Ref<const Matrix>& p) : truth(t), pred(p) {
    if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) {
      throw DataError("truth and prediction shapes differ");
    }
    if (truth.rows() < 1 || truth.cols() < 1) throw DataError("empty evaluation pair");
    if (!truth.allFinite() || !pred.allFinite()) throw DataError("evaluation pair has non-finite entries");
  }
};

namespace detail {

// Plain loops in a fixed order: the baseline identity (mean prediction gives
// exactly 1) depends on numerator and denominator being summed identically.
inline double squared_error(const EvalPair& pair) {
  double acc = 0.0;
  for (Index j = 0; j < pair.truth.cols(); ++j)
    for (Index t = 0; t < pair.truth.rows(); ++t) {
      const double d = pair.truth(t, j) - pair.pred(t, j);
      acc += d * d;
    }
  return acc;
}

inline RowVector feature_means(const Eigen::Ref<const Matrix>& x) { return x.colwise().mean(); }

inline double squared_deviation(const Eigen::Ref<const Matrix>& x) {
  const RowVector mu = feature_means(x);
  double acc = 0.0;
  for (Index j = 0; j < x.cols(); ++j)
    for (Index t = 0; t < x.rows(); ++t) {
      const double d = x(t, j) - mu(j);
      acc += d * d;
    }
  return acc;
}

}  // namespace detail

/// Root of total squared error over root of total squared deviation from
/// per-feature means of the evaluation segment. 1.0 is the predict-the-mean
/// baseline.
inline double mrse(const EvalPair& pair) {
  const double den = detail::squared_deviation(pair.truth);
  if (!(den > 0.0)) throw DataError("MRSE undefined: every feature is constant over the evaluation segment");
  return std::sqrt(detail::squared_error(pair)) / std::sqrt(den);
}

inline double mrse(const Eigen::Ref<const Matrix>& truth, const Eigen::Ref<const Matrix>& pred) {
  return mrse(EvalPair(truth, pred));
}

/// Root of total squared error over root of total squared truth.
inline double re(const EvalPair& pair) {
  double den = 0.0;
  for (Index j = 0; j < pair.truth.cols(); ++j)
    for (Index t = 0; t < pair.truth.rows(); ++t) den += pair.truth(t, j) * pair.truth(t, j);
  if (!(den > 0.0)) throw DataError("RE undefined: ground truth is identically zero");
  return std::sqrt(detail::squared_error(pair)) / std::sqrt(den);
}

inline double re(const Eigen::Ref<const Matrix>& truth, const Eigen::Ref<const Matrix>& pred) {
  return re(EvalPair(truth, pred));
}

/// Diagnostic only: MRSE of each feature on its own (the plot-legend numbers).
inline std::vector<double> mrse_per_feature(const EvalPair& pair) {
  std::vector<double> out;
  for (Index j = 0; j < pair.truth.cols(); ++j) {
    out.push_back(mrse(pair.truth.col(j), pair.pred.col(j)));
  }
  return out;
}

}  // namespace r2n2::metrics
