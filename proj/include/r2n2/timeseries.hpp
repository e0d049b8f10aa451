#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "r2n2/error.hpp"

namespace r2n2 {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// A T x p block of observations, one row per time step.
///
/// `origin` is the absolute index of row 0 in the series this block was cut
/// from. It is 0 for freshly loaded data, and split/slice propagate it so that
/// phase-dependent transforms (seasonal means) stay anchored after splitting.
class TimeSeries {
 public:
  TimeSeries(Matrix values, std::vector<std::string> names = {}, Index origin = 0)
      : values_(std::move(values)), names_(std::move(names)), origin_(origin) {
    if (values_.rows() < 1 || values_.cols() < 1) {
      throw DataError("time series needs at least one row and one column, got " +
                      std::to_string(values_.rows()) + "x" + std::to_string(values_.cols()));
    }
    if (names_.empty()) {
      names_ = default_names(values_.cols());
    }
    if (static_cast<Index>(names_.size()) != values_.cols()) {
      throw DataError("feature name count " + std::to_string(names_.size()) + " does not match column count " +
                      std::to_string(values_.cols()));
    }
    if (!values_.allFinite()) {
      throw DataError("time series contains non-finite values");
    }
  }

  Index length() const noexcept { return values_.rows(); }
  Index features() const noexcept { return values_.cols(); }
  Index origin() const noexcept { return origin_; }
  const Matrix& values() const noexcept { return values_; }
  const std::vector<std::string>& feature_names() const noexcept { return names_; }

  auto row(Index t) const { return values_.row(t); }

  /// Rows [begin, begin + count) as a new series with origin shifted accordingly.
  TimeSeries slice(Index begin, Index count) const {
    if (begin < 0 || count < 1 || begin + count > length()) {
      throw DataError("slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                      ") out of range for length " + std::to_string(length()));
    }
    return TimeSeries(values_.middleRows(begin, count), names_, origin_ + begin);
  }

  /// Same names, new values; origin defaults to this series' origin.
  TimeSeries with_values(Matrix values) const { return TimeSeries(std::move(values), names_, origin_); }
  TimeSeries with_values(Matrix values, Index origin) const { return TimeSeries(std::move(values), names_, origin); }

  static std::vector<std::string> default_names(Index p) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) out.push_back("x" + std::to_string(j));
    return out;
  }

 private:
  Matrix values_;
  std::vector<std::string> names_;
  Index origin_ = 0;
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  // strip a single optional trailing blank line left by a final "\r\n"
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// Parses CSV text: a header of feature names followed by numeric rows.
inline TimeSeries parse_csv(std::string_view text) {
  auto lines = detail::split_lines(text);
  if (lines.empty()) throw CsvError("missing header", 1, 1);

  std::vector<std::string> names;
  for (auto cell : detail::split_cells(lines[0])) names.emplace_back(cell);
  if (lines.size() < 2) throw CsvError("empty body: no data rows after header", 2, 1);

  const auto p = static_cast<Index>(names.size());
  const auto rows = static_cast<Index>(lines.size() - 1);
  Matrix values(rows, p);
  for (Index r = 0; r < rows; ++r) {
    const std::size_t file_row = static_cast<std::size_t>(r) + 2;
    auto cells = detail::split_cells(lines[static_cast<std::size_t>(r) + 1]);
    if (static_cast<Index>(cells.size()) != p) {
      throw CsvError("ragged row: expected " + std::to_string(p) + " cells, found " + std::to_string(cells.size()),
                     file_row, std::min(cells.size(), static_cast<std::size_t>(p)) + 1);
    }
    for (Index c = 0; c < p; ++c) {
      auto cell = cells[static_cast<std::size_t>(c)];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw CsvError("non-numeric cell '" + std::string(cell) + "'", file_row, static_cast<std::size_t>(c) + 1);
      }
      if (!std::isfinite(v)) {
        throw CsvError("non-finite cell '" + std::string(cell) + "'", file_row, static_cast<std::size_t>(c) + 1);
      }
      values(r, c) = v;
    }
  }
  return TimeSeries(std::move(values), std::move(names));
}

inline TimeSeries load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

/// Shortest round-trip decimal formatting, so a reload is bit-identical.
inline std::string to_csv(const TimeSeries& ts) {
  std::string out;
  const auto& names = ts.feature_names();
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j].find_first_of(",\n\r") != std::string::npos) {
      throw DataError("feature name '" + names[j] + "' cannot be written to CSV");
    }
    if (j) out += ',';
    out += names[j];
  }
  out += '\n';
  for (Index t = 0; t < ts.length(); ++t) {
    for (Index j = 0; j < ts.features(); ++j) {
      if (j) out += ',';
      out += detail::format_double(ts.values()(t, j));
    }
    out += '\n';
  }
  return out;
}

inline void save_csv(const TimeSeries& ts, const std::filesystem::path& path) {
  auto text = to_csv(ts);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  double test_fraction = 0.2;

  void validate() const {
    for (double f : {train_fraction, val_fraction, test_fraction}) {
      if (!(f > 0.0 && f < 1.0)) throw DataError("split fractions must lie in (0, 1)");
    }
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
      throw DataError("split fractions must sum to 1");
    }
  }
};

struct SplitLengths {
  Index train = 0;
  Index val = 0;
  Index test = 0;
};

/// val and test get floor(fraction * T), clamped to at least one row; train
/// takes whatever remains and must itself be nonempty.
inline SplitLengths split_lengths(Index total, const SplitSpec& spec) {
  spec.validate();
  auto floor_len = [total](double f) {
    auto n = static_cast<Index>(std::floor(f * static_cast<double>(total) + 1e-9));
    return std::max<Index>(n, 1);
  };
  SplitLengths out;
  out.val = floor_len(spec.val_fraction);
  out.test = floor_len(spec.test_fraction);
  out.train = total - out.val - out.test;
  if (out.train < 1) {
    throw DataError("series of length " + std::to_string(total) + " too short to split into three nonempty segments");
  }
  return out;
}

struct Segments {
  TimeSeries train;
  TimeSeries val;
  TimeSeries test;
};

inline Segments split(const TimeSeries& ts, const SplitSpec& spec) {
  auto len = split_lengths(ts.length(), spec);
  return Segments{ts.slice(0, len.train), ts.slice(len.train, len.val), ts.slice(len.train + len.val, len.test)};
}

// ---------------------------------------------------------------------------
// Z-scoring

struct Normalizer {
  RowVector means;
  RowVector stds;  // population convention (divide by T)
};

inline Normalizer zscore_fit(const TimeSeries& train) {
  const auto& x = train.values();
  const double n = static_cast<double>(x.rows());
  Normalizer out;
  out.means = x.colwise().sum() / n;
  out.stds = ((x.rowwise() - out.means).array().square().colwise().sum() / n).sqrt().matrix();
  for (Index j = 0; j < x.cols(); ++j) {
    if (!(out.stds(j) > 1e-12)) {
      throw DataError("feature '" + train.feature_names()[static_cast<std::size_t>(j)] +
                      "' is constant on the training segment; cannot z-score");
    }
  }
  return out;
}

inline TimeSeries zscore_apply(const Normalizer& n, const TimeSeries& ts) {
  if (ts.features() != n.means.size()) throw DataError("normalizer feature count mismatch");
  Matrix v = (ts.values().rowwise() - n.means).array().rowwise() / n.stds.array();
  return ts.with_values(std::move(v));
}

inline TimeSeries zscore_invert(const Normalizer& n, const TimeSeries& ts) {
  if (ts.features() != n.means.size()) throw DataError("normalizer feature count mismatch");
  Matrix v = (ts.values().array().rowwise() * n.stds.array()).matrix().rowwise() + n.means;
  return ts.with_values(std::move(v));
}

// ---------------------------------------------------------------------------
// Seasonal (per-phase) mean removal

/// Phase of absolute row t is (t + phase_offset) mod period.
struct SeasonalMeans {
  Index period = 1;
  Matrix phase_means;  // period x p
  Index phase_offset = 0;

  Index phase_of(Index absolute_row) const {
    auto ph = (absolute_row + phase_offset) % period;
    return ph < 0 ? ph + period : ph;
  }
};

inline SeasonalMeans deseasonalize_fit(const TimeSeries& train, Index period, Index phase_offset = 0) {
  if (period < 1) throw DataError("seasonal period must be >= 1");
  SeasonalMeans out;
  out.period = period;
  out.phase_offset = phase_offset;
  out.phase_means = Matrix::Zero(period, train.features());
  std::vector<Index> counts(static_cast<std::size_t>(period), 0);
  for (Index t = 0; t < train.length(); ++t) {
    auto ph = out.phase_of(train.origin() + t);
    out.phase_means.row(ph) += train.row(t);
    ++counts[static_cast<std::size_t>(ph)];
  }
  for (Index ph = 0; ph < period; ++ph) {
    auto c = counts[static_cast<std::size_t>(ph)];
    if (c == 0) throw DataError("phase " + std::to_string(ph) + " never occurs in the training segment");
    out.phase_means.row(ph) /= static_cast<double>(c);
  }
  return out;
}

namespace detail {
inline TimeSeries seasonal_shift(const SeasonalMeans& sm, const TimeSeries& ts, double sign) {
  if (ts.features() != sm.phase_means.cols()) throw DataError("seasonal means feature count mismatch");
  Matrix v = ts.values();
  for (Index t = 0; t < ts.length(); ++t) v.row(t) += sign * sm.phase_means.row(sm.phase_of(ts.origin() + t));
  return ts.with_values(std::move(v));
}
}  // namespace detail

inline TimeSeries deseasonalize_apply(const SeasonalMeans& sm, const TimeSeries& ts) {
  return detail::seasonal_shift(sm, ts, -1.0);
}

inline TimeSeries deseasonalize_invert(const SeasonalMeans& sm, const TimeSeries& ts) {
  return detail::seasonal_shift(sm, ts, 1.0);
}

}  // namespace r2n2
