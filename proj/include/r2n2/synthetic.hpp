#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "r2n2/timeseries.hpp"

namespace r2n2::synthetic {

inline double spectral_radius(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() < 1) throw DataError("spectral radius needs a nonempty square matrix");
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Per-feature Gaussian noise. A single std entry applies to every feature.
struct NoiseSpec {
  std::vector<double> std{0.0};
  std::uint64_t seed = 0;

  double std_for(Index j) const { return std.size() == 1 ? std[0] : std[static_cast<std::size_t>(j)]; }

  void validate(Index p) const {
    if (std.size() != 1 && static_cast<Index>(std.size()) != p) throw DataError("noise std must have 1 or p entries");
    for (double s : std)
      if (!(s >= 0.0)) throw DataError("noise std must be non-negative");
  }
};

/// x_t = A x_{t-1} + amplitude * sin(x_{t-lag}) + e_t  (sin element-wise).
struct HybridProcessSpec {
  Matrix a;
  double amplitude = 0.5;
  Index lag = 1;
  NoiseSpec noise;
  Index length = 1000;
  Index burn_in = 100;
  std::optional<Vector> initial;  // x_0; all ones if absent

  Index features() const noexcept { return a.rows(); }

  void validate() const {
    if (a.rows() < 1 || a.rows() != a.cols()) throw DataError("hybrid process needs a square coefficient matrix");
    const double rho = spectral_radius(a);
    if (!(rho < 1.0)) throw DataError("coefficient matrix is not stable (spectral radius " + std::to_string(rho) + ")");
    if (lag < 1) throw DataError("nonlinear lag must be >= 1");
    if (length < 1 || burn_in < 0) throw DataError("invalid series length or burn-in");
    if (initial && initial->size() != a.rows()) throw DataError("initial state has wrong dimension");
    noise.validate(a.rows());
  }
};

/// Stable 4x4 coefficients for the default benchmark (spectral radius ~0.99).
inline Matrix benchmark_coefficients() {
  Matrix a(4, 4);
  a << 0.099, 0.702, -0.099, 0.494,  //
      -0.603, 0.537, 0.636, -0.340,  //
      -0.702, -0.022, -0.450, 0.680, //
      0.570, 0.658, 0.154, 0.022;
  return a;
}

namespace detail {

constexpr double kDivergenceBound = 1e6;

// Shared simulator so that amplitude 0 reproduces the linear generator draw
// for draw.
inline TimeSeries simulate(const Matrix& a, const Vector& intercept, double amplitude, Index lag,
                           const NoiseSpec& noise, const Vector& x0, Index length, Index burn_in) {
  const auto p = a.rows();
  const auto total = length + burn_in;
  Matrix x(total, p);
  x.row(0) = x0.transpose();
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector eps(p);
  for (Index t = 1; t < total; ++t) {
    for (Index j = 0; j < p; ++j) eps(j) = noise.std_for(j) * gauss(rng);
    Vector next = a * x.row(t - 1).transpose() + intercept + eps;
    if (amplitude != 0.0) {
      const auto src = t - lag < 0 ? Index{0} : t - lag;
      next += amplitude * x.row(src).transpose().array().sin().matrix();
    }
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > kDivergenceBound) {
      throw NumericError("generated series diverged at step " + std::to_string(t));
    }
    x.row(t) = next.transpose();
  }
  return TimeSeries(x.bottomRows(length));
}

}  // namespace detail

/// x_t = A x_{t-1} + c + e_t, starting from x0 (zeros if absent); the first
/// burn_in rows are discarded.
inline TimeSeries gen_var_data(const Matrix& a, const Vector& intercept, const NoiseSpec& noise, Index length,
                               Index burn_in, const std::optional<Vector>& x0 = std::nullopt) {
  if (a.rows() < 1 || a.rows() != a.cols()) throw DataError("VAR generator needs a square coefficient matrix");
  if (intercept.size() != a.rows()) throw DataError("intercept has wrong dimension");
  const double rho = spectral_radius(a);
  if (!(rho < 1.0)) throw DataError("coefficient matrix is not stable (spectral radius " + std::to_string(rho) + ")");
  if (length < 1 || burn_in < 0) throw DataError("invalid series length or burn-in");
  if (x0 && x0->size() != a.rows()) throw DataError("initial state has wrong dimension");
  noise.validate(a.rows());
  return detail::simulate(a, intercept, 0.0, 1, noise, x0.value_or(Vector::Zero(a.rows())), length, burn_in);
}

inline TimeSeries gen_hybrid_data(const HybridProcessSpec& spec) {
  spec.validate();
  const auto p = spec.features();
  return detail::simulate(spec.a, Vector::Zero(p), spec.amplitude, spec.lag, spec.noise,
                          spec.initial.value_or(Vector::Ones(p)), spec.length, spec.burn_in);
}

}  // namespace r2n2::synthetic
