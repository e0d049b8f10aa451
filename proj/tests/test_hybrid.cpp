#include <gtest/gtest.h>

#include "r2n2/baseline.hpp"
#include "r2n2/hybrid.hpp"
#include "r2n2/serialization.hpp"
#include "r2n2/synthetic.hpp"
#include "test_util.hpp"

using namespace r2n2;
using r2n2::testing::random_matrix;

namespace {

TimeSeries hybrid_series(Index length, std::uint64_t seed, double amplitude = 0.5) {
  synthetic::HybridProcessSpec spec;
  spec.a = synthetic::benchmark_coefficients();
  spec.amplitude = amplitude;
  spec.noise = synthetic::NoiseSpec{{0.1}, seed};
  spec.length = length;
  return synthetic::gen_hybrid_data(spec);
}

hybrid::R2n2Model random_model(std::mt19937_64& rng, const TimeSeries& ts, Index k, Index h, bool augment) {
  hybrid::R2n2Config cfg;
  cfg.horizon = h;
  cfg.base_k = k;
  cfg.augment_with_input = augment;
  cfg.hidden_dim = 3;
  auto base = var::fit_var(ts, k, h, 0.5);
  const auto p = ts.features();
  auto rnn = lstm::init_params(augment ? 2 * p : p, 3, p, rng());
  return hybrid::R2n2Model{base, rnn, cfg};
}

}  // namespace

TEST(Residuals, Definition) {
  var::VarModel m;
  m.coeffs = {Matrix::Zero(2, 2)};
  m.intercept = Vector(2);
  m.intercept << 1.5, 3.5;
  Matrix x(2, 2);
  x << 0, 0, 2, 3;
  auto res = hybrid::compute_residuals(m, TimeSeries(x));
  ASSERT_EQ(res.residuals.length(), 1);
  EXPECT_EQ(res.residuals.values()(0, 0), 0.5);
  EXPECT_EQ(res.residuals.values()(0, 1), -0.5);
  EXPECT_EQ(res.target_offset, 1);
  EXPECT_EQ(res.residuals.origin(), 1);
}

TEST(Residuals, BasePlusResidualIsTruth) {
  std::mt19937_64 rng(1);
  for (Index k : {1, 2, 3}) {
    for (Index h : {1, 3}) {
      TimeSeries ts(random_matrix(rng, 30, 2));
      auto m = var::fit_var(ts, k, h, 0.5);
      auto fc = var::predict_var_series(m, ts);
      auto res = hybrid::compute_residuals(m, ts);
      const Matrix truth = ts.values().bottomRows(res.residuals.length());
      // the residual is the rounded difference, so reconstruction is exact up to one rounding
      EXPECT_EQ(res.residuals.values(), truth - fc.predictions.values());
      EXPECT_LT((fc.predictions.values() + res.residuals.values() - truth).cwiseAbs().maxCoeff(),
                1e-15 * (1.0 + truth.cwiseAbs().maxCoeff()) * 4);
    }
  }
}

TEST(Residuals, PerfectBaseModelGivesZeroResiduals) {
  Matrix a(2, 2);
  a << 0.5, 0.1, 0.0, 0.8;
  Matrix x(200, 2);
  x.row(0) << 1.0, 1.0;
  for (Index t = 1; t < 200; ++t) x.row(t) = (a * x.row(t - 1).transpose()).transpose();
  TimeSeries ts(x);
  auto m = var::fit_var(ts, 1, 1, 0.0);
  EXPECT_LT(hybrid::compute_residuals(m, ts).residuals.values().cwiseAbs().maxCoeff(), 1e-6);
}

TEST(RnnIo, ShiftByHorizon) {
  Matrix e(3, 1);
  e << 1, 2, 3;
  Matrix x = Matrix::Zero(4, 1);
  hybrid::ResidualSeries res{TimeSeries(e, {}, 1), 1};
  auto io = hybrid::build_rnn_io(res, TimeSeries(x), 1, false);
  Matrix in(2, 1), out(2, 1);
  in << 1, 2;
  out << 2, 3;
  EXPECT_EQ(io.inputs, in);
  EXPECT_EQ(io.targets, out);
}

TEST(RnnIo, WidthAndCount) {
  std::mt19937_64 rng(2);
  TimeSeries ts(random_matrix(rng, 12, 2));
  auto m = var::fit_var(ts, 1, 2, 0.5);
  auto res = hybrid::compute_residuals(m, ts);
  auto io = hybrid::build_rnn_io(res, ts, 2, true);
  EXPECT_EQ(io.inputs.cols(), 4);
  Matrix e = Matrix::Ones(5, 1);
  hybrid::ResidualSeries five{TimeSeries(e, {}, 2), 2};
  auto io5 = hybrid::build_rnn_io(five, TimeSeries(Matrix::Zero(7, 1)), 2, false);
  EXPECT_EQ(io5.inputs.rows(), 3);
  EXPECT_THROW(hybrid::build_rnn_io(five, TimeSeries(Matrix::Zero(7, 1)), 5, false), DataError);
}

TEST(RnnIo, AlignmentAudit) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<Index> kd(1, 4), hd(1, 5), td(0, 30);
  for (int trial = 0; trial < 40; ++trial) {
    const auto k = kd(rng), h = hd(rng);
    const auto T = k + 2 * h + 3 + td(rng);
    TimeSeries ts(random_matrix(rng, T, 2));
    auto m = var::fit_var(ts, k, h, 0.5);
    auto res = hybrid::compute_residuals(m, ts);
    auto io = hybrid::build_rnn_io(res, ts, h, true);
    const auto o = k - 1 + h;
    for (Index r = 0; r < io.inputs.rows(); ++r) {
      // residual observed at source row r + o, from a forecast made at r + k - 1
      const Vector e_now = ts.values().row(r + o).transpose() - var::predict_var(m, ts.slice(0, r + k));
      // base error h rows later
      const Vector e_future = ts.values().row(r + o + h).transpose() - var::predict_var(m, ts.slice(0, r + k + h));
      EXPECT_LT((io.inputs.row(r).head(2).transpose() - e_now).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_EQ(io.inputs.row(r).tail(2), ts.values().row(r + o));
      EXPECT_LT((io.targets.row(r).transpose() - e_future).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Composition, HybridMinusBaseIsRnnOutput) {
  std::mt19937_64 rng(4);
  for (Index h : {1, 2}) {
    auto ts = hybrid_series(40, 5);
    auto model = random_model(rng, ts, 2, h, true);
    auto fc = hybrid::predict_r2n2_series(model, ts);
    EXPECT_EQ(fc.combined.values(), fc.base + fc.rnn);
    EXPECT_LT((fc.combined.values() - fc.base - fc.rnn).cwiseAbs().maxCoeff(),
              4e-16 * (1.0 + fc.base.cwiseAbs().maxCoeff() + fc.rnn.cwiseAbs().maxCoeff()));
    EXPECT_EQ(fc.target_offset, 2 - 1 + 2 * h);
    EXPECT_EQ(fc.combined.origin(), fc.target_offset);
    EXPECT_EQ(fc.combined.length(), ts.length() - fc.target_offset);
  }
}

TEST(Composition, HandUnrolledOnTenSteps) {
  std::mt19937_64 rng(5);
  auto ts = hybrid_series(10, 6);
  auto model = random_model(rng, ts, 1, 1, true);
  const auto& x = ts.values();
  const auto& a = model.base.coeffs[0];
  const auto& c = model.base.intercept;
  auto state = lstm::LstmState::zeros(3);
  auto fc = hybrid::predict_r2n2_series(model, ts);
  // step r: residual e_r at x[r + 1], RNN input [e_r | x[r + 1]], forecast x[r + 2]
  for (Index r = 0; r + 2 < 10; ++r) {
    const Vector base_now = a * x.row(r).transpose() + c;
    const Vector e = x.row(r + 1).transpose() - base_now;
    Vector in(8);
    in << e, x.row(r + 1).transpose();
    auto [next, k] = lstm::cell_forward(model.rnn, in, state);
    state = next;
    const Vector base_next = a * x.row(r + 1).transpose() + c;
    const Vector combined = base_next + k.y;
    EXPECT_LT((fc.combined.values().row(r).transpose() - combined).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Composition, ZeroRnnEqualsBaseAndZeroBaseEqualsRnn) {
  std::mt19937_64 rng(6);
  auto ts = hybrid_series(30, 7);
  auto model = random_model(rng, ts, 1, 1, true);
  auto silent = model;
  silent.rnn.proj_w.setZero();
  silent.rnn.proj_b.setZero();
  auto fc = hybrid::predict_r2n2_series(silent, ts);
  auto base = var::predict_var_series(model.base, ts);
  EXPECT_EQ(fc.combined.values(), base.predictions.values().bottomRows(fc.combined.length()));
  EXPECT_EQ(hybrid::predict_r2n2(silent, ts), var::predict_var(model.base, ts));

  auto no_base = model;
  for (auto& blk : no_base.base.coeffs) blk.setZero();
  no_base.base.intercept.setZero();
  auto fz = hybrid::predict_r2n2_series(no_base, ts);
  EXPECT_EQ(fz.combined.values(), fz.rnn);
}

TEST(Composition, PointForecastMatchesSeriesRow) {
  std::mt19937_64 rng(7);
  auto ts = hybrid_series(25, 8);
  for (Index h : {1, 2}) {
    auto model = random_model(rng, ts, 2, h, true);
    auto fc = hybrid::predict_r2n2_series(model, ts);
    // the history ending at row t forecasts t + h, which is series row t + h - target_offset
    for (Index t = 2 * h + 1; t < ts.length(); ++t) {
      const auto row = t + h - fc.target_offset;
      if (row < 0 || row >= fc.combined.length()) continue;
      auto one = hybrid::predict_r2n2(model, ts.slice(0, t + 1));
      EXPECT_LT((one - fc.combined.values().row(row).transpose()).cwiseAbs().maxCoeff(), 1e-12) << "t=" << t;
    }
    EXPECT_THROW(hybrid::predict_r2n2(model, ts.slice(0, 2 + h - 1)), DataError);
  }
}

TEST(TrainR2n2, ZeroEpochsWithZeroProjectionIsVar1) {
  auto ts = hybrid_series(300, 9);
  auto seg = split(ts, {});
  hybrid::R2n2Config cfg;
  cfg.train.max_epochs = 0;
  cfg.zero_init_projection = true;
  auto res = hybrid::train_r2n2(seg.train, seg.val, seg.test, cfg);
  auto fc = hybrid::predict_r2n2_series(res.model, seg.test);
  auto base = var::predict_var_series(var::fit_var(seg.train, 1, 1, cfg.base_lambda), seg.test);
  EXPECT_EQ(fc.combined.values(), base.predictions.values().bottomRows(fc.combined.length()));
  EXPECT_TRUE(res.log.empty());

  cfg.zero_init_projection = false;
  auto res2 = hybrid::train_r2n2(seg.train, seg.val, seg.test, cfg);
  auto fc2 = hybrid::predict_r2n2_series(res2.model, seg.test);
  EXPECT_GT((fc2.combined.values() - fc.combined.values()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(TrainR2n2, NoiselessLinearDataMatchesVar1) {
  // slowly decaying rotation so the validation segment is not numerically zero
  Matrix a(2, 2);
  a << std::cos(0.3), -std::sin(0.3), std::sin(0.3), std::cos(0.3);
  a *= 0.995;
  auto ts = synthetic::gen_var_data(a, Vector::Zero(2), synthetic::NoiseSpec{{0.0}, 1}, 400, 0, Vector::Ones(2));
  auto seg = split(ts, {});
  hybrid::R2n2Config cfg;
  cfg.base_lambda = 0.0;
  cfg.hidden_dim = 4;
  cfg.train.max_epochs = 5;
  cfg.zero_init_projection = true;
  cfg.sequence_length = 50;
  auto res = hybrid::train_r2n2(seg.train, seg.val, seg.test, cfg);
  auto fc = hybrid::predict_r2n2_series(res.model, seg.val);
  const Matrix truth = seg.val.values().bottomRows(fc.combined.length());
  EXPECT_LT(metrics::mrse(truth, fc.base), 1e-9);
  EXPECT_LT(metrics::mrse(truth, fc.combined.values()), 0.02);
}

TEST(TrainR2n2, BeatsBaseOnHybridData) {
  double combined = 0.0, linear = 0.0;
  auto raw = hybrid_series(1500, 10);
  auto seg = split(raw, {});
  auto norm = zscore_fit(seg.train);
  auto train = zscore_apply(norm, seg.train), val = zscore_apply(norm, seg.val), test = zscore_apply(norm, seg.test);
  for (std::uint64_t seed : {1, 2, 3}) {
    hybrid::R2n2Config cfg;
    cfg.hidden_dim = 8;
    cfg.train.max_epochs = 15;
    cfg.train.seed = seed;
    cfg.sequence_length = 50;
    cfg.zero_init_projection = true;
    auto res = hybrid::train_r2n2(train, val, test, cfg);
    auto fc = hybrid::predict_r2n2_series(res.model, val);
    const Matrix truth = val.values().bottomRows(fc.combined.length());
    combined += metrics::mrse(truth, fc.combined.values());
    linear += metrics::mrse(truth, fc.base);
    EXPECT_EQ(res.log.size(), static_cast<std::size_t>(res.log.back().epoch));
    EXPECT_TRUE(std::isfinite(res.log.front().test_loss));
  }
  EXPECT_LT(combined, linear);
}

TEST(TrainR2n2, ResidualsOnlyInput) {
  auto ts = hybrid_series(200, 11);
  auto seg = split(ts, {});
  hybrid::R2n2Config cfg;
  cfg.augment_with_input = false;
  cfg.train.max_epochs = 2;
  cfg.hidden_dim = 3;
  auto res = hybrid::train_r2n2(seg.train, seg.val, seg.test, cfg);
  EXPECT_EQ(res.model.rnn.input_dim(), 4);
  EXPECT_NO_THROW(hybrid::predict_r2n2_series(res.model, seg.test));
}

TEST(Serialization, R2n2RoundTrip) {
  std::mt19937_64 rng(12);
  auto ts = hybrid_series(30, 12);
  auto model = random_model(rng, ts, 2, 1, true);
  auto back = io::r2n2_from_json(nlohmann::json::parse(io::to_json(model).dump()));
  EXPECT_EQ(io::to_json(back), io::to_json(model));
  EXPECT_EQ(hybrid::predict_r2n2_series(back, ts).combined.values(),
            hybrid::predict_r2n2_series(model, ts).combined.values());
  auto j = io::to_json(model);
  j["config"]["augment_with_input"] = false;
  EXPECT_THROW(io::r2n2_from_json(j), DataError);
}

TEST(Baseline, DirectIoAndForecastAlignment) {
  std::mt19937_64 rng(13);
  TimeSeries ts(random_matrix(rng, 12, 2));
  auto io = baseline::direct_io(ts, 3);
  EXPECT_EQ(io.inputs.rows(), 9);
  EXPECT_EQ(io.inputs.row(0), ts.values().row(0));
  EXPECT_EQ(io.targets.row(0), ts.values().row(3));
  baseline::RnnForecaster m{lstm::init_params(2, 3, 2, 1), 3};
  auto fc = baseline::predict_rnn_series(m, ts);
  EXPECT_EQ(fc.predictions.origin(), 3);
  EXPECT_EQ(fc.predictions.length(), 9);
  EXPECT_EQ(fc.predictions.values(), lstm::sequence_forward(m.rnn, io.inputs).outputs);
  EXPECT_THROW(baseline::direct_io(ts, 12), DataError);
}
