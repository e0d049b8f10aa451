#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "r2n2/timeseries.hpp"

namespace r2n2::lstm {

/// Single-layer LSTM with a linear read-out.
///
/// Gate order everywhere is forget, input, candidate, output. Input weights
/// are hidden x input, recurrent weights hidden x hidden.
struct LstmParams {
  Matrix w_forget, w_input, w_cand, w_output;
  Matrix u_forget, u_input, u_cand, u_output;
  Vector b_forget, b_input, b_cand, b_output;
  Matrix proj_w;  // output x hidden
  Vector proj_b;

  Index input_dim() const noexcept { return w_forget.cols(); }
  Index hidden_dim() const noexcept { return w_forget.rows(); }
  Index output_dim() const noexcept { return proj_w.rows(); }

  static LstmParams zeros(Index p_in, Index n, Index p_out) {
    LstmParams p;
    for (Matrix* w : {&p.w_forget, &p.w_input, &p.w_cand, &p.w_output}) *w = Matrix::Zero(n, p_in);
    for (Matrix* u : {&p.u_forget, &p.u_input, &p.u_cand, &p.u_output}) *u = Matrix::Zero(n, n);
    for (Vector* b : {&p.b_forget, &p.b_input, &p.b_cand, &p.b_output}) *b = Vector::Zero(n);
    p.proj_w = Matrix::Zero(p_out, n);
    p.proj_b = Vector::Zero(p_out);
    return p;
  }

  LstmParams zeros_like() const { return zeros(input_dim(), hidden_dim(), output_dim()); }

  /// Calls f(name, tensor...) for every parameter tensor, in a fixed order,
  /// across any number of identically shaped parameter sets.
  template <class F, class... P>
  static void zip(F&& f, P&... ps) {
    f("w_forget", ps.w_forget...);
    f("w_input", ps.w_input...);
    f("w_cand", ps.w_cand...);
    f("w_output", ps.w_output...);
    f("u_forget", ps.u_forget...);
    f("u_input", ps.u_input...);
    f("u_cand", ps.u_cand...);
    f("u_output", ps.u_output...);
    f("b_forget", ps.b_forget...);
    f("b_input", ps.b_input...);
    f("b_cand", ps.b_cand...);
    f("b_output", ps.b_output...);
    f("proj_w", ps.proj_w...);
    f("proj_b", ps.proj_b...);
  }

  Index parameter_count() const {
    Index n = 0;
    zip([&n](const char*, const auto& t) { n += t.size(); }, *this);
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    zip([&ok](const char*, const auto& t) { ok = ok && t.allFinite(); }, *this);
    return ok;
  }

  double recurrent_norm2() const {
    return u_forget.squaredNorm() + u_input.squaredNorm() + u_cand.squaredNorm() + u_output.squaredNorm();
  }

  void validate() const {
    const auto p_in = input_dim(), n = hidden_dim(), p_out = output_dim();
    if (p_in < 1 || n < 1 || p_out < 1) throw DataError("LSTM dimensions must be positive");
    bool ok = true;
    for (const Matrix* w : {&w_forget, &w_input, &w_cand, &w_output}) ok = ok && w->rows() == n && w->cols() == p_in;
    for (const Matrix* u : {&u_forget, &u_input, &u_cand, &u_output}) ok = ok && u->rows() == n && u->cols() == n;
    for (const Vector* b : {&b_forget, &b_input, &b_cand, &b_output}) ok = ok && b->size() == n;
    ok = ok && proj_w.cols() == n && proj_b.size() == p_out;
    if (!ok) throw DataError("LSTM parameter shapes are inconsistent");
    if (!all_finite()) throw DataError("LSTM parameters contain non-finite values");
  }
};

/// Uniform on [-s, s] with s = 1/sqrt(fan_in); biases zero except forget = 1.
inline LstmParams init_params(Index p_in, Index n, Index p_out, std::uint64_t seed) {
  if (p_in < 1 || n < 1 || p_out < 1) throw DataError("LSTM dimensions must be positive");
  auto p = LstmParams::zeros(p_in, n, p_out);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](Matrix& m) {
    const double s = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    std::uniform_real_distribution<double> dist(-s, s);
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  };
  for (Matrix* w : {&p.w_forget, &p.w_input, &p.w_cand, &p.w_output}) fill(*w);
  for (Matrix* u : {&p.u_forget, &p.u_input, &p.u_cand, &p.u_output}) fill(*u);
  fill(p.proj_w);
  p.b_forget.setOnes();
  return p;
}

struct LstmState {
  Vector h;
  Vector c;

  static LstmState zeros(Index n) { return {Vector::Zero(n), Vector::Zero(n)}; }
};

struct StepCache {
  Vector x, h_prev, c_prev;
  Vector f, i, cand, c, o, h;
  Vector y;
};

namespace detail {

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

template <class Derived>
inline auto sigmoid(const Eigen::MatrixBase<Derived>& a) {
  return a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

inline void check_state(const LstmParams& params, const LstmState& s) {
  if (s.h.size() != params.hidden_dim() || s.c.size() != params.hidden_dim()) {
    throw DataError("LSTM state size does not match hidden dimension");
  }
}

}  // namespace detail

inline Vector project(const LstmParams& params, const Vector& h) {
  if (h.size() != params.hidden_dim()) throw DataError("projection input size does not match hidden dimension");
  return params.proj_w * h + params.proj_b;
}

inline std::pair<LstmState, StepCache> cell_forward(const LstmParams& params, const Vector& x,
                                                    const LstmState& prev) {
  if (x.size() != params.input_dim()) throw DataError("cell input size does not match input dimension");
  detail::check_state(params, prev);
  StepCache k;
  k.x = x;
  k.h_prev = prev.h;
  k.c_prev = prev.c;
  k.f = detail::sigmoid(params.w_forget * x + params.u_forget * prev.h + params.b_forget);
  k.i = detail::sigmoid(params.w_input * x + params.u_input * prev.h + params.b_input);
  k.cand = (params.w_cand * x + params.u_cand * prev.h + params.b_cand).array().tanh().matrix();
  k.c = k.i.cwiseProduct(k.cand) + k.f.cwiseProduct(prev.c);
  k.o = detail::sigmoid(params.w_output * x + params.u_output * prev.h + params.b_output);
  k.h = k.o.cwiseProduct(k.c.array().tanh().matrix());
  k.y = project(params, k.h);
  return {LstmState{k.h, k.c}, std::move(k)};
}

/// Everything BPTT needs from a forward pass over one sequence; column t holds
/// step t. Previous-step state for t = 0 is (h0, c0).
struct SequenceCache {
  Matrix x;  // input x T
  Vector h0, c0;
  Matrix f, i, cand, c, o, h;  // hidden x T
  Matrix y;                    // output x T

  Index steps() const noexcept { return x.cols(); }

  StepCache step(Index t) const {
    StepCache k;
    k.x = x.col(t);
    k.h_prev = t ? Vector(h.col(t - 1)) : h0;
    k.c_prev = t ? Vector(c.col(t - 1)) : c0;
    k.f = f.col(t);
    k.i = i.col(t);
    k.cand = cand.col(t);
    k.c = c.col(t);
    k.o = o.col(t);
    k.h = h.col(t);
    k.y = y.col(t);
    return k;
  }

  LstmState final_state() const { return {h.col(steps() - 1), c.col(steps() - 1)}; }
};

struct SequenceOutput {
  Matrix outputs;  // T x output
  SequenceCache cache;
};

/// Runs the cell over inputs (T x input), starting from `initial` (zeros if
/// absent), projecting every step.
inline SequenceOutput sequence_forward(const LstmParams& params, const Eigen::Ref<const Matrix>& inputs,
                                       const std::optional<LstmState>& initial = std::nullopt) {
  const auto n = params.hidden_dim();
  const auto steps = inputs.rows();
  if (steps < 1) throw DataError("sequence must have at least one step");
  if (inputs.cols() != params.input_dim()) throw DataError("sequence input width does not match input dimension");

  SequenceCache k;
  k.x = inputs.transpose();
  if (initial) {
    detail::check_state(params, *initial);
    k.h0 = initial->h;
    k.c0 = initial->c;
  } else {
    k.h0 = Vector::Zero(n);
    k.c0 = Vector::Zero(n);
  }

  Matrix w_all(4 * n, params.input_dim());
  w_all << params.w_forget, params.w_input, params.w_cand, params.w_output;
  Matrix u_all(4 * n, n);
  u_all << params.u_forget, params.u_input, params.u_cand, params.u_output;
  Vector b_all(4 * n);
  b_all << params.b_forget, params.b_input, params.b_cand, params.b_output;

  Matrix pre = w_all * k.x;
  pre.colwise() += b_all;

  for (Matrix* m : {&k.f, &k.i, &k.cand, &k.c, &k.o, &k.h}) m->resize(n, steps);
  Vector a(4 * n);
  Vector h_prev = k.h0;
  Vector c_prev = k.c0;
  for (Index t = 0; t < steps; ++t) {
    a.noalias() = pre.col(t);
    a.noalias() += u_all * h_prev;
    for (Index j = 0; j < n; ++j) {
      const double fg = detail::sigmoid(a(j));
      const double ig = detail::sigmoid(a(n + j));
      const double cg = std::tanh(a(2 * n + j));
      const double og = detail::sigmoid(a(3 * n + j));
      const double cs = ig * cg + fg * c_prev(j);
      k.f(j, t) = fg;
      k.i(j, t) = ig;
      k.cand(j, t) = cg;
      k.c(j, t) = cs;
      k.o(j, t) = og;
      k.h(j, t) = og * std::tanh(cs);
    }
    h_prev = k.h.col(t);
    c_prev = k.c.col(t);
  }
  k.y = params.proj_w * k.h;
  k.y.colwise() += params.proj_b;
  Matrix outputs = k.y.transpose();
  return SequenceOutput{std::move(outputs), std::move(k)};
}

struct GradientResult {
  LstmParams grads;
  double loss = 0.0;  // mean squared error + l2 * sum ||U||^2
};

/// Exact gradients of mean-over-steps-and-outputs squared error plus
/// l2_recurrent * sum of squared recurrent weights.
inline GradientResult bptt(const LstmParams& params, const SequenceCache& cache,
                           const Eigen::Ref<const Matrix>& targets, double l2_recurrent) {
  const auto n = params.hidden_dim();
  const auto steps = cache.steps();
  if (targets.rows() != steps) {
    throw DataError("target length " + std::to_string(targets.rows()) + " does not match cache length " +
                    std::to_string(steps));
  }
  if (targets.cols() != params.output_dim()) throw DataError("target width does not match output dimension");

  const double count = static_cast<double>(steps * params.output_dim());
  const Matrix err = cache.y - targets.transpose();  // output x T
  GradientResult out;
  out.loss = err.squaredNorm() / count + l2_recurrent * params.recurrent_norm2();
  auto& g = out.grads;
  g = params.zeros_like();

  const Matrix dy = (2.0 / count) * err;
  g.proj_w.noalias() = dy * cache.h.transpose();
  g.proj_b = dy.rowwise().sum();
  const Matrix dh_out = params.proj_w.transpose() * dy;

  Matrix u_all(4 * n, n);
  u_all << params.u_forget, params.u_input, params.u_cand, params.u_output;

  Matrix da(4 * n, steps);
  Vector dh_next = Vector::Zero(n);
  Vector dc_next = Vector::Zero(n);
  for (Index t = steps - 1; t >= 0; --t) {
    for (Index j = 0; j < n; ++j) {
      const double c_prev = t ? cache.c(j, t - 1) : cache.c0(j);
      const double fg = cache.f(j, t), ig = cache.i(j, t), cg = cache.cand(j, t), og = cache.o(j, t);
      const double tc = std::tanh(cache.c(j, t));
      const double dh = dh_out(j, t) + dh_next(j);
      const double dc = dh * og * (1.0 - tc * tc) + dc_next(j);
      da(j, t) = dc * c_prev * fg * (1.0 - fg);
      da(n + j, t) = dc * cg * ig * (1.0 - ig);
      da(2 * n + j, t) = dc * ig * (1.0 - cg * cg);
      da(3 * n + j, t) = dh * tc * og * (1.0 - og);
      dc_next(j) = dc * fg;
    }
    dh_next.noalias() = u_all.transpose() * da.col(t);
  }

  Matrix h_prev(n, steps);
  h_prev.col(0) = cache.h0;
  if (steps > 1) h_prev.rightCols(steps - 1) = cache.h.leftCols(steps - 1);

  const Matrix dw = da * cache.x.transpose();
  const Matrix du = da * h_prev.transpose();
  const Vector db = da.rowwise().sum();
  Matrix* gw[] = {&g.w_forget, &g.w_input, &g.w_cand, &g.w_output};
  Matrix* gu[] = {&g.u_forget, &g.u_input, &g.u_cand, &g.u_output};
  Vector* gb[] = {&g.b_forget, &g.b_input, &g.b_cand, &g.b_output};
  const Matrix* pu[] = {&params.u_forget, &params.u_input, &params.u_cand, &params.u_output};
  for (int q = 0; q < 4; ++q) {
    *gw[q] = dw.middleRows(q * n, n);
    *gu[q] = du.middleRows(q * n, n) + (2.0 * l2_recurrent) * *pu[q];
    *gb[q] = db.segment(q * n, n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  LstmParams m;
  LstmParams v;
  std::int64_t step = 0;

  static AdamState for_params(const LstmParams& p) { return {p.zeros_like(), p.zeros_like(), 0}; }
};

/// One bias-corrected Adam update of a single tensor; `step` is the 1-based
/// count including this update.
template <class W, class G>
inline void adam_update(W& w, const G& g, W& m, W& v, std::int64_t step, double lr, const AdamConfig& cfg) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
}

inline void adam_step(LstmParams& params, const LstmParams& grads, AdamState& state, double lr,
                      const AdamConfig& cfg = {}) {
  ++state.step;
  LstmParams::zip(
      [&](const char*, auto& w, const auto& g, auto& m, auto& v) { adam_update(w, g, m, v, state.step, lr, cfg); },
      params, grads, state.m, state.v);
}

// ---------------------------------------------------------------------------
// Training

/// One input/target series pair; the hidden state restarts from zero at its
/// first row.
struct Sequence {
  Matrix inputs;   // T x input
  Matrix targets;  // T x output
};

/// Cuts an aligned input/target pair into consecutive pieces of `length` rows
/// (0 keeps it whole). A short tail is kept as its own piece.
inline std::vector<Sequence> chunk(const Matrix& inputs, const Matrix& targets, Index length) {
  if (inputs.rows() != targets.rows()) throw DataError("inputs and targets have different lengths");
  std::vector<Sequence> out;
  const auto total = inputs.rows();
  const auto step = length > 0 ? length : total;
  for (Index begin = 0; begin < total; begin += step) {
    const auto count = std::min(step, total - begin);
    out.push_back(Sequence{inputs.middleRows(begin, count), targets.middleRows(begin, count)});
  }
  return out;
}

struct TrainConfig {
  double initial_lr = 1e-2;
  double lr_decay_factor = 10.0;
  Index plateau_patience = 3;
  std::optional<double> min_lr;  // defaults to initial_lr / 1e4
  Index max_epochs = 100;
  double l2_recurrent = 0.0;
  AdamConfig adam;
  std::uint64_t seed = 0;
  Index tbptt_len = 0;  // 0 = full unroll

  double effective_min_lr() const { return min_lr.value_or(initial_lr / 1e4); }

  void validate() const {
    const double floor = effective_min_lr();
    if (!(floor > 0.0) || !(initial_lr > floor)) throw DataError("need initial_lr > min_lr > 0");
    if (!(lr_decay_factor > 1.0)) throw DataError("lr_decay_factor must exceed 1");
    if (plateau_patience < 1) throw DataError("plateau_patience must be >= 1");
    if (max_epochs < 0 || tbptt_len < 0) throw DataError("max_epochs and tbptt_len must be non-negative");
    if (!(l2_recurrent >= 0.0)) throw DataError("l2_recurrent must be non-negative");
  }
};

struct TrainLogEntry {
  Index epoch = 0;
  std::int64_t iteration = 0;  // cumulative optimizer steps
  double wall_seconds = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double test_loss = std::numeric_limits<double>::quiet_NaN();
  double lr = 0.0;  // rate used during this epoch
};

using TrainLog = std::vector<TrainLogEntry>;

inline std::string train_log_csv(const TrainLog& log) {
  std::string out = "epoch,iteration,wall_seconds,train_loss,val_loss,test_loss,lr\n";
  auto num = [](double v) { return r2n2::detail::format_double(v); };
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + ',' + std::to_string(e.iteration) + ',' + num(e.wall_seconds) + ',' +
           num(e.train_loss) + ',' + num(e.val_loss) + ',' + num(e.test_loss) + ',' + num(e.lr) + '\n';
  }
  return out;
}

/// Mean squared error over every step and output of a set of sequences.
inline double evaluate_mse(const LstmParams& params, const std::vector<Sequence>& seqs) {
  double sse = 0.0;
  double count = 0.0;
  for (const auto& s : seqs) {
    auto fwd = sequence_forward(params, s.inputs);
    sse += (fwd.outputs - s.targets).squaredNorm();
    count += static_cast<double>(s.targets.size());
  }
  return count > 0.0 ? sse / count : std::numeric_limits<double>::quiet_NaN();
}

/// Scores the current parameters for the test_loss column.
using TestProbe = std::function<double(const LstmParams&)>;

struct TrainResult {
  LstmParams params;  // best validation loss seen (initial params if no epoch ran)
  TrainLog log;
  Index best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

inline TrainResult train(const LstmParams& initial, const std::vector<Sequence>& train_seqs,
                         const std::vector<Sequence>& val_seqs, const std::vector<Sequence>& test_seqs,
                         const TrainConfig& cfg, const TestProbe& probe = {}) {
  cfg.validate();
  initial.validate();
  if (train_seqs.empty()) throw DataError("training sequence set is empty");
  if (val_seqs.empty()) throw DataError("validation sequence set is empty");

  using Clock = std::chrono::steady_clock;
  TrainResult result{initial, {}, 0, std::numeric_limits<double>::infinity()};
  LstmParams params = initial;
  AdamState adam = AdamState::for_params(params);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_seqs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  double lr = cfg.initial_lr;
  const double min_lr = cfg.effective_min_lr();
  Index bad_epochs = 0;
  double elapsed = 0.0;

  for (Index epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = Clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double sse = 0.0;
    double count = 0.0;
    for (auto idx : order) {
      const auto& seq = train_seqs[idx];
      const auto total = seq.inputs.rows();
      const auto window = (cfg.tbptt_len > 0 && cfg.tbptt_len < total) ? cfg.tbptt_len : total;
      std::optional<LstmState> carry;
      for (Index begin = 0; begin < total; begin += window) {
        const auto len = std::min(window, total - begin);
        auto fwd = sequence_forward(params, seq.inputs.middleRows(begin, len), carry);
        auto gr = bptt(params, fwd.cache, seq.targets.middleRows(begin, len), cfg.l2_recurrent);
        if (!std::isfinite(gr.loss) || !gr.grads.all_finite()) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", sequence " +
                             std::to_string(idx) + ", offset " + std::to_string(begin) + " (lr " +
                             std::to_string(lr) + ")");
        }
        const double data_loss = gr.loss - cfg.l2_recurrent * params.recurrent_norm2();
        sse += data_loss * static_cast<double>(seq.targets.middleRows(begin, len).size());
        count += static_cast<double>(seq.targets.middleRows(begin, len).size());
        carry = fwd.cache.final_state();
        adam_step(params, gr.grads, adam, lr, cfg.adam);
      }
    }
    const double val_loss = evaluate_mse(params, val_seqs);
    if (!std::isfinite(val_loss)) {
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    elapsed += std::chrono::duration<double>(Clock::now() - t0).count();

    TrainLogEntry entry;
    entry.epoch = epoch;
    entry.iteration = adam.step;
    entry.wall_seconds = elapsed;
    entry.train_loss = sse / count;
    entry.val_loss = val_loss;
    entry.lr = lr;
    if (probe) {
      entry.test_loss = probe(params);
    } else if (!test_seqs.empty()) {
      entry.test_loss = evaluate_mse(params, test_seqs);
    }
    result.log.push_back(entry);

    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      result.params = params;
      bad_epochs = 0;
    } else if (++bad_epochs >= cfg.plateau_patience) {
      lr /= cfg.lr_decay_factor;
      bad_epochs = 0;
    }
    if (lr < min_lr) break;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Gradient check

inline double sequence_loss(const LstmParams& params, const Sequence& seq, double l2_recurrent) {
  auto fwd = sequence_forward(params, seq.inputs);
  return (fwd.outputs - seq.targets).squaredNorm() / static_cast<double>(seq.targets.size()) +
         l2_recurrent * params.recurrent_norm2();
}

/// Worst relative disagreement between BPTT and central differences over every
/// parameter entry; denominators are floored at 1e-12. The loss difference is
/// accumulated per output, sum (y+ - y-)(y+ + y- - 2t), rather than as a
/// difference of two totals, which keeps tiny gradient entries resolvable.
inline double grad_check(const LstmParams& params, const Sequence& seq, double eps = 1e-5,
                         double l2_recurrent = 0.0) {
  auto fwd = sequence_forward(params, seq.inputs);
  auto analytic = bptt(params, fwd.cache, seq.targets, l2_recurrent).grads;
  LstmParams probe = params;
  const double scale = 1.0 / static_cast<double>(seq.targets.size());
  double worst = 0.0;
  LstmParams::zip(
      [&](const char* name, auto& w, const auto& g) {
        const bool recurrent = name[0] == 'u' && name[1] == '_';
        for (Index idx = 0; idx < w.size(); ++idx) {
          double& entry = w.data()[idx];
          const double saved = entry;
          entry = saved + eps;
          const Matrix up = sequence_forward(probe, seq.inputs).outputs;
          entry = saved - eps;
          const Matrix down = sequence_forward(probe, seq.inputs).outputs;
          entry = saved;
          double diff = ((up - down).array() * (up + down - 2.0 * seq.targets).array()).sum() * scale;
          if (recurrent) diff += l2_recurrent * 4.0 * saved * eps;
          const double numeric = diff / (2.0 * eps);
          const double a = g.data()[idx];
          const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
          worst = std::max(worst, std::abs(a - numeric) / denom);
        }
      },
      probe, analytic);
  return worst;
}

}  // namespace r2n2::lstm
