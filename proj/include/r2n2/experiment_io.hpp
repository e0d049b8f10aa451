#pragma once

#include <string>
#include <vector>

#include "r2n2/experiment.hpp"
#include "r2n2/serialization.hpp"
#include "r2n2/synthetic.hpp"

// Experiment configs and reports as JSON.
//
// Generator spec:
//   {kind: "hybrid"|"var", p, length, burn_in, a, intercept (var only),
//    amplitude, lag, noise_std (number or per-feature array), seed, initial}
// `a` defaults to the built-in 4x4 benchmark matrix when p is 4.
//
// Experiment config (every key optional; "preset": "benchmark" starts from
// the default benchmark instead of library defaults):
//   {data: {csv: path} | {generator: spec}, split: {train, val, test},
//    horizon, deseasonalize_period, models, var: {k_max, lambda_grid},
//    rnn: {hidden_sizes, train}, r2n2: {hidden_sizes, augment_with_input,
//    base_k, base_lambda, zero_init_projection, train}, sequence_length,
//    seeds, threads}
namespace r2n2::io {

struct GeneratorSpec {
  std::string kind = "hybrid";
  synthetic::HybridProcessSpec process;
  Vector intercept;  // var kind only; zeros if empty

  TimeSeries generate() const {
    if (kind == "hybrid") return synthetic::gen_hybrid_data(process);
    const auto p = process.features();
    const Vector c = intercept.size() == 0 ? Vector::Zero(p) : intercept;
    return synthetic::gen_var_data(process.a, c, process.noise, process.length, process.burn_in, process.initial);
  }
};

inline GeneratorSpec generator_from_json(const Json& j) {
  try {
    GeneratorSpec g;
    g.kind = j.value("kind", g.kind);
    if (g.kind != "hybrid" && g.kind != "var") throw DataError("generator kind must be 'hybrid' or 'var'");
    auto& s = g.process;
    s = harness::benchmark_process();
    if (g.kind == "var") s.amplitude = 0.0;
    Index p = j.value("p", Index{0});
    if (j.contains("a")) {
      const auto& a = j["a"];
      if (!a.is_array() || a.empty()) throw DataError("generator 'a' must be a square nested array");
      const auto rows = static_cast<Index>(a.size());
      if (p == 0) p = rows;
      s.a = matrix_from_json(a, p, p, "generator a");
    } else if (p != 0 && p != 4) {
      throw DataError("generator 'a' is required unless p is 4");
    }
    p = s.a.rows();
    s.length = j.value("length", s.length);
    s.burn_in = j.value("burn_in", s.burn_in);
    s.amplitude = j.value("amplitude", s.amplitude);
    s.lag = j.value("lag", s.lag);
    s.noise.seed = j.value("seed", s.noise.seed);
    if (j.contains("noise_std")) {
      const auto& n = j["noise_std"];
      s.noise.std = n.is_array() ? n.get<std::vector<double>>() : std::vector<double>{n.get<double>()};
    }
    if (j.contains("initial")) s.initial = vector_from_json(j["initial"], p, "generator initial");
    if (j.contains("intercept")) {
      if (g.kind != "var") throw DataError("'intercept' applies to the var generator only");
      g.intercept = vector_from_json(j["intercept"], p, "generator intercept");
    }
    if (g.kind == "var" && s.amplitude != 0.0) throw DataError("var generator has no nonlinear term");
    s.validate();
    return g;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed generator spec: ") + e.what());
  }
}

inline Json to_json(const synthetic::HybridProcessSpec& s) {
  Json j{{"kind", "hybrid"},         {"p", s.features()}, {"length", s.length},     {"burn_in", s.burn_in},
         {"a", matrix_to_json(s.a)}, {"amplitude", s.amplitude}, {"lag", s.lag}, {"noise_std", s.noise.std},
         {"seed", s.noise.seed}};
  if (s.initial) j["initial"] = vector_to_json(*s.initial);
  return j;
}

inline harness::ExperimentConfig experiment_from_json(const Json& j) {
  try {
    auto cfg = j.value("preset", std::string{}) == "benchmark" ? harness::default_benchmark()
                                                                : harness::ExperimentConfig{};
    if (j.contains("preset") && j["preset"] != "benchmark") throw DataError("unknown preset");
    if (j.contains("data")) {
      const auto& d = j["data"];
      cfg.data = {};
      if (d.contains("csv")) {
        cfg.data.csv = d["csv"].get<std::string>();
      } else if (d.contains("generator")) {
        auto g = generator_from_json(d["generator"]);
        if (g.kind != "hybrid") throw DataError("experiment generators must be of kind 'hybrid' (amplitude 0 is linear)");
        cfg.data.generator = g.process;
      } else {
        throw DataError("data needs 'csv' or 'generator'");
      }
    }
    if (j.contains("split")) {
      const auto& s = j["split"];
      cfg.split.train_fraction = s.value("train", cfg.split.train_fraction);
      cfg.split.val_fraction = s.value("val", cfg.split.val_fraction);
      cfg.split.test_fraction = s.value("test", cfg.split.test_fraction);
    }
    cfg.horizon = j.value("horizon", cfg.horizon);
    cfg.deseasonalize_period = j.value("deseasonalize_period", cfg.deseasonalize_period);
    if (j.contains("models")) cfg.models = j["models"].get<std::vector<std::string>>();
    if (j.contains("var")) {
      const auto& v = j["var"];
      cfg.var.k_max = v.value("k_max", cfg.var.k_max);
      if (v.contains("lambda_grid")) cfg.var.lambda_grid = v["lambda_grid"].get<std::vector<double>>();
    }
    if (j.contains("rnn")) {
      const auto& r = j["rnn"];
      if (r.contains("hidden_sizes")) cfg.rnn.hidden_sizes = r["hidden_sizes"].get<std::vector<Index>>();
      if (r.contains("train")) cfg.rnn.train = train_config_from_json(r["train"], cfg.rnn.train);
    }
    if (j.contains("r2n2")) {
      const auto& r = j["r2n2"];
      if (r.contains("hidden_sizes")) cfg.r2n2.hidden_sizes = r["hidden_sizes"].get<std::vector<Index>>();
      cfg.r2n2.augment_with_input = r.value("augment_with_input", cfg.r2n2.augment_with_input);
      cfg.r2n2.base_k = r.value("base_k", cfg.r2n2.base_k);
      if (r.contains("base_lambda") && !r["base_lambda"].is_null()) cfg.r2n2.base_lambda = r["base_lambda"].get<double>();
      cfg.r2n2.zero_init_projection = r.value("zero_init_projection", cfg.r2n2.zero_init_projection);
      if (r.contains("train")) cfg.r2n2.train = train_config_from_json(r["train"], cfg.r2n2.train);
    }
    cfg.sequence_length = j.value("sequence_length", cfg.sequence_length);
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    cfg.threads = j.value("threads", cfg.threads);
    if (cfg.sequence_length < 1) throw DataError("sequence_length must be >= 1");
    cfg.validate();
    return cfg;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed experiment config: ") + e.what());
  }
}

inline Json to_json(const harness::ExperimentConfig& c) {
  Json data = Json::object();
  if (c.data.csv) data["csv"] = c.data.csv->string();
  if (c.data.generator) data["generator"] = to_json(*c.data.generator);
  Json r2n2{{"hidden_sizes", c.r2n2.hidden_sizes},
            {"augment_with_input", c.r2n2.augment_with_input},
            {"base_k", c.r2n2.base_k},
            {"zero_init_projection", c.r2n2.zero_init_projection},
            {"train", to_json(c.r2n2.train)}};
  r2n2["base_lambda"] = c.r2n2.base_lambda ? Json(*c.r2n2.base_lambda) : Json(nullptr);
  return Json{{"data", std::move(data)},
              {"split", {{"train", c.split.train_fraction}, {"val", c.split.val_fraction}, {"test", c.split.test_fraction}}},
              {"horizon", c.horizon},
              {"deseasonalize_period", c.deseasonalize_period},
              {"models", c.models},
              {"var", {{"k_max", c.var.k_max}, {"lambda_grid", c.var.lambda_grid}}},
              {"rnn", {{"hidden_sizes", c.rnn.hidden_sizes}, {"train", to_json(c.rnn.train)}}},
              {"r2n2", std::move(r2n2)},
              {"sequence_length", c.sequence_length},
              {"seeds", c.seeds},
              {"threads", c.threads}};
}

// --- reports ---------------------------------------------------------------

inline Json to_json(const var::OrderSearchResult& r) {
  Json table = Json::array();
  for (const auto& e : r.table) {
    Json row{{"k", e.k}, {"lambda", e.lambda}};
    row["val_mrse"] = e.val_mrse ? Json(*e.val_mrse) : Json(nullptr);
    if (!e.note.empty()) row["note"] = e.note;
    table.push_back(std::move(row));
  }
  return Json{{"best_k", r.best_k}, {"best_lambda", r.best_lambda}, {"best_val_mrse", r.best_mrse}, {"table", std::move(table)}};
}

/// With include_wall_clock false the output depends only on the config, so
/// repeated runs can be compared byte for byte.
inline Json to_json(const harness::EvalReport& r, bool include_wall_clock = true) {
  Json cells = Json::array();
  for (const auto& c : r.cells) {
    Json j{{"model", c.model},
           {"hidden", c.hidden},
           {"seed", c.seed},
           {"mrse", c.mrse},
           {"re", c.re},
           {"epochs_to_best", c.epochs_to_best},
           {"epochs_run", c.epochs_run}};
    if (c.model != harness::kRnn) {
      j["k"] = c.k;
      j["lambda"] = c.lambda;
    }
    if (include_wall_clock) {
      j["train_seconds"] = c.train_seconds;
      j["var_fit_seconds"] = c.var_fit_seconds;
    }
    if (c.error) j["error"] = *c.error;
    cells.push_back(std::move(j));
  }
  Json aggs = Json::array();
  for (const auto& a : r.aggregates) {
    aggs.push_back(Json{{"model", a.model},
                        {"hidden", a.hidden},
                        {"n", a.n},
                        {"mrse_mean", a.mrse_mean},
                        {"mrse_std", a.mrse_std},
                        {"re_mean", a.re_mean},
                        {"re_std", a.re_std}});
  }
  Json out{{"kind", r.kind},
           {"eval_window", {{"first_test_row", r.eval_first_test_row}, {"rows", r.eval_rows}}},
           {"cells", std::move(cells)},
           {"aggregates", std::move(aggs)}};
  if (r.order_search) out["var_order_search"] = to_json(*r.order_search);
  if (!r.timing.empty()) {
    Json timing = Json::array();
    for (const auto& t : r.timing) {
      timing.push_back(Json{{"model", t.model},
                            {"hidden", t.hidden},
                            {"epoch1_mrse", t.epoch1_mrse},
                            {"final_mrse", t.final_mrse},
                            {"epochs_to_within_5pct", t.epochs_to_within_5pct},
                            {"mean_epochs_to_within_5pct", t.mean_epochs_to_within_5pct}});
    }
    out["timing"] = std::move(timing);
  }
  if (r.kind == "sweep") {
    // smallest R2N2 against largest RNN-only
    const harness::Aggregate* small = nullptr;
    const harness::Aggregate* large = nullptr;
    for (const auto& a : r.aggregates) {
      if (a.model == harness::kR2n2 && (!small || a.hidden < small->hidden)) small = &a;
      if (a.model == harness::kRnn && (!large || a.hidden > large->hidden)) large = &a;
    }
    if (small && large) {
      out["smallest_r2n2_vs_largest_rnn"] = Json{{"r2n2_hidden", small->hidden},
                                                 {"r2n2_mrse_mean", small->mrse_mean},
                                                 {"rnn_hidden", large->hidden},
                                                 {"rnn_mrse_mean", large->mrse_mean},
                                                 {"r2n2_not_worse", small->mrse_mean <= large->mrse_mean}};
    }
  }
  return out;
}

}  // namespace r2n2::io
