#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "r2n2/baseline.hpp"
#include "r2n2/hybrid.hpp"
#include "r2n2/lstm.hpp"
#include "r2n2/var.hpp"

// JSON layouts. Matrices are nested row-major arrays, vectors flat arrays.
//
//   VarModel   {p, k, h, lambda, intercept, coeffs: [k][p][p]}
//   LstmParams {input_dim, hidden_dim, output_dim, w_forget, ..., proj_w, proj_b}
//   R2n2Model  {config, base: VarModel, rnn: LstmParams}
//   RnnForecaster {kind: "rnn", horizon, rnn: LstmParams}
namespace r2n2::io {

using Json = nlohmann::json;

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Matrix matrix_from_json(const Json& j, Index rows, Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows) throw DataError(what + ": expected " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw DataError(what + ": row " + std::to_string(i) + " should have " + std::to_string(cols) + " entries");
    }
    for (Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline Vector vector_from_json(const Json& j, Index size, const std::string& what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != size) throw DataError(what + ": expected " + std::to_string(size) + " entries");
  Vector v(size);
  for (Index i = 0; i < size; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

// --- VarModel --------------------------------------------------------------

inline Json to_json(const var::VarModel& m) {
  Json coeffs = Json::array();
  for (const auto& a : m.coeffs) coeffs.push_back(matrix_to_json(a));
  return Json{{"p", m.features()}, {"k", m.k},           {"h", m.h},
              {"lambda", m.lambda}, {"intercept", vector_to_json(m.intercept)}, {"coeffs", std::move(coeffs)}};
}

inline var::VarModel var_from_json(const Json& j) {
  try {
    var::VarModel m;
    const auto p = j.at("p").get<Index>();
    m.k = j.at("k").get<Index>();
    m.h = j.at("h").get<Index>();
    m.lambda = j.at("lambda").get<double>();
    m.intercept = vector_from_json(j.at("intercept"), p, "intercept");
    const auto& coeffs = j.at("coeffs");
    if (!coeffs.is_array() || static_cast<Index>(coeffs.size()) != m.k) throw DataError("coeffs: expected k blocks");
    for (const auto& block : coeffs) m.coeffs.push_back(matrix_from_json(block, p, p, "coeffs block"));
    m.validate();
    return m;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed VAR model JSON: ") + e.what());
  }
}

// --- LstmParams ------------------------------------------------------------

inline Json to_json(const lstm::LstmParams& p) {
  Json j{{"input_dim", p.input_dim()}, {"hidden_dim", p.hidden_dim()}, {"output_dim", p.output_dim()}};
  lstm::LstmParams::zip(
      [&j](const char* name, const auto& t) {
        if constexpr (std::decay_t<decltype(t)>::ColsAtCompileTime == 1) {
          j[name] = vector_to_json(t);
        } else {
          j[name] = matrix_to_json(t);
        }
      },
      p);
  return j;
}

inline lstm::LstmParams lstm_from_json(const Json& j) {
  try {
    const auto p_in = j.at("input_dim").get<Index>();
    const auto n = j.at("hidden_dim").get<Index>();
    const auto p_out = j.at("output_dim").get<Index>();
    auto p = lstm::LstmParams::zeros(p_in, n, p_out);
    lstm::LstmParams::zip(
        [&j](const char* name, auto& t) {
          if constexpr (std::decay_t<decltype(t)>::ColsAtCompileTime == 1) {
            t = vector_from_json(j.at(name), t.size(), name);
          } else {
            t = matrix_from_json(j.at(name), t.rows(), t.cols(), name);
          }
        },
        p);
    p.validate();
    return p;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed LSTM parameter JSON: ") + e.what());
  }
}

// --- configs ---------------------------------------------------------------

inline Json to_json(const lstm::TrainConfig& c) {
  Json j{{"initial_lr", c.initial_lr},     {"lr_decay_factor", c.lr_decay_factor},
         {"plateau_patience", c.plateau_patience}, {"max_epochs", c.max_epochs},
         {"l2_recurrent", c.l2_recurrent}, {"adam_beta1", c.adam.beta1},
         {"adam_beta2", c.adam.beta2},     {"adam_epsilon", c.adam.epsilon},
         {"seed", c.seed},                 {"tbptt_len", c.tbptt_len}};
  j["min_lr"] = c.effective_min_lr();
  return j;
}

inline lstm::TrainConfig train_config_from_json(const Json& j, lstm::TrainConfig c = {}) {
  try {
    c.initial_lr = j.value("initial_lr", c.initial_lr);
    c.lr_decay_factor = j.value("lr_decay_factor", c.lr_decay_factor);
    c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
    if (j.contains("min_lr") && !j["min_lr"].is_null()) c.min_lr = j["min_lr"].get<double>();
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.l2_recurrent = j.value("l2_recurrent", c.l2_recurrent);
    c.adam.beta1 = j.value("adam_beta1", c.adam.beta1);
    c.adam.beta2 = j.value("adam_beta2", c.adam.beta2);
    c.adam.epsilon = j.value("adam_epsilon", c.adam.epsilon);
    c.seed = j.value("seed", c.seed);
    c.tbptt_len = j.value("tbptt_len", c.tbptt_len);
    c.validate();
    return c;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed training config: ") + e.what());
  }
}

inline Json to_json(const hybrid::R2n2Config& c) {
  return Json{{"horizon", c.horizon},
              {"augment_with_input", c.augment_with_input},
              {"base_k", c.base_k},
              {"base_lambda", c.base_lambda},
              {"hidden_dim", c.hidden_dim},
              {"sequence_length", c.sequence_length},
              {"zero_init_projection", c.zero_init_projection},
              {"train", to_json(c.train)}};
}

inline hybrid::R2n2Config r2n2_config_from_json(const Json& j) {
  try {
    hybrid::R2n2Config c;
    c.horizon = j.value("horizon", c.horizon);
    c.augment_with_input = j.value("augment_with_input", c.augment_with_input);
    c.base_k = j.value("base_k", c.base_k);
    c.base_lambda = j.value("base_lambda", c.base_lambda);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.sequence_length = j.value("sequence_length", c.sequence_length);
    c.zero_init_projection = j.value("zero_init_projection", c.zero_init_projection);
    if (j.contains("train")) c.train = train_config_from_json(j["train"]);
    c.validate();
    return c;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed R2N2 config: ") + e.what());
  }
}

// --- R2n2Model -------------------------------------------------------------

inline Json to_json(const hybrid::R2n2Model& m) {
  return Json{{"config", to_json(m.config)}, {"base", to_json(m.base)}, {"rnn", to_json(m.rnn)}};
}

inline hybrid::R2n2Model r2n2_from_json(const Json& j) {
  try {
    hybrid::R2n2Model m{var_from_json(j.at("base")), lstm_from_json(j.at("rnn")), r2n2_config_from_json(j.at("config"))};
    m.validate();
    return m;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed R2N2 model JSON: ") + e.what());
  }
}

// --- RnnForecaster -------------------------------------------------------

inline Json to_json(const baseline::RnnForecaster& m) {
  return Json{{"kind", "rnn"}, {"horizon", m.horizon}, {"rnn", to_json(m.rnn)}};
}

inline baseline::RnnForecaster rnn_forecaster_from_json(const Json& j) {
  try {
    baseline::RnnForecaster m{lstm_from_json(j.at("rnn")), j.at("horizon").get<Index>()};
    if (m.horizon < 1) throw DataError("RNN forecaster horizon must be >= 1");
    if (m.rnn.output_dim() != m.rnn.input_dim()) throw DataError("RNN forecaster must map p features to p features");
    return m;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed RNN model JSON: ") + e.what());
  }
}

// --- files -----------------------------------------------------------------

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace r2n2::io
