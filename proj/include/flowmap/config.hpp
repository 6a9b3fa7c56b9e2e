#pragma once

// JSON run configuration for the CLI. A config names either a registered
// scenario (with optional parameter overrides) or an explicit problem block
// with the structure matrices, coefficients, glue, initial state and grid
// spelled out. Matrices are nested arrays, row-major.

#include "flowmap/mapping.hpp"
#include "flowmap/scenarios.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <string>
#include <utility>

namespace flowmap {

/// A config problem: names the offending field where possible.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& message, std::string field = {})
      : std::runtime_error(field.empty() ? message : message + " (field: " + field + ")"),
        field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct RunConfig {
  std::optional<std::string> scenario;
  scenarios::ParamMap scenario_params;
  std::optional<MappingProblem> problem;
  std::string output_dir = ".";
  double tolerance = 1e-6;
};

namespace config_detail {

using nlohmann::json;

inline double require_number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError("expected a number", field);
  return j.get<double>();
}

inline int require_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ConfigError("expected an integer", field);
  return j.get<int>();
}

inline int require_sign(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ConfigError("expected -1 or +1", field);
  const int v = j.get<int>();
  if (v != -1 && v != 1) throw ConfigError("expected -1 or +1", field);
  return v;
}

inline Mat parse_matrix(const json& j, int rows, int cols, const std::string& field) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw ConfigError("expected " + std::to_string(rows) + " rows", field);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw ConfigError("expected " + std::to_string(cols) + " columns", field);
    for (int c = 0; c < cols; ++c)
      m(i, c) = require_number(row[static_cast<std::size_t>(c)],
                               field + "[" + std::to_string(i) + "][" + std::to_string(c) + "]");
  }
  if (!all_finite(m)) throw ConfigError("matrix entries must be finite", field);
  return m;
}

inline Vec parse_vector(const json& j, int size, const std::string& field) {
  if (!j.is_array() || static_cast<int>(j.size()) != size)
    throw ConfigError("expected " + std::to_string(size) + " entries", field);
  Vec v(size);
  for (int i = 0; i < size; ++i)
    v[i] = require_number(j[static_cast<std::size_t>(i)], field + "[" + std::to_string(i) + "]");
  if (!all_finite(v)) throw ConfigError("vector entries must be finite", field);
  return v;
}

/// Coefficient formula ids usable in place of an explicit matrix.
inline CoefficientProvider provider_from_formula(const std::string& id, int n,
                                                 const std::string& field) {
  if (id == "cubic") {
    // H_11(state) = state^1; the quadratic form becomes 0.5 (Q^1)^3.
    auto eval = [n](const Vec& s) {
      Mat m = Mat::Zero(2 * n, 2 * n);
      m(0, 0) = s[0];
      return m;
    };
    auto deriv = [n](const Vec&, int l) {
      Mat m = Mat::Zero(2 * n, 2 * n);
      if (l == 0) m(0, 0) = 1.0;
      return m;
    };
    return CoefficientProvider::from_functions(n, eval, deriv);
  }
  throw ConfigError("unknown coefficient formula '" + id + "'", field);
}

inline CoefficientProvider parse_provider(const json& block, int n, const std::string& key) {
  const std::string formula_key = key + "_formula";
  const bool has_matrix = block.contains(key);
  const bool has_formula = block.contains(formula_key);
  if (has_matrix == has_formula)
    throw ConfigError("exactly one of '" + key + "' and '" + formula_key + "' is required",
                      key);
  if (has_matrix)
    return CoefficientProvider::constant(parse_matrix(block.at(key), 2 * n, 2 * n, key));
  const json& f = block.at(formula_key);
  if (!f.is_string()) throw ConfigError("expected a formula id string", formula_key);
  return provider_from_formula(f.get<std::string>(), n, formula_key);
}

inline MappingProblem parse_problem(const json& block) {
  if (!block.is_object()) throw ConfigError("expected an object", "problem");
  if (!block.contains("n")) throw ConfigError("missing field", "n");
  const int n = require_int(block.at("n"), "n");
  if (n < 1) throw ConfigError("n must be positive", "n");

  for (const char* field : {"eps1", "eps2", "eps3", "eps4", "xi0", "grid"})
    if (!block.contains(field)) throw ConfigError("missing field", field);

  const SignBlockMatrix i1(n, require_sign(block.at("eps1"), "eps1"),
                           require_sign(block.at("eps2"), "eps2"));
  const SignBlockMatrix i2(n, require_sign(block.at("eps3"), "eps3"),
                           require_sign(block.at("eps4"), "eps4"));

  CoefficientProvider provider_h = parse_provider(block, n, "H");
  CoefficientProvider provider_c = parse_provider(block, n, "C");

  Reparameterization rep = Reparameterization::identity();
  if (block.contains("reparam")) {
    const json& r = block.at("reparam");
    if (!r.is_object()) throw ConfigError("expected an object", "reparam");
    const double alpha = r.contains("alpha") ? require_number(r.at("alpha"), "reparam.alpha") : 1.0;
    const double beta = r.contains("beta") ? require_number(r.at("beta"), "reparam.beta") : 0.0;
    if (alpha <= 0) throw ConfigError("alpha must be positive (t must increase)", "reparam.alpha");
    rep = Reparameterization::affine(alpha, beta);
  }

  GlueConstants glue = GlueConstants::identity(n);
  if (block.contains("glue")) {
    const json& g = block.at("glue");
    if (!g.is_object()) throw ConfigError("expected an object", "glue");
    for (const char* part : {"a", "b", "c", "d"})
      if (!g.contains(part)) throw ConfigError("missing glue block", std::string("glue.") + part);
    glue = GlueConstants(parse_matrix(g.at("a"), n, n, "glue.a"),
                         parse_matrix(g.at("b"), n, n, "glue.b"),
                         parse_matrix(g.at("c"), n, n, "glue.c"),
                         parse_matrix(g.at("d"), n, n, "glue.d"));
  }

  const PhaseState xi0(n, parse_vector(block.at("xi0"), 2 * n, "xi0"));
  std::optional<PhaseState> eta0;
  if (block.contains("eta0"))
    eta0 = PhaseState(n, parse_vector(block.at("eta0"), 2 * n, "eta0"));

  const json& g = block.at("grid");
  if (!g.is_object()) throw ConfigError("expected an object", "grid");
  for (const char* field : {"tau_start", "tau_end", "steps"})
    if (!g.contains(field)) throw ConfigError("missing field", std::string("grid.") + field);
  ParameterGrid grid = [&] {
    try {
      return ParameterGrid(require_number(g.at("tau_start"), "grid.tau_start"),
                           require_number(g.at("tau_end"), "grid.tau_end"),
                           require_int(g.at("steps"), "grid.steps"));
    } catch (const ValidationError& e) {
      throw ConfigError(e.what(), "grid");
    }
  }();

  return MappingProblem{n,      std::move(provider_h), std::move(provider_c),
                        i1,     i2,
                        rep,    std::move(glue),
                        xi0,    grid,
                        eta0,   std::nullopt};
}

}  // namespace config_detail

/// Parses a config file. Every failure is reported as ConfigError.
inline RunConfig load_run_config(const std::string& path) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");

  RunConfig cfg;
  const bool has_scenario = root.contains("scenario");
  const bool has_problem = root.contains("problem");
  if (has_scenario == has_problem)
    throw ConfigError("exactly one of 'scenario' and 'problem' is required");

  if (has_scenario) {
    const json& s = root.at("scenario");
    if (!s.is_string()) throw ConfigError("expected a scenario name string", "scenario");
    cfg.scenario = s.get<std::string>();
    if (root.contains("params")) {
      const json& p = root.at("params");
      if (!p.is_object()) throw ConfigError("expected an object", "params");
      for (const auto& [key, value] : p.items())
        cfg.scenario_params[key] = config_detail::require_number(value, "params." + key);
    }
  } else {
    try {
      cfg.problem = config_detail::parse_problem(root.at("problem"));
    } catch (const ValidationError& e) {
      throw ConfigError(e.what(), "problem");
    }
  }

  if (root.contains("output_dir")) {
    const json& o = root.at("output_dir");
    if (!o.is_string()) throw ConfigError("expected a string", "output_dir");
    cfg.output_dir = o.get<std::string>();
  }
  if (root.contains("tolerance")) {
    cfg.tolerance = config_detail::require_number(root.at("tolerance"), "tolerance");
    if (!(cfg.tolerance > 0)) throw ConfigError("tolerance must be positive", "tolerance");
  }
  return cfg;
}

}  // namespace flowmap
