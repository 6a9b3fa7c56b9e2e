#pragma once

// Named, parameterized example problems. Together the registry touches
// every sign choice of the structure matrices, constant and state-dependent
// coefficients, an affine reparameterization and the sphere chart. Scenario
// names and parameter schemas are part of the CLI contract.

#include "flowmap/geometry.hpp"
#include "flowmap/mapping.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace flowmap::scenarios {

using ParamMap = std::map<std::string, double>;

struct ParamSpec {
  std::string name;
  double default_value;
  std::string description;
};

/// A geometry-only scenario: a chart plus a curve to measure.
struct GeometryScenario {
  VielbeinField vielbein;
  FlatMetric flat;
  CoordinateCurve curve;
};

struct ScenarioProduct {
  std::optional<MappingProblem> problem;
  std::optional<GeometryScenario> geometry;
};

struct ScenarioSpec {
  std::string name;
  std::string description;
  std::vector<ParamSpec> params;
  std::function<ScenarioProduct(const ParamMap&)> build;
};

namespace detail {

inline ParamMap merge_params(const ScenarioSpec& spec, const ParamMap& given) {
  ParamMap merged;
  for (const ParamSpec& p : spec.params) merged[p.name] = p.default_value;
  for (const auto& [key, value] : given) {
    auto it = merged.find(key);
    if (it == merged.end())
      throw ValidationError("scenario '" + spec.name + "': unknown parameter '" + key + "'");
    if (!std::isfinite(value))
      throw ValidationError("scenario '" + spec.name + "': parameter '" + key +
                            "' must be finite");
    it->second = value;
  }
  return merged;
}

inline int to_steps(double value) {
  const int steps = static_cast<int>(std::llround(value));
  if (steps < 1 || std::abs(value - steps) > 1e-9)
    throw ValidationError("scenario: steps must be a positive integer");
  return steps;
}

inline ParameterGrid grid_from(const ParamMap& p) {
  return ParameterGrid(0.0, p.at("tau_end"), to_steps(p.at("steps")));
}

inline std::vector<ParamSpec> grid_params(double tau_end, double steps) {
  return {{"tau_end", tau_end, "end of the tau interval (start is 0)"},
          {"steps", steps, "number of integration steps"}};
}

inline MappingProblem constant_pair(int n, const Mat& h, const Mat& c,
                                    const SignBlockMatrix& i1, const SignBlockMatrix& i2,
                                    const Reparameterization& rep, GlueConstants glue,
                                    Vec xi0, const ParameterGrid& grid) {
  return MappingProblem{n,
                        CoefficientProvider::constant(h),
                        CoefficientProvider::constant(c),
                        i1,
                        i2,
                        rep,
                        std::move(glue),
                        PhaseState(n, std::move(xi0)),
                        grid,
                        std::nullopt,
                        std::nullopt};
}

inline const std::map<std::string, ScenarioSpec>& registry() {
  static const std::map<std::string, ScenarioSpec> reg = [] {
    std::map<std::string, ScenarioSpec> r;

    auto add = [&r](ScenarioSpec spec) { r.emplace(spec.name, std::move(spec)); };

    add(ScenarioSpec{
        "identity-pair",
        "identical unit oscillators with identity glue; T stays the identity",
        grid_params(5.0, 5000),
        [](const ParamMap& p) {
          const Mat id2 = Mat::Identity(2, 2);
          return ScenarioProduct{
              constant_pair(1, id2, id2, SignBlockMatrix(1, 1, -1),
                            SignBlockMatrix(1, 1, -1), Reparameterization::identity(),
                            GlueConstants::identity(1), Vec{{1.0, 0.0}}, grid_from(p)),
              std::nullopt};
        }});

    {
      std::vector<ParamSpec> params = grid_params(5.0, 5000);
      params.push_back({"omega2", 2.0, "frequency of the eta oscillator"});
      add(ScenarioSpec{
          "harmonic-pair",
          "unit oscillator mapped onto an oscillator of frequency omega2",
          params,
          [](const ParamMap& p) {
            const double w = p.at("omega2");
            const Mat h = Mat::Identity(2, 2);
            const Mat c = (w * w) * Mat::Identity(2, 2);
            return ScenarioProduct{
                constant_pair(1, h, c, SignBlockMatrix(1, 1, -1),
                              SignBlockMatrix(1, 1, -1), Reparameterization::identity(),
                              GlueConstants::identity(1), Vec{{1.0, 0.0}}, grid_from(p)),
                std::nullopt};
          }});
    }

    {
      std::vector<ParamSpec> params = grid_params(5.0, 5000);
      params.push_back({"rate_xi", 0.3, "growth rate of the xi system"});
      params.push_back({"rate_eta", 0.5, "growth rate of the eta system"});
      add(ScenarioSpec{
          "hyperbolic-pair",
          "symmetric sign blocks (eps1 = eps2); both flows grow exponentially",
          params,
          [](const ParamMap& p) {
            const Mat h = p.at("rate_xi") * Mat::Identity(2, 2);
            const Mat c = p.at("rate_eta") * Mat::Identity(2, 2);
            return ScenarioProduct{
                constant_pair(1, h, c, SignBlockMatrix(1, 1, 1), SignBlockMatrix(1, 1, 1),
                              Reparameterization::identity(), GlueConstants::identity(1),
                              Vec{{1.0, 0.0}}, grid_from(p)),
                std::nullopt};
          }});
    }

    {
      std::vector<ParamSpec> params = grid_params(5.0, 5000);
      params.push_back({"q0", 2.0, "initial coordinate of the xi system"});
      add(ScenarioSpec{
          "cubic-coefficient",
          "state-dependent coefficient H_11 = Q; the cubic energy 0.5 Q^3",
          params,
          [](const ParamMap& p) {
            auto eval = [](const Vec& s) {
              Mat m = Mat::Zero(2, 2);
              m(0, 0) = s[0];
              return m;
            };
            auto deriv = [](const Vec&, int l) {
              Mat m = Mat::Zero(2, 2);
              if (l == 0) m(0, 0) = 1.0;
              return m;
            };
            return ScenarioProduct{
                MappingProblem{1,
                               CoefficientProvider::from_functions(1, eval, deriv),
                               CoefficientProvider::constant(Mat::Identity(2, 2)),
                               SignBlockMatrix(1, -1, 1),
                               SignBlockMatrix(1, 1, -1),
                               Reparameterization::identity(),
                               GlueConstants::identity(1),
                               PhaseState(1, Vec{{p.at("q0"), 0.0}}),
                               grid_from(p),
                               std::nullopt,
                               std::nullopt},
                std::nullopt};
          }});
    }

    {
      std::vector<ParamSpec> params = grid_params(5.0, 5000);
      params.push_back({"alpha", 2.0, "slope of t = alpha tau + beta"});
      params.push_back({"beta", 1.0, "offset of t = alpha tau + beta"});
      params.push_back({"rate", 0.25, "common coefficient scale"});
      add(ScenarioSpec{
          "reparam-affine",
          "affine reparameterization t = alpha tau + beta between the systems",
          params,
          [](const ParamMap& p) {
            const Mat h = p.at("rate") * Mat::Identity(2, 2);
            return ScenarioProduct{
                constant_pair(1, h, h, SignBlockMatrix(1, -1, -1),
                              SignBlockMatrix(1, 1, -1),
                              Reparameterization::affine(p.at("alpha"), p.at("beta")),
                              GlueConstants::identity(1), Vec{{1.0, 0.0}}, grid_from(p)),
                std::nullopt};
          }});
    }

    {
      std::vector<ParamSpec> params = {
          {"theta", M_PI / 2, "polar angle of the measured circle of latitude"},
          {"steps", 256, "curve grid steps over one full turn"}};
      add(ScenarioSpec{
          "sphere-chart",
          "2-sphere vielbein diag(1, sin theta); measures a circle of latitude",
          params,
          [](const ParamMap& p) {
            const double theta = p.at("theta");
            VielbeinField vielbein(2, [](const Vec& q) {
              Mat e = Mat::Identity(2, 2);
              e(1, 1) = std::sin(q[0]);
              return e;
            });
            CoordinateCurve curve{
                ParameterGrid(0.0, 2.0 * M_PI, to_steps(p.at("steps"))),
                [theta](double lambda) { return Vec{{theta, lambda}}; },
                [](double) { return Vec{{0.0, 1.0}}; }};
            return ScenarioProduct{
                std::nullopt,
                GeometryScenario{std::move(vielbein), FlatMetric::euclidean(2),
                                 std::move(curve)}};
          }});
    }

    {
      std::vector<ParamSpec> params = grid_params(5.0, 5000);
      params.push_back({"omega2", 2.0, "frequency of the eta oscillator"});
      params.push_back({"delta", 0.1, "perturbation applied to glue block a"});
      add(ScenarioSpec{
          "corrupted-glue",
          "harmonic pair whose glue disagrees with eta0; verification must fail",
          params,
          [](const ParamMap& p) {
            const double w = p.at("omega2");
            Mat a = Mat::Identity(1, 1);
            a(0, 0) += p.at("delta");
            MappingProblem problem{1,
                                   CoefficientProvider::constant(Mat::Identity(2, 2)),
                                   CoefficientProvider::constant(Mat((w * w) * Mat::Identity(2, 2))),
                                   SignBlockMatrix(1, 1, -1),
                                   SignBlockMatrix(1, 1, -1),
                                   Reparameterization::identity(),
                                   GlueConstants(a, Mat::Zero(1, 1), Mat::Identity(1, 1),
                                                 Mat::Zero(1, 1)),
                                   PhaseState(1, Vec{{1.0, 0.0}}),
                                   grid_from(p),
                                   // eta0 consistent with the unperturbed glue
                                   PhaseState(1, Vec{{1.0, 0.0}}),
                                   std::nullopt};
            return ScenarioProduct{std::move(problem), std::nullopt};
          }});
    }

    return r;
  }();
  return reg;
}

}  // namespace detail

struct ScenarioInfo {
  std::string name;
  std::string description;
  std::vector<ParamSpec> params;
};

/// Stable, name-sorted listing of every registered scenario.
inline std::vector<ScenarioInfo> list_scenarios() {
  std::vector<ScenarioInfo> out;
  for (const auto& [name, spec] : detail::registry())
    out.push_back({name, spec.description, spec.params});
  return out;  // std::map iteration is already sorted
}

/// Instantiates a registered scenario. Unknown names and unknown parameter
/// keys are rejected; omitted parameters take their documented defaults.
inline ScenarioProduct build_scenario(const std::string& name, const ParamMap& params = {}) {
  const auto& reg = detail::registry();
  auto it = reg.find(name);
  if (it == reg.end()) throw ValidationError("unknown scenario '" + name + "'");
  return it->second.build(detail::merge_params(it->second, params));
}

}  // namespace flowmap::scenarios
