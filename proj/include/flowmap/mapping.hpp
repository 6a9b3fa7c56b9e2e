#pragma once

// Assembles the inter-manifold transition map T(tau) = S(tau) K R(tau),
// transports trajectories via eta = T xi, and certifies the construction
// against a direct integration of dT/dtau = I2 Y T - T I1 Z.
//
// Pipeline (solve_mapping):
//   1. integrate xi over the image of the tau-grid under t(tau)
//   2. integrate eta from eta0 = K xi0 (or a user override, which is flagged)
//   3. build the coefficient fields Y along eta and Z = (dt/dtau) X along xi
//   4. integrate the split factors S (S0 = Id) and R (R0 = Id)
//   5. compose T = S K R
//   6. integrate T directly with T0 = K as the independent check
//   7. transport: eta_transported(tau) = T(tau) xi(t(tau))
//   8. record the ODE residual of the composed T and the transport gap
//
// State trajectories are integrated at twice the grid resolution so the
// field closures hit exact samples at every RK half-step.

#include "flowmap/coefficients.hpp"
#include "flowmap/core.hpp"
#include "flowmap/flows.hpp"
#include "flowmap/geometry.hpp"

#include <algorithm>
#include <optional>
#include <utility>
#include <vector>

namespace flowmap {

/// Optional chart attached to a problem. Purely descriptive: the flow
/// pipeline never consumes it, which is what recover_second_formalism
/// demonstrates.
struct GeometryAnnotation {
  VielbeinField vielbein;
  FlatMetric flat;

  static GeometryAnnotation identity(int dim) {
    return {VielbeinField::identity(dim), FlatMetric::euclidean(dim)};
  }
};

/// Everything needed to construct the map between the two systems.
struct MappingProblem {
  int n;
  CoefficientProvider provider_H;
  CoefficientProvider provider_C;
  SignBlockMatrix I1;
  SignBlockMatrix I2;
  Reparameterization rep;
  GlueConstants glue;
  PhaseState xi0;
  ParameterGrid tau_grid;
  std::optional<PhaseState> eta0;          // defaults to K * xi0
  std::optional<GeometryAnnotation> chart; // descriptive only
};

inline void validate_problem(const MappingProblem& p) {
  if (p.n < 1) throw ValidationError("MappingProblem: n must be positive");
  if (p.provider_H.n() != p.n || p.provider_C.n() != p.n || p.I1.n() != p.n ||
      p.I2.n() != p.n || p.glue.n() != p.n || p.xi0.n() != p.n)
    throw ValidationError("MappingProblem: component dimensions disagree");
  if (p.eta0 && p.eta0->n() != p.n)
    throw ValidationError("MappingProblem: eta0 has wrong dimension");
  if (!p.rep.t_of_tau || !p.rep.dt_dtau)
    throw ValidationError("MappingProblem: reparameterization is incomplete");
}

struct MappingResult {
  StateTrajectory xi;               // sampled at t(tau_k)
  StateTrajectory eta_independent;  // integrated from eta0
  StateTrajectory eta_transported;  // T(tau_k) xi(t(tau_k))
  MatrixTrajectory S;
  MatrixTrajectory R;
  MatrixTrajectory T_composed;
  MatrixTrajectory T_direct;
  double residual_max;         // ODE residual of the composed T
  double residual_direct_max;  // same stencil applied to the direct T
  double transport_error_max;
  bool eta0_consistent;  // false when a user eta0 differs from K xi0
};

/// Per grid point, T = S K R with K = [[a, d],[b, c]].
inline MatrixTrajectory compose_T(const MatrixTrajectory& S, const GlueConstants& glue,
                                  const MatrixTrajectory& R) {
  if (!(S.grid == R.grid)) throw ValidationError("compose_T: grids differ");
  if (S.samples.empty() || S.samples.front().n() != glue.n() ||
      R.samples.front().n() != glue.n())
    throw ValidationError("compose_T: dimension mismatch");
  const Mat k = glue.assembled().data();
  std::vector<BlockMatrix> out;
  out.reserve(S.samples.size());
  for (std::size_t i = 0; i < S.samples.size(); ++i)
    out.emplace_back(Mat((S.samples[i].data() * k) * R.samples[i].data()));
  return MatrixTrajectory(S.grid, std::move(out));
}

namespace detail {

// First-derivative estimates on a uniform grid. Fourth order wherever the
// grid allows it (5-point central inside, 5-point one-sided at the edges),
// so the stencil truncation does not mask the O(h^4) integration error in
// the ODE residual. Short grids fall back to lower order.
inline Mat sample_derivative(const std::vector<BlockMatrix>& f, int k, double h) {
  const int last = static_cast<int>(f.size()) - 1;
  const auto& m = [&](int i) -> const Mat& { return f[static_cast<std::size_t>(i)].data(); };
  if (last >= 4) {
    if (k >= 2 && k <= last - 2)
      return (m(k - 2) - 8.0 * m(k - 1) + 8.0 * m(k + 1) - m(k + 2)) / (12.0 * h);
    if (k == 0)
      return (-25.0 * m(0) + 48.0 * m(1) - 36.0 * m(2) + 16.0 * m(3) - 3.0 * m(4)) /
             (12.0 * h);
    if (k == 1)
      return (-3.0 * m(0) - 10.0 * m(1) + 18.0 * m(2) - 6.0 * m(3) + m(4)) / (12.0 * h);
    if (k == last)
      return (25.0 * m(last) - 48.0 * m(last - 1) + 36.0 * m(last - 2) -
              16.0 * m(last - 3) + 3.0 * m(last - 4)) /
             (12.0 * h);
    // k == last - 1
    return (3.0 * m(last) + 10.0 * m(last - 1) - 18.0 * m(last - 2) +
            6.0 * m(last - 3) - m(last - 4)) /
           (12.0 * h);
  }
  if (last >= 2) {
    if (k == 0) return (-3.0 * m(0) + 4.0 * m(1) - m(2)) / (2.0 * h);
    if (k == last) return (3.0 * m(last) - 4.0 * m(last - 1) + m(last - 2)) / (2.0 * h);
    return (m(k + 1) - m(k - 1)) / (2.0 * h);
  }
  return (m(last) - m(0)) / h;  // single interval
}

}  // namespace detail

/// max_k || dT/dtau + T I1 Z - I2 Y T ||_F over the sampled trajectory,
/// with the derivative taken by finite differences on the samples.
inline double ode_residual_max(const MatrixTrajectory& T, const MatrixField& y_field,
                               const MatrixField& z_field, const SignBlockMatrix& I1,
                               const SignBlockMatrix& I2) {
  const double h = T.grid.h();
  double worst = 0.0;
  for (int k = 0; k <= T.grid.steps(); ++k) {
    const double tau = T.grid.point(k);
    const Mat& t = T.samples[static_cast<std::size_t>(k)].data();
    const Mat i1z = sign_block_times(I1, z_field(tau).data);
    const Mat i2y = sign_block_times(I2, y_field(tau).data);
    const Mat residual = detail::sample_derivative(T.samples, k, h) + t * i1z - i2y * t;
    worst = std::max(worst, residual.norm());
  }
  return worst;
}

namespace detail {

template <typename Fn>
auto with_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string(e.what()) + " [stage " + stage + "]",
                          e.grid_index, stage);
  }
}

// Y(tau): constant C, or the gradient coefficients along the sampled eta.
inline MatrixField make_y_field(const CoefficientProvider& provider_C,
                                const StateField& eta_field, const Vec& any_state) {
  if (provider_C.is_constant()) return constant_field(provider_C.eval(any_state));
  return [provider_C, eta_field](double tau) {
    return CoefficientMatrix(detail::gradient_matrix(provider_C, eta_field.at(tau)));
  };
}

// Z(tau) = dt/dtau(tau) * X(xi(t(tau))).
inline MatrixField make_z_field(const CoefficientProvider& provider_H,
                                const Reparameterization& rep,
                                const StateField& xi_field, const Vec& any_state) {
  if (provider_H.is_constant()) {
    const CoefficientMatrix h{provider_H.eval(any_state)};
    return [h, rep](double tau) { return compute_Z(h, rep, tau); };
  }
  return [provider_H, rep, xi_field](double tau) {
    CoefficientMatrix x(detail::gradient_matrix(provider_H, xi_field.at(rep.t_of_tau(tau))));
    return compute_Z(x, rep, tau);
  };
}

}  // namespace detail

inline MappingResult solve_mapping(const MappingProblem& p) {
  validate_problem(p);
  const int n = p.n;
  const ParameterGrid& tau_grid = p.tau_grid;

  const double t0 = p.rep.t_of_tau(tau_grid.start());
  const double t1 = p.rep.t_of_tau(tau_grid.end());
  if (!(std::isfinite(t0) && std::isfinite(t1)))
    throw ValidationError("solve_mapping: reparameterization produced non-finite t");
  if (!(t1 > t0))
    throw ValidationError("solve_mapping: t(tau) must be increasing over the grid");
  const ParameterGrid t_grid(t0, t1, tau_grid.steps());

  // (1) xi over t(tau-grid), at double resolution for the field closures.
  const StateTrajectory xi_fine = detail::with_stage(
      "flow_xi", [&] { return flow_xi(p.provider_H, p.I1, p.xi0, t_grid.refined(2)); });
  const StateTrajectory xi = downsample(xi_fine, 2);

  // (2) eta from eta0 = K xi0 unless the problem supplies its own.
  const Mat glue_matrix = p.glue.assembled().data();
  const Vec eta0_default = glue_matrix * p.xi0.values();
  const PhaseState eta0 = p.eta0 ? *p.eta0 : PhaseState(n, eta0_default);
  const bool eta0_consistent =
      !p.eta0 ||
      (eta0.values() - eta0_default).norm() <= 1e-12 * (1.0 + eta0_default.norm());

  const StateTrajectory eta_fine = detail::with_stage(
      "flow_eta", [&] { return flow_eta(p.provider_C, p.I2, eta0, tau_grid.refined(2)); });
  const StateTrajectory eta_independent = downsample(eta_fine, 2);

  // (3) coefficient fields.
  const MatrixField y_field =
      detail::make_y_field(p.provider_C, StateField(eta_fine), eta0.values());
  const MatrixField z_field =
      detail::make_z_field(p.provider_H, p.rep, StateField(xi_fine), p.xi0.values());

  // (4) split factors from the identity.
  const MatrixTrajectory S = detail::with_stage("integrate_S", [&] {
    return integrate_S(y_field, p.I2, BlockMatrix::identity(n), tau_grid);
  });
  const MatrixTrajectory R = detail::with_stage("integrate_R", [&] {
    return integrate_R(z_field, p.I1, BlockMatrix::identity(n), tau_grid);
  });

  // (5) composed map and (6) independent direct integration from T0 = K.
  const MatrixTrajectory T_composed = compose_T(S, p.glue, R);
  const MatrixTrajectory T_direct = detail::with_stage("integrate_T_direct", [&] {
    return integrate_T_direct(y_field, z_field, p.I1, p.I2,
                              BlockMatrix(glue_matrix), tau_grid);
  });

  // (7) transport the xi samples through the composed map.
  std::vector<PhaseState> transported;
  transported.reserve(xi.samples.size());
  double transport_error_max = 0.0;
  for (std::size_t k = 0; k < xi.samples.size(); ++k) {
    transported.emplace_back(
        n, Vec(T_composed.samples[k].data() * xi.samples[k].values()));
    transport_error_max =
        std::max(transport_error_max,
                 (transported.back().values() - eta_independent.samples[k].values()).norm());
  }

  // (8) ODE residuals of both T trajectories.
  const double residual_max = ode_residual_max(T_composed, y_field, z_field, p.I1, p.I2);
  const double residual_direct_max =
      ode_residual_max(T_direct, y_field, z_field, p.I1, p.I2);

  return MappingResult{xi,
                       eta_independent,
                       StateTrajectory(tau_grid, std::move(transported)),
                       S,
                       R,
                       T_composed,
                       T_direct,
                       residual_max,
                       residual_direct_max,
                       transport_error_max,
                       eta0_consistent};
}

struct VerificationReport {
  double residual_max;
  double composed_vs_direct_max;  // max_k ||Tc - Td||_F / (1 + ||Td||_F)
  double transport_error_max;
  double tolerance;
  bool residual_ok;
  bool agreement_ok;
  bool transport_ok;
  bool eta0_consistent;
  bool pass;
};

/// Checks the three certification quantities against one tolerance.
/// Reports, never throws.
inline VerificationReport verify_composition(const MappingResult& r, double tol) {
  double agreement = 0.0;
  for (std::size_t k = 0; k < r.T_composed.samples.size(); ++k) {
    const double denom = 1.0 + r.T_direct.samples[k].data().norm();
    agreement = std::max(
        agreement,
        (r.T_composed.samples[k].data() - r.T_direct.samples[k].data()).norm() / denom);
  }
  VerificationReport report{};
  report.residual_max = r.residual_max;
  report.composed_vs_direct_max = agreement;
  report.transport_error_max = r.transport_error_max;
  report.tolerance = tol;
  report.residual_ok = r.residual_max <= tol;
  report.agreement_ok = agreement <= tol;
  report.transport_ok = r.transport_error_max <= tol;
  report.eta0_consistent = r.eta0_consistent;
  report.pass = report.residual_ok && report.agreement_ok && report.transport_ok;
  return report;
}

/// The same problem with the scalar-field chart replaced by the identity:
/// coordinates become ordinary coordinates. The numerical pipeline never
/// reads the chart, so results must agree bit for bit.
inline MappingProblem recover_second_formalism(const MappingProblem& p) {
  MappingProblem plain = p;
  const int chart_dim = p.chart ? p.chart->vielbein.dim() : p.n;
  plain.chart = GeometryAnnotation::identity(chart_dim);
  return plain;
}

}  // namespace flowmap
