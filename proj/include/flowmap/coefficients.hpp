#pragma once

// Coefficient fields of the linear transition-map equation. For a quadratic
// form H(state) = 1/2 state^T H(state) state with state-dependent symmetric
// coefficients, the gradient is grad H = X * state with
//
//   X_lj = 1/2 sum_i (dH_ij/dstate^l) state^i + H_lj.
//
// X is generally not symmetric when the coefficients depend on the state;
// it degenerates to H itself for constant coefficients. Z is the same field
// scaled by dt/dtau.

#include "flowmap/core.hpp"

namespace flowmap {

/// A 2n x 2n coefficient matrix (X, Y or Z) evaluated at one state.
/// Satisfies data * state == grad of the scalar quadratic form there.
struct CoefficientMatrix {
  explicit CoefficientMatrix(Mat m) : data(std::move(m)) {
    if (data.rows() != data.cols() || data.rows() < 2 || data.rows() % 2 != 0)
      throw ValidationError("CoefficientMatrix: matrix must be square, even-dimensioned");
  }

  int n() const { return static_cast<int>(data.rows()) / 2; }
  int dim() const { return static_cast<int>(data.rows()); }

  Mat data;
};

namespace detail {

// Worker shared with the integrators; skips the per-call state wrapping.
inline Mat gradient_matrix(const CoefficientProvider& provider, const Vec& s) {
  // Constant coefficients pass through untouched so that X == H bitwise.
  if (provider.is_constant()) return provider.eval(s);

  Mat x = provider.eval(s);
  const int dim = provider.dim();
  for (int l = 0; l < dim; ++l) {
    const Mat dl = provider.deriv(s, l);
    // Contraction over the first coefficient index: 1/2 sum_i dH_ij/ds^l s^i.
    x.row(l) += 0.5 * (s.transpose() * dl);
  }
  return x;
}

}  // namespace detail

/// X along the xi-system: grad H(xi) = X xi.
inline CoefficientMatrix compute_X(const CoefficientProvider& provider_H,
                                   const PhaseState& xi) {
  if (provider_H.n() != xi.n())
    throw ValidationError("compute_X: provider and state dimensions differ");
  Mat x = detail::gradient_matrix(provider_H, xi.values());
  if (!all_finite(x)) throw ValidationError("compute_X: non-finite provider output");
  return CoefficientMatrix(std::move(x));
}

/// Y along the eta-system: grad Hbar(eta) = Y eta.
inline CoefficientMatrix compute_Y(const CoefficientProvider& provider_C,
                                   const PhaseState& eta) {
  if (provider_C.n() != eta.n())
    throw ValidationError("compute_Y: provider and state dimensions differ");
  Mat y = detail::gradient_matrix(provider_C, eta.values());
  if (!all_finite(y)) throw ValidationError("compute_Y: non-finite provider output");
  return CoefficientMatrix(std::move(y));
}

/// Z = (dt/dtau)(tau) * X, entrywise.
inline CoefficientMatrix compute_Z(const CoefficientMatrix& x,
                                   const Reparameterization& rep, double tau) {
  const double factor = rep.dt_dtau(tau);
  if (!std::isfinite(factor))
    throw ValidationError("compute_Z: non-finite dt/dtau");
  return CoefficientMatrix(Mat(factor * x.data));
}

/// The scalar quadratic form 1/2 state^T H(state) state.
inline double energy(const CoefficientProvider& provider, const PhaseState& state) {
  if (provider.n() != state.n())
    throw ValidationError("energy: provider and state dimensions differ");
  const Vec& s = state.values();
  const double e = 0.5 * s.dot(provider.eval(s) * s);
  if (!std::isfinite(e)) throw ValidationError("energy: non-finite result");
  return e;
}

}  // namespace flowmap
