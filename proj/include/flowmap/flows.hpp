#pragma once

// Fixed-step RK4 integration of the five systems:
//
//   xi-flow       dxi/dt   = I1 X(xi) xi
//   eta-flow      deta/dtau = I2 Y(eta) eta
//   S-system      dS/dtau  = I2 Y(tau) S          (left factor)
//   R-system      dR/dtau  = -R I1 Z(tau)         (right factor)
//   direct T      dT/dtau  = I2 Y(tau) T - T I1 Z(tau)
//
// The matrix systems are written blockwise:
//
//   S1' = e3(Y3 S1 + Y4 S3)        R1' = -e2 R2 Z1 - e1 R1 Z3
//   S2' = e3(Y3 S2 + Y4 S4)        R2' = -e2 R2 Z2 - e1 R1 Z4
//   S3' = e4(Y1 S1 + Y2 S3)        R3' = -e2 R4 Z1 - e1 R3 Z3
//   S4' = e4(Y1 S2 + Y2 S4)        R4' = -e2 R4 Z2 - e1 R3 Z4
//
// with e1 = eps_upper(I1), e2 = eps_lower(I1), e3 = eps_upper(I2),
// e4 = eps_lower(I2), and the direct T system is the sum of both parts.
// Blocks are copied out of the 2n x 2n matrices before multiplying, so
// integrating the four n x n block ODEs separately reproduces these samples
// bit for bit.

#include "flowmap/coefficients.hpp"
#include "flowmap/core.hpp"

#include <cstddef>
#include <vector>

namespace flowmap {

/// Any entry whose magnitude exceeds this aborts the integration.
inline constexpr double kDivergenceCutoff = 1e12;

/// A sampled phase-space curve, one sample per grid point.
struct StateTrajectory {
  StateTrajectory(ParameterGrid g, std::vector<PhaseState> s)
      : grid(g), samples(std::move(s)) {
    if (samples.size() != grid.size())
      throw ValidationError("StateTrajectory: sample count does not match grid");
  }

  ParameterGrid grid;
  std::vector<PhaseState> samples;
};

/// A sampled curve of 2n x 2n matrices, one sample per grid point.
struct MatrixTrajectory {
  MatrixTrajectory(ParameterGrid g, std::vector<BlockMatrix> s)
      : grid(g), samples(std::move(s)) {
    if (samples.size() != grid.size())
      throw ValidationError("MatrixTrajectory: sample count does not match grid");
  }

  ParameterGrid grid;
  std::vector<BlockMatrix> samples;
};

/// Keeps every `factor`-th sample. The source grid must refine the target.
inline StateTrajectory downsample(const StateTrajectory& fine, int factor) {
  if (factor < 1 || fine.grid.steps() % factor != 0)
    throw ValidationError("downsample: factor does not divide the step count");
  std::vector<PhaseState> coarse;
  coarse.reserve(static_cast<std::size_t>(fine.grid.steps() / factor) + 1);
  for (std::size_t k = 0; k < fine.samples.size(); k += static_cast<std::size_t>(factor))
    coarse.push_back(fine.samples[k]);
  return StateTrajectory(
      ParameterGrid(fine.grid.start(), fine.grid.end(), fine.grid.steps() / factor),
      std::move(coarse));
}

/// A coefficient field along the grid, evaluable at grid points and
/// RK half-steps.
using MatrixField = std::function<CoefficientMatrix(double)>;

/// Continuous view of a sampled state curve: exact at grid nodes, 4-point
/// Lagrange cubic in between (linear when the grid is too short for a cubic).
class StateField {
 public:
  explicit StateField(StateTrajectory traj) : traj_(std::move(traj)) {}

  const StateTrajectory& trajectory() const { return traj_; }

  Vec at(double param) const {
    const ParameterGrid& g = traj_.grid;
    const int last = g.steps();
    double x = (param - g.start()) / g.h();
    const double snapped = std::round(x);
    if (std::abs(x - snapped) <= 1e-9 && snapped >= 0 && snapped <= last)
      return traj_.samples[static_cast<std::size_t>(snapped)].values();
    // Clamp rather than extrapolate far off the sampled span.
    if (x < 0) x = 0;
    if (x > last) x = last;
    if (last < 3) {
      const int i = std::min(static_cast<int>(x), last - 1);
      const double s = x - i;
      return (1.0 - s) * traj_.samples[i].values() +
             s * traj_.samples[i + 1].values();
    }
    int i0 = static_cast<int>(x) - 1;
    if (i0 < 0) i0 = 0;
    if (i0 > last - 3) i0 = last - 3;
    const double s = x - i0;
    const double w0 = -(s - 1) * (s - 2) * (s - 3) / 6.0;
    const double w1 = s * (s - 2) * (s - 3) / 2.0;
    const double w2 = -s * (s - 1) * (s - 3) / 2.0;
    const double w3 = s * (s - 1) * (s - 2) / 6.0;
    return w0 * traj_.samples[i0].values() + w1 * traj_.samples[i0 + 1].values() +
           w2 * traj_.samples[i0 + 2].values() + w3 * traj_.samples[i0 + 3].values();
  }

 private:
  StateTrajectory traj_;
};

namespace detail {

inline void check_step(const Vec& v, std::size_t index) {
  if (!v.allFinite() || v.cwiseAbs().maxCoeff() > kDivergenceCutoff)
    throw DivergenceError("state integration diverged at grid index " +
                              std::to_string(index),
                          index);
}

inline void check_step(const Mat& m, std::size_t index) {
  if (!m.allFinite() || m.cwiseAbs().maxCoeff() > kDivergenceCutoff)
    throw DivergenceError("matrix integration diverged at grid index " +
                              std::to_string(index),
                          index);
}

template <typename Rhs>
StateTrajectory rk4_state(const Rhs& rhs, const PhaseState& y0,
                          const ParameterGrid& grid) {
  const double h = grid.h();
  std::vector<PhaseState> samples;
  samples.reserve(grid.size());
  samples.push_back(y0);
  Vec y = y0.values();
  check_step(y, 0);
  const int n = y0.n();
  for (int k = 0; k < grid.steps(); ++k) {
    const Vec k1 = rhs(y);
    const Vec k2 = rhs(Vec(y + (0.5 * h) * k1));
    const Vec k3 = rhs(Vec(y + (0.5 * h) * k2));
    const Vec k4 = rhs(Vec(y + h * k3));
    y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_step(y, static_cast<std::size_t>(k) + 1);
    samples.emplace_back(n, y);
  }
  return StateTrajectory(grid, std::move(samples));
}

template <typename Rhs>
MatrixTrajectory rk4_matrix(const Rhs& rhs, const BlockMatrix& y0,
                            const ParameterGrid& grid) {
  const double h = grid.h();
  std::vector<BlockMatrix> samples;
  samples.reserve(grid.size());
  samples.push_back(y0);
  Mat y = y0.data();
  check_step(y, 0);
  for (int k = 0; k < grid.steps(); ++k) {
    const double tau = grid.point(k);
    const double mid = tau + 0.5 * h;
    const Mat k1 = rhs(tau, y);
    const Mat k2 = rhs(mid, Mat(y + (0.5 * h) * k1));
    const Mat k3 = rhs(mid, Mat(y + (0.5 * h) * k2));
    const Mat k4 = rhs(tau + h, Mat(y + h * k3));
    y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_step(y, static_cast<std::size_t>(k) + 1);
    samples.emplace_back(y);
  }
  return MatrixTrajectory(grid, std::move(samples));
}

}  // namespace detail

/// Integrates dxi/dt = I1 X(xi) xi from xi0 over the given t-grid.
inline StateTrajectory flow_xi(const CoefficientProvider& provider_H,
                               const SignBlockMatrix& I1, const PhaseState& xi0,
                               const ParameterGrid& t_grid) {
  if (provider_H.n() != xi0.n() || I1.n() != xi0.n())
    throw ValidationError("flow_xi: dimension mismatch");
  auto rhs = [&](const Vec& s) -> Vec {
    return apply_sign_block(I1, Vec(detail::gradient_matrix(provider_H, s) * s));
  };
  return detail::rk4_state(rhs, xi0, t_grid);
}

/// Integrates deta/dtau = I2 Y(eta) eta from eta0 over the given tau-grid.
inline StateTrajectory flow_eta(const CoefficientProvider& provider_C,
                                const SignBlockMatrix& I2, const PhaseState& eta0,
                                const ParameterGrid& tau_grid) {
  if (provider_C.n() != eta0.n() || I2.n() != eta0.n())
    throw ValidationError("flow_eta: dimension mismatch");
  auto rhs = [&](const Vec& s) -> Vec {
    return apply_sign_block(I2, Vec(detail::gradient_matrix(provider_C, s) * s));
  };
  return detail::rk4_state(rhs, eta0, tau_grid);
}

namespace detail {

struct SplitBlocks {
  Mat m1, m2, m3, m4;

  explicit SplitBlocks(const Mat& m) {
    const Eigen::Index n = m.rows() / 2;
    m1 = m.topLeftCorner(n, n);
    m2 = m.topRightCorner(n, n);
    m3 = m.bottomLeftCorner(n, n);
    m4 = m.bottomRightCorner(n, n);
  }
};

inline Mat assemble(const Mat& b1, const Mat& b2, const Mat& b3, const Mat& b4) {
  const Eigen::Index n = b1.rows();
  Mat m(2 * n, 2 * n);
  m.topLeftCorner(n, n) = b1;
  m.topRightCorner(n, n) = b2;
  m.bottomLeftCorner(n, n) = b3;
  m.bottomRightCorner(n, n) = b4;
  return m;
}

inline CoefficientMatrix eval_field(const MatrixField& field, double tau, int n,
                                    const char* name) {
  CoefficientMatrix c = field(tau);
  if (c.n() != n)
    throw ValidationError(std::string(name) + ": field output has wrong dimensions");
  if (!all_finite(c.data))
    throw ValidationError(std::string(name) + ": field output is non-finite");
  return c;
}

}  // namespace detail

/// Integrates the left factor dS/dtau = I2 Y(tau) S.
inline MatrixTrajectory integrate_S(const MatrixField& y_field,
                                    const SignBlockMatrix& I2, const BlockMatrix& S0,
                                    const ParameterGrid& tau_grid) {
  const int n = S0.n();
  if (I2.n() != n) throw ValidationError("integrate_S: dimension mismatch");
  const double e3 = I2.eps_upper();
  const double e4 = I2.eps_lower();
  auto rhs = [&](double tau, const Mat& s) -> Mat {
    const detail::SplitBlocks y(detail::eval_field(y_field, tau, n, "integrate_S").data);
    const detail::SplitBlocks b(s);
    return detail::assemble(e3 * (y.m3 * b.m1 + y.m4 * b.m3),
                            e3 * (y.m3 * b.m2 + y.m4 * b.m4),
                            e4 * (y.m1 * b.m1 + y.m2 * b.m3),
                            e4 * (y.m1 * b.m2 + y.m2 * b.m4));
  };
  return detail::rk4_matrix(rhs, S0, tau_grid);
}

/// Integrates the right factor dR/dtau = -R I1 Z(tau).
inline MatrixTrajectory integrate_R(const MatrixField& z_field,
                                    const SignBlockMatrix& I1, const BlockMatrix& R0,
                                    const ParameterGrid& tau_grid) {
  const int n = R0.n();
  if (I1.n() != n) throw ValidationError("integrate_R: dimension mismatch");
  const double e1 = I1.eps_upper();
  const double e2 = I1.eps_lower();
  auto rhs = [&](double tau, const Mat& r) -> Mat {
    const detail::SplitBlocks z(detail::eval_field(z_field, tau, n, "integrate_R").data);
    const detail::SplitBlocks b(r);
    return detail::assemble(-e2 * (b.m2 * z.m1) - e1 * (b.m1 * z.m3),
                            -e2 * (b.m2 * z.m2) - e1 * (b.m1 * z.m4),
                            -e2 * (b.m4 * z.m1) - e1 * (b.m3 * z.m3),
                            -e2 * (b.m4 * z.m2) - e1 * (b.m3 * z.m4));
  };
  return detail::rk4_matrix(rhs, R0, tau_grid);
}

/// Integrates the full system dT/dtau = I2 Y(tau) T - T I1 Z(tau) directly.
/// Serves as the independent check of the composed solution.
inline MatrixTrajectory integrate_T_direct(const MatrixField& y_field,
                                           const MatrixField& z_field,
                                           const SignBlockMatrix& I1,
                                           const SignBlockMatrix& I2,
                                           const BlockMatrix& T0,
                                           const ParameterGrid& tau_grid) {
  const int n = T0.n();
  if (I1.n() != n || I2.n() != n)
    throw ValidationError("integrate_T_direct: dimension mismatch");
  const double e1 = I1.eps_upper();
  const double e2 = I1.eps_lower();
  const double e3 = I2.eps_upper();
  const double e4 = I2.eps_lower();
  auto rhs = [&](double tau, const Mat& t) -> Mat {
    const detail::SplitBlocks y(
        detail::eval_field(y_field, tau, n, "integrate_T_direct").data);
    const detail::SplitBlocks z(
        detail::eval_field(z_field, tau, n, "integrate_T_direct").data);
    const detail::SplitBlocks b(t);
    return detail::assemble(
        e3 * (y.m3 * b.m1 + y.m4 * b.m3) - e2 * (b.m2 * z.m1) - e1 * (b.m1 * z.m3),
        e3 * (y.m3 * b.m2 + y.m4 * b.m4) - e2 * (b.m2 * z.m2) - e1 * (b.m1 * z.m4),
        e4 * (y.m1 * b.m1 + y.m2 * b.m3) - e2 * (b.m4 * z.m1) - e1 * (b.m3 * z.m3),
        e4 * (y.m1 * b.m2 + y.m2 * b.m4) - e2 * (b.m4 * z.m2) - e1 * (b.m3 * z.m4));
  };
  return detail::rk4_matrix(rhs, T0, tau_grid);
}

/// Field for constant coefficients: the same matrix at every tau.
inline MatrixField constant_field(const Mat& m) {
  CoefficientMatrix c{m};
  return [c](double) { return c; };
}

}  // namespace flowmap
