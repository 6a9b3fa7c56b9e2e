#pragma once

// Scalar-field-coordinate geometry: diagonal +-1 flat metrics, vielbein
// fields, the induced metric G = E^T eta E, and line elements / arc lengths
// along sampled curves. The geometry layer is deliberately decoupled from
// the flow layer; nothing here feeds the integrators.

#include "flowmap/core.hpp"

#include <functional>
#include <vector>

namespace flowmap {

/// Diagonal flat metric with entries +1 or -1.
class FlatMetric {
 public:
  explicit FlatMetric(std::vector<int> signs) : signs_(std::move(signs)) {
    if (signs_.empty()) throw ValidationError("FlatMetric: dimension must be positive");
    for (int s : signs_)
      if (s != 1 && s != -1)
        throw ValidationError("FlatMetric: every sign must be -1 or +1");
  }

  static FlatMetric euclidean(int dim) {
    if (dim < 1) throw ValidationError("FlatMetric: dimension must be positive");
    return FlatMetric(std::vector<int>(static_cast<std::size_t>(dim), 1));
  }

  int dim() const { return static_cast<int>(signs_.size()); }
  const std::vector<int>& signs() const { return signs_; }

  Mat materialize() const {
    Mat m = Mat::Zero(dim(), dim());
    for (int i = 0; i < dim(); ++i) m(i, i) = signs_[static_cast<std::size_t>(i)];
    return m;
  }

 private:
  std::vector<int> signs_;
};

/// Frame field E(Q). Rows carry the flat index, columns the coordinate index.
class VielbeinField {
 public:
  using EvalFn = std::function<Mat(const Vec&)>;

  VielbeinField(int dim, EvalFn eval) : dim_(dim), eval_(std::move(eval)) {
    if (dim_ < 1) throw ValidationError("VielbeinField: dimension must be positive");
    if (!eval_) throw ValidationError("VielbeinField: missing evaluation function");
  }

  static VielbeinField identity(int dim) {
    return VielbeinField(dim, [dim](const Vec&) { return Mat(Mat::Identity(dim, dim)); });
  }

  int dim() const { return dim_; }

  Mat eval(const Vec& q) const {
    if (q.size() != dim_) throw ValidationError("VielbeinField: point has wrong dimension");
    Mat e = eval_(q);
    if (e.rows() != dim_ || e.cols() != dim_)
      throw ValidationError("VielbeinField: eval returned wrong dimensions");
    if (!all_finite(e)) throw ValidationError("VielbeinField: eval returned non-finite entries");
    return e;
  }

 private:
  int dim_;
  EvalFn eval_;
};

struct MetricResult {
  Mat metric;       // symmetric, bit-exactly
  bool degenerate;  // vielbein singular at this point
};

/// Induced metric G = E^T diag(signs) E at one point. A singular vielbein
/// sets the degenerate flag instead of aborting.
inline MetricResult metric_from_vielbein(const VielbeinField& v, const FlatMetric& flat,
                                         const Vec& q) {
  if (v.dim() != flat.dim())
    throw ValidationError("metric_from_vielbein: vielbein and flat metric dimensions differ");
  const Mat e = v.eval(q);
  Mat scaled = e;
  for (int a = 0; a < flat.dim(); ++a)
    scaled.row(a) *= static_cast<double>(flat.signs()[static_cast<std::size_t>(a)]);
  const Mat g = e.transpose() * scaled;
  // Enforce exact symmetry; the raw product can be off by an ulp.
  const Mat sym = 0.5 * (g + Mat(g.transpose()));
  const bool degenerate = !Eigen::FullPivLU<Eigen::MatrixXd>(e).isInvertible();
  return {sym, degenerate};
}

/// A curve Q(lambda) with its analytic (or user-supplied) derivative.
struct CoordinateCurve {
  ParameterGrid lambda_grid;
  std::function<Vec(double)> eval;
  std::function<Vec(double)> deriv;
};

struct LineElementResult {
  std::vector<double> speed_squared;  // qdot^T G qdot per grid sample
  double arc_length;                  // integral of sqrt|speed_squared|
  double spacelike_length;            // contribution of speed_squared > 0
  double timelike_length;             // contribution of speed_squared < 0
  bool sign_indefinite;               // speed_squared changes sign on the grid
  bool any_degenerate_metric;
};

namespace detail {

// Composite Simpson; falls back to Simpson 3/8 on a trailing odd chunk and
// to the trapezoid rule when there is a single interval.
inline double integrate_samples(const std::vector<double>& f, double h) {
  const std::size_t intervals = f.size() - 1;
  if (intervals == 0) return 0.0;
  if (intervals == 1) return 0.5 * h * (f[0] + f[1]);
  std::size_t simpson_end = intervals;
  double total = 0.0;
  if (intervals % 2 != 0) {
    simpson_end = intervals - 3;  // intervals >= 3 here
    const std::size_t m = simpson_end;
    total += 3.0 * h / 8.0 * (f[m] + 3.0 * f[m + 1] + 3.0 * f[m + 2] + f[m + 3]);
  }
  if (simpson_end > 0) {
    double acc = f[0] + f[simpson_end];
    for (std::size_t k = 1; k < simpson_end; ++k)
      acc += (k % 2 == 1 ? 4.0 : 2.0) * f[k];
    total += h / 3.0 * acc;
  }
  return total;
}

}  // namespace detail

/// Samples ds^2/dlambda^2 along the curve and accumulates arc length with
/// composite Simpson. For indefinite signatures the spacelike and timelike
/// contributions are also reported separately.
inline LineElementResult line_element(const VielbeinField& v, const FlatMetric& flat,
                                      const CoordinateCurve& curve) {
  if (v.dim() != flat.dim())
    throw ValidationError("line_element: vielbein and flat metric dimensions differ");
  const ParameterGrid& grid = curve.lambda_grid;
  std::vector<double> speed2(grid.size());
  std::vector<double> mod(grid.size()), pos(grid.size()), neg(grid.size());
  bool any_degenerate = false;
  bool seen_pos = false, seen_neg = false;
  for (int k = 0; k <= grid.steps(); ++k) {
    const double lambda = grid.point(k);
    const Vec q = curve.eval(lambda);
    const Vec qdot = curve.deriv(lambda);
    if (q.size() != v.dim() || qdot.size() != v.dim())
      throw ValidationError("line_element: curve dimension does not match vielbein");
    const MetricResult g = metric_from_vielbein(v, flat, q);
    any_degenerate = any_degenerate || g.degenerate;
    const double v2 = qdot.dot(g.metric * qdot);
    const std::size_t i = static_cast<std::size_t>(k);
    speed2[i] = v2;
    mod[i] = std::sqrt(std::abs(v2));
    pos[i] = v2 > 0.0 ? std::sqrt(v2) : 0.0;
    neg[i] = v2 < 0.0 ? std::sqrt(-v2) : 0.0;
    seen_pos = seen_pos || v2 > 0.0;
    seen_neg = seen_neg || v2 < 0.0;
  }
  const double h = grid.h();
  return {std::move(speed2),
          detail::integrate_samples(mod, h),
          detail::integrate_samples(pos, h),
          detail::integrate_samples(neg, h),
          seen_pos && seen_neg,
          any_degenerate};
}

struct Signature {
  int n_plus;
  int n_minus;
  int n_zero;

  bool operator==(const Signature&) const = default;
};

/// Eigenvalue signature of a symmetric matrix; |lambda| <= zero_tol counts
/// as zero.
inline Signature signature_of(const Mat& g, double zero_tol = 1e-10) {
  if (g.rows() != g.cols()) throw ValidationError("signature_of: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      Eigen::MatrixXd(0.5 * (g + Mat(g.transpose()))));
  Signature sig{0, 0, 0};
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double lambda = solver.eigenvalues()[i];
    if (lambda > zero_tol)
      ++sig.n_plus;
    else if (lambda < -zero_tol)
      ++sig.n_minus;
    else
      ++sig.n_zero;
  }
  return sig;
}

/// Scalar-field coordinates Q^(A) = sum_Pi Q^Pi E_Pi^(A)(Q), a pointwise
/// contraction of the coordinates with the vielbein.
class ScalarFieldChart {
 public:
  explicit ScalarFieldChart(VielbeinField vielbein) : vielbein_(std::move(vielbein)) {}

  const VielbeinField& vielbein() const { return vielbein_; }
  int dim() const { return vielbein_.dim(); }

  Vec eval_scalars(const Vec& q) const { return vielbein_.eval(q) * q; }

 private:
  VielbeinField vielbein_;
};

}  // namespace flowmap
