#pragma once

// Foundational value types shared by the whole library: phase vectors,
// dense matrices with 2x2 block views, sign-block structure matrices,
// parameter grids, reparameterizations and coefficient providers.
//
// Everything here is immutable after construction and safe for concurrent
// read access.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

namespace flowmap {

// Dense row-major storage throughout; problems are small (n <= ~16).
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

/// Thrown when an input violates a type invariant or a dimension contract.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an integration blows up (entry beyond the cutoff or NaN).
/// Carries the grid index that was reached and the pipeline stage, if known.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t grid_index,
                  std::string stage = {})
      : std::runtime_error(what), grid_index(grid_index), stage(std::move(stage)) {}

  std::size_t grid_index;
  std::string stage;
};

inline bool all_finite(const Mat& m) { return m.allFinite(); }
inline bool all_finite(const Vec& v) { return v.allFinite(); }

/// A phase-space point: 2n entries ordered (Q^1..Q^n, P^1..P^n).
class PhaseState {
 public:
  PhaseState(int n, Vec values) : n_(n), values_(std::move(values)) {
    if (n_ < 1) throw ValidationError("PhaseState: n must be positive");
    if (values_.size() != 2 * n_)
      throw ValidationError("PhaseState: expected " + std::to_string(2 * n_) +
                            " entries, got " + std::to_string(values_.size()));
    if (!all_finite(values_))
      throw ValidationError("PhaseState: non-finite entry");
  }

  /// Deduces n from the vector length (must be even).
  explicit PhaseState(Vec values)
      : PhaseState(check_even(values.size()) / 2, std::move(values)) {}

  int n() const { return n_; }
  int dim() const { return 2 * n_; }
  const Vec& values() const { return values_; }
  Vec coordinates() const { return values_.head(n_); }
  Vec momenta() const { return values_.tail(n_); }

 private:
  static int check_even(Eigen::Index len) {
    if (len < 2 || len % 2 != 0)
      throw ValidationError("PhaseState: length must be even and >= 2");
    return static_cast<int>(len);
  }

  int n_;
  Vec values_;
};

class BlockMatrix;

/// The anti-diagonal structure matrix [[0, eps_upper*Id],[eps_lower*Id, 0]].
/// The antisymmetric choice (eps_upper == -eps_lower) is the standard
/// symplectic form; the symmetric choice gives hyperbolic dynamics.
class SignBlockMatrix {
 public:
  SignBlockMatrix(int n, int eps_upper, int eps_lower)
      : n_(n), eps_upper_(eps_upper), eps_lower_(eps_lower) {
    if (n_ < 1) throw ValidationError("SignBlockMatrix: n must be positive");
    if (std::abs(eps_upper_) != 1 || std::abs(eps_lower_) != 1)
      throw ValidationError("SignBlockMatrix: eps values must be -1 or +1");
  }

  int n() const { return n_; }
  int dim() const { return 2 * n_; }
  int eps_upper() const { return eps_upper_; }
  int eps_lower() const { return eps_lower_; }
  bool antisymmetric() const { return eps_upper_ == -eps_lower_; }
  bool symmetric() const { return eps_upper_ == eps_lower_; }

  /// Dense 2n x 2n realization.
  Mat materialize() const {
    Mat m = Mat::Zero(2 * n_, 2 * n_);
    m.topRightCorner(n_, n_) = eps_upper_ * Mat::Identity(n_, n_);
    m.bottomLeftCorner(n_, n_) = eps_lower_ * Mat::Identity(n_, n_);
    return m;
  }

 private:
  int n_;
  int eps_upper_;
  int eps_lower_;
};

/// A dense 2n x 2n matrix with access to its four n x n blocks,
/// numbered b1 (top-left), b2 (top-right), b3 (bottom-left), b4 (bottom-right).
class BlockMatrix {
 public:
  explicit BlockMatrix(Mat data) : data_(std::move(data)) {
    if (data_.rows() != data_.cols())
      throw ValidationError("BlockMatrix: matrix must be square");
    if (data_.rows() < 2 || data_.rows() % 2 != 0)
      throw ValidationError("BlockMatrix: dimension must be even and >= 2");
    n_ = static_cast<int>(data_.rows()) / 2;
  }

  static BlockMatrix from_blocks(const Mat& b1, const Mat& b2, const Mat& b3,
                                 const Mat& b4) {
    const Eigen::Index n = b1.rows();
    for (const Mat* b : {&b1, &b2, &b3, &b4})
      if (b->rows() != n || b->cols() != n)
        throw ValidationError("BlockMatrix: blocks must be square and equal-sized");
    Mat m(2 * n, 2 * n);
    m.topLeftCorner(n, n) = b1;
    m.topRightCorner(n, n) = b2;
    m.bottomLeftCorner(n, n) = b3;
    m.bottomRightCorner(n, n) = b4;
    return BlockMatrix(std::move(m));
  }

  static BlockMatrix identity(int n) { return BlockMatrix(Mat::Identity(2 * n, 2 * n)); }

  int n() const { return n_; }
  int dim() const { return 2 * n_; }
  const Mat& data() const { return data_; }

  Mat b1() const { return data_.topLeftCorner(n_, n_); }
  Mat b2() const { return data_.topRightCorner(n_, n_); }
  Mat b3() const { return data_.bottomLeftCorner(n_, n_); }
  Mat b4() const { return data_.bottomRightCorner(n_, n_); }

 private:
  Mat data_;
  int n_;
};

inline BlockMatrix assemble_sign_matrix(const SignBlockMatrix& s) {
  return BlockMatrix(s.materialize());
}

/// I * v without materializing I: swaps the halves and applies the signs.
inline Vec apply_sign_block(const SignBlockMatrix& s, const Vec& v) {
  const int n = s.n();
  if (v.size() != 2 * n) throw ValidationError("apply_sign_block: dimension mismatch");
  Vec r(2 * n);
  r.head(n) = static_cast<double>(s.eps_upper()) * v.tail(n);
  r.tail(n) = static_cast<double>(s.eps_lower()) * v.head(n);
  return r;
}

/// I * M: block-row swap with signs.
inline Mat sign_block_times(const SignBlockMatrix& s, const Mat& m) {
  const int n = s.n();
  if (m.rows() != 2 * n) throw ValidationError("sign_block_times: dimension mismatch");
  Mat r(m.rows(), m.cols());
  r.topRows(n) = static_cast<double>(s.eps_upper()) * m.bottomRows(n);
  r.bottomRows(n) = static_cast<double>(s.eps_lower()) * m.topRows(n);
  return r;
}

/// M * I: block-column swap with signs.
inline Mat times_sign_block(const Mat& m, const SignBlockMatrix& s) {
  const int n = s.n();
  if (m.cols() != 2 * n) throw ValidationError("times_sign_block: dimension mismatch");
  Mat r(m.rows(), m.cols());
  r.leftCols(n) = static_cast<double>(s.eps_lower()) * m.rightCols(n);
  r.rightCols(n) = static_cast<double>(s.eps_upper()) * m.leftCols(n);
  return r;
}

/// Splits a square even-dimensioned matrix into its four blocks.
inline std::array<Mat, 4> split_blocks(const BlockMatrix& m) {
  return {m.b1(), m.b2(), m.b3(), m.b4()};
}

/// The constant blocks a, b, c, d of the composed solution, assembled as
/// K = [[a, d],[b, c]] (d sits top-right, b bottom-left).
class GlueConstants {
 public:
  GlueConstants(Mat a, Mat b, Mat c, Mat d)
      : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), d_(std::move(d)) {
    const Eigen::Index n = a_.rows();
    for (const Mat* blk : {&a_, &b_, &c_, &d_}) {
      if (blk->rows() != n || blk->cols() != n)
        throw ValidationError("GlueConstants: a, b, c, d must be square and equal-sized");
      if (!all_finite(*blk)) throw ValidationError("GlueConstants: non-finite entry");
    }
    if (n < 1) throw ValidationError("GlueConstants: n must be positive");
  }

  static GlueConstants identity(int n) {
    return GlueConstants(Mat::Identity(n, n), Mat::Zero(n, n), Mat::Identity(n, n),
                         Mat::Zero(n, n));
  }

  int n() const { return static_cast<int>(a_.rows()); }
  const Mat& a() const { return a_; }
  const Mat& b() const { return b_; }
  const Mat& c() const { return c_; }
  const Mat& d() const { return d_; }

  BlockMatrix assembled() const { return BlockMatrix::from_blocks(a_, d_, b_, c_); }

 private:
  Mat a_, b_, c_, d_;
};

/// Supplies the symmetric quadratic-form coefficients H_ij(state) (or C_ij)
/// and their state derivatives. User callables are symmetrized internally,
/// so eval() and deriv() always return exactly symmetric matrices.
class CoefficientProvider {
 public:
  using EvalFn = std::function<Mat(const Vec&)>;
  using DerivFn = std::function<Mat(const Vec&, int)>;

  /// Constant coefficients: deriv is identically zero.
  static CoefficientProvider constant(const Mat& coeffs) {
    if (coeffs.rows() != coeffs.cols() || coeffs.rows() < 2 || coeffs.rows() % 2 != 0)
      throw ValidationError("CoefficientProvider: matrix must be square, even-dimensioned");
    if (!all_finite(coeffs)) throw ValidationError("CoefficientProvider: non-finite entry");
    const int n = static_cast<int>(coeffs.rows()) / 2;
    Mat sym = symmetrize(coeffs);
    CoefficientProvider p(n, true);
    p.eval_ = [sym](const Vec&) { return sym; };
    p.deriv_ = [n](const Vec&, int) { return Mat::Zero(2 * n, 2 * n); };
    return p;
  }

  /// State-dependent coefficients with analytic derivatives.
  /// deriv(state, l) must return the entrywise derivative with respect to
  /// state component l (0-based).
  static CoefficientProvider from_functions(int n, EvalFn eval, DerivFn deriv) {
    if (n < 1) throw ValidationError("CoefficientProvider: n must be positive");
    CoefficientProvider p(n, false);
    p.eval_ = [eval = std::move(eval)](const Vec& s) { return symmetrize(eval(s)); };
    p.deriv_ = [deriv = std::move(deriv)](const Vec& s, int l) {
      return symmetrize(deriv(s, l));
    };
    return p;
  }

  /// Fallback for user coefficients without analytic derivatives:
  /// central finite differences with the given step.
  static CoefficientProvider with_fd_derivatives(int n, EvalFn eval,
                                                 double step = 1e-6) {
    if (n < 1) throw ValidationError("CoefficientProvider: n must be positive");
    CoefficientProvider p(n, false);
    auto shared = std::make_shared<EvalFn>(std::move(eval));
    p.eval_ = [shared](const Vec& s) { return symmetrize((*shared)(s)); };
    p.deriv_ = [shared, step](const Vec& s, int l) {
      Vec hi = s, lo = s;
      hi[l] += step;
      lo[l] -= step;
      return symmetrize(Mat(((*shared)(hi) - (*shared)(lo)) / (2.0 * step)));
    };
    return p;
  }

  int n() const { return n_; }
  int dim() const { return 2 * n_; }
  bool is_constant() const { return is_constant_; }

  /// The symmetric 2n x 2n coefficient matrix at the given state.
  Mat eval(const Vec& state) const {
    check_state(state);
    Mat m = eval_(state);
    check_output(m, "eval");
    return m;
  }

  /// Entrywise derivative of the coefficient matrix with respect to
  /// state component l (0-based). Zero for constant providers.
  Mat deriv(const Vec& state, int l) const {
    check_state(state);
    if (l < 0 || l >= 2 * n_)
      throw ValidationError("CoefficientProvider: derivative index out of range");
    Mat m = deriv_(state, l);
    check_output(m, "deriv");
    return m;
  }

 private:
  CoefficientProvider(int n, bool constant) : n_(n), is_constant_(constant) {}

  static Mat symmetrize(const Mat& m) { return 0.5 * (m + Mat(m.transpose())); }

  void check_state(const Vec& state) const {
    if (state.size() != 2 * n_)
      throw ValidationError("CoefficientProvider: state has wrong dimension");
  }

  void check_output(const Mat& m, const char* what) const {
    if (m.rows() != 2 * n_ || m.cols() != 2 * n_)
      throw ValidationError(std::string("CoefficientProvider: ") + what +
                            " returned wrong dimensions");
    if (!all_finite(m))
      throw ValidationError(std::string("CoefficientProvider: ") + what +
                            " returned non-finite entries");
  }

  int n_;
  bool is_constant_;
  EvalFn eval_;
  DerivFn deriv_;
};

/// A uniform grid tau_k = tau_start + k*h, k = 0..steps, h = span/steps.
class ParameterGrid {
 public:
  ParameterGrid(double tau_start, double tau_end, int steps)
      : start_(tau_start), end_(tau_end), steps_(steps) {
    if (!(std::isfinite(start_) && std::isfinite(end_)))
      throw ValidationError("ParameterGrid: endpoints must be finite");
    if (steps_ < 1) throw ValidationError("ParameterGrid: steps must be >= 1");
    if (!(end_ > start_)) throw ValidationError("ParameterGrid: tau_end must exceed tau_start");
  }

  double start() const { return start_; }
  double end() const { return end_; }
  int steps() const { return steps_; }
  std::size_t size() const { return static_cast<std::size_t>(steps_) + 1; }
  double h() const { return (end_ - start_) / steps_; }
  double point(int k) const { return start_ + k * h(); }

  /// Same span at `factor` times the resolution.
  ParameterGrid refined(int factor) const {
    return ParameterGrid(start_, end_, steps_ * factor);
  }

  bool operator==(const ParameterGrid& o) const {
    return start_ == o.start_ && end_ == o.end_ && steps_ == o.steps_;
  }

 private:
  double start_;
  double end_;
  int steps_;
};

/// The relation t(tau) between the two evolution parameters, carried
/// together with its derivative dt/dtau.
struct Reparameterization {
  std::function<double(double)> t_of_tau;
  std::function<double(double)> dt_dtau;

  static Reparameterization identity() {
    return {[](double tau) { return tau; }, [](double) { return 1.0; }};
  }

  /// t = alpha*tau + beta.
  static Reparameterization affine(double alpha, double beta) {
    return {[alpha, beta](double tau) { return alpha * tau + beta; },
            [alpha](double) { return alpha; }};
  }
};

}  // namespace flowmap
