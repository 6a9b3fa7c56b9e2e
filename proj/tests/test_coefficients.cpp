#include "flowmap/coefficients.hpp"

#include <doctest.h>

#include <random>

#include "oracles.hpp"

using namespace flowmap;

namespace {

// H_11(state) = state^1, everything else zero: the quadratic form becomes
// the cubic 0.5 (Q^1)^3.
CoefficientProvider cubic_provider() {
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
  return CoefficientProvider::from_functions(1, eval, deriv);
}

// Coefficients linear in the state, with analytic derivatives: a family of
// genuinely state-dependent providers for the gradient property.
CoefficientProvider linear_provider(std::mt19937_64& rng, int n) {
  const int dim = 2 * n;
  auto base = std::make_shared<Mat>(oracles::random_symmetric(rng, dim, 1.0));
  auto slopes = std::make_shared<std::vector<Mat>>();
  for (int l = 0; l < dim; ++l)
    slopes->push_back(oracles::random_symmetric(rng, dim, 0.5));
  auto eval = [base, slopes](const Vec& s) {
    Mat m = *base;
    for (int l = 0; l < s.size(); ++l) m += s[l] * (*slopes)[static_cast<std::size_t>(l)];
    return m;
  };
  auto deriv = [slopes](const Vec&, int l) { return (*slopes)[static_cast<std::size_t>(l)]; };
  return CoefficientProvider::from_functions(n, eval, deriv);
}

// Scalar form evaluated straight from the provider, independent of the
// compute_X code path.
double quadratic_form(const CoefficientProvider& provider, const Vec& s) {
  return 0.5 * s.dot(provider.eval(s) * s);
}

}  // namespace

TEST_CASE("constant coefficients pass through compute_X untouched") {
  const Mat h = Mat::Identity(2, 2);
  const auto provider = CoefficientProvider::constant(h);
  const PhaseState xi(1, Vec{{0.3, -0.8}});
  const CoefficientMatrix x = compute_X(provider, xi);
  CHECK(oracles::bitwise_equal(x.data, provider.eval(xi.values())));
  CHECK(oracles::bitwise_equal(x.data, h));
}

TEST_CASE("cubic coefficient example") {
  const auto provider = cubic_provider();
  const PhaseState xi(1, Vec{{2.0, 0.0}});
  const CoefficientMatrix x = compute_X(provider, xi);
  CHECK(x.data(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(x.data(0, 1) == 0.0);
  CHECK(x.data(1, 0) == 0.0);
  CHECK(x.data(1, 1) == 0.0);

  // grad of 0.5 (Q^1)^3 at (2, 0) is (6, 0); X xi must reproduce it.
  const Vec grad = x.data * xi.values();
  const Vec fd = oracles::fd_gradient(
      [&](const Vec& s) { return quadratic_form(provider, s); }, xi.values(), 1e-5);
  CHECK(grad[0] == doctest::Approx(6.0).epsilon(1e-10));
  CHECK(grad[1] == doctest::Approx(0.0));
  CHECK((grad - fd).norm() <= 1e-6 * (1.0 + fd.norm()));
}

TEST_CASE("free particle coefficients") {
  Mat h(2, 2);
  h << 0, 0, 0, 1;
  const auto provider = CoefficientProvider::constant(h);
  const PhaseState xi(1, Vec{{1.7, -2.5}});
  const CoefficientMatrix x = compute_X(provider, xi);
  CHECK(oracles::bitwise_equal(x.data, h));
  const Vec grad = x.data * xi.values();
  CHECK(grad[0] == 0.0);
  CHECK(grad[1] == doctest::Approx(-2.5));
}

TEST_CASE("compute_Y mirrors compute_X") {
  SUBCASE("constant identity") {
    const auto provider = CoefficientProvider::constant(Mat(Mat::Identity(2, 2)));
    const PhaseState eta(1, Vec{{5.0, 1.0}});
    CHECK(oracles::bitwise_equal(compute_Y(provider, eta).data, Mat(Mat::Identity(2, 2))));
  }
  SUBCASE("state-dependent example") {
    const auto provider = cubic_provider();
    const PhaseState eta(1, Vec{{2.0, 0.0}});
    CHECK(compute_Y(provider, eta).data(0, 0) == doctest::Approx(3.0));
  }
  SUBCASE("zero coefficients") {
    const auto provider = CoefficientProvider::constant(Mat(Mat::Zero(2, 2)));
    const PhaseState eta(1, Vec{{0.4, 0.9}});
    CHECK(compute_Y(provider, eta).data.isZero(0));
  }
}

TEST_CASE("compute_Z scales by dt/dtau") {
  const CoefficientMatrix x{Mat(Mat::Identity(2, 2))};
  SUBCASE("identity reparameterization") {
    const CoefficientMatrix z = compute_Z(x, Reparameterization::identity(), 0.7);
    CHECK(oracles::bitwise_equal(z.data, x.data));
  }
  SUBCASE("frozen t") {
    const CoefficientMatrix z = compute_Z(x, Reparameterization::affine(0.0, 1.0), 0.7);
    CHECK(z.data.isZero(0));
  }
  SUBCASE("constant scaling") {
    const CoefficientMatrix z = compute_Z(x, Reparameterization::affine(2.0, 0.0), 0.7);
    CHECK(oracles::bitwise_equal(z.data, Mat(2.0 * Mat::Identity(2, 2))));
  }
  SUBCASE("linear in the factor") {
    std::mt19937_64 rng(21);
    const CoefficientMatrix m{oracles::random_matrix(rng, 4, 4)};
    const Mat sum = compute_Z(m, Reparameterization::affine(1.3, 0.0), 0.0).data +
                    compute_Z(m, Reparameterization::affine(0.6, 0.0), 0.0).data;
    const Mat direct = compute_Z(m, Reparameterization::affine(1.9, 0.0), 0.0).data;
    CHECK((sum - direct).norm() <= 1e-15 * direct.norm());
  }
  SUBCASE("non-finite dt/dtau is rejected") {
    const Reparameterization broken{[](double tau) { return tau; },
                                    [](double) { return std::nan(""); }};
    CHECK_THROWS_AS(compute_Z(x, broken, 0.0), ValidationError);
  }
}

TEST_CASE("dimension mismatches are rejected") {
  const auto provider = CoefficientProvider::constant(Mat(Mat::Identity(2, 2)));
  CHECK_THROWS_AS(compute_X(provider, PhaseState(2, Vec::Zero(4))), ValidationError);
  CHECK_THROWS_AS(energy(provider, PhaseState(2, Vec::Zero(4))), ValidationError);
}

TEST_CASE("energy evaluates the quadratic form") {
  CHECK(energy(CoefficientProvider::constant(Mat(Mat::Identity(2, 2))),
               PhaseState(1, Vec{{1.0, 0.0}})) == doctest::Approx(0.5));
  CHECK(energy(CoefficientProvider::constant(Mat(Mat::Zero(2, 2))),
               PhaseState(1, Vec{{3.0, -4.0}})) == 0.0);
  CHECK(energy(cubic_provider(), PhaseState(1, Vec{{2.0, 0.0}})) == doctest::Approx(4.0));
}

TEST_CASE("gradient consistency across random providers and states") {
  std::mt19937_64 rng(99);
  for (int n : {1, 2}) {
    const int dim = 2 * n;
    for (bool constant : {true, false}) {
      const CoefficientProvider provider =
          constant ? CoefficientProvider::constant(oracles::random_symmetric(rng, dim, 1.0))
                   : linear_provider(rng, n);
      for (int trial = 0; trial < 100; ++trial) {
        const Vec s = oracles::random_vector(rng, dim);
        const CoefficientMatrix x = compute_X(provider, PhaseState(n, s));
        const Vec fd = oracles::fd_gradient(
            [&](const Vec& v) { return quadratic_form(provider, v); }, s, 1e-5);
        CHECK((x.data * s - fd).norm() <= 1e-6 * (1.0 + fd.norm()));
      }
    }
  }
}
