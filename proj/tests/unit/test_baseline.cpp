#include <doctest.h>

#include <cmath>

#include "deltacert/baseline.hpp"
#include "deltacert/builtin.hpp"
#include "deltacert/error.hpp"

using namespace deltacert;

namespace {

double residual(const DenseMatrix& a, const DenseMatrix& p, double theta, double gamma_bar,
                const DenseMatrix& q) {
  const std::size_t n = a.rows;
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double apa = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = 0; l < n; ++l) apa += a(k, i) * p(k, l) * a(l, j);
      }
      worst = std::max(worst, std::abs((1 + theta) * apa - gamma_bar * p(i, j) + q(i, j)));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("symmetric eigendecomposition of a 3x3 matrix") {
  const DenseMatrix m{3, 3, {2, 1, 0, 1, 2, 1, 0, 1, 2}};
  const SymEigen e = sym_eigen(m);
  CHECK(e.values[0] == doctest::Approx(2 - std::sqrt(2.0)));
  CHECK(e.values[1] == doctest::Approx(2.0));
  CHECK(e.values[2] == doctest::Approx(2 + std::sqrt(2.0)));
  // M v = lambda v for the first pair.
  for (std::size_t r = 0; r < 3; ++r) {
    double mv = 0.0;
    for (std::size_t c = 0; c < 3; ++c) mv += m(r, c) * e.vectors(c, 0);
    CHECK(mv == doctest::Approx(e.values[0] * e.vectors(r, 0)).epsilon(1e-10));
  }
  CHECK_THROWS_AS(sym_eigen(DenseMatrix{2, 2, {1, 2, 3, 4}}), Error);
}

TEST_CASE("spectral radius handles complex eigenvalues") {
  CHECK(spectral_radius({2, 2, {0, -0.5, 0.5, 0}}) == doctest::Approx(0.5));
  CHECK(spectral_radius(builtin::closed_form::a1()) < 1.0);
}

TEST_CASE("scaled Stein equation: scalar closed form and matrix residual") {
  const DenseMatrix p = solve_scaled_stein({1, 1, {0.5}}, 1.0, 0.99, {1, 1, {1.0}});
  CHECK(p.values[0] == doctest::Approx(1.0 / (0.99 - 2 * 0.25)));
  const auto a = builtin::closed_form::a2();
  const DenseMatrix q{2, 2, {1, 0, 0, 1}};
  const DenseMatrix p2 = solve_scaled_stein(a, 1.0, 0.99, q);
  CHECK(residual(a, p2, 1.0, 0.99, q) < 1e-10);
  // No solution once (1 + theta) rho(A)^2 >= gamma_bar.
  CHECK_THROWS_AS(solve_scaled_stein({1, 1, {0.9}}, 1.0, 0.99, {1, 1, {1.0}}), Error);
}

TEST_CASE("LMI check and rho for the designed P") {
  const auto a = builtin::closed_form::a1();
  const DenseMatrix p = solve_scaled_stein(a, 1.0, 0.99, {2, 2, {1, 0, 0, 1}});
  const LmiCheck l = verify_lmi(p, a, 1.0, 0.99);
  CHECK(l.pass);
  // gamma_bar P - (1 + theta) A'PA = Q = I.
  CHECK(l.margin == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_FALSE(verify_lmi(DenseMatrix{2, 2, {1, 0, 0, 1}}, DenseMatrix{2, 2, {1, 0, 0, 1}}, 1.0, 0.99).pass);
  // rho = 2 * lambda_max(B'PB) for theta = 1 and diagonal B.
  const DenseMatrix eye{2, 2, {1, 0, 0, 1}};
  CHECK(rho_from(eye, {2, 2, {0.5, 0, 0, 0.1}}, 1.0) == doctest::Approx(2 * 0.25));
}

TEST_CASE("model-based path on the two-subsystem network") {
  auto neg_b1 = builtin::closed_form::b1();
  for (auto& v : neg_b1.values) v = -v;
  const std::vector<LinearModel> models = {{builtin::closed_form::a1(), neg_b1},
                                           {builtin::closed_form::a2(), builtin::closed_form::b2()}};
  const auto topo = NetworkTopology::from_edges(2, {{0, 1}, {1, 0}});
  const ModelBasedResult r = model_based_evaluate(models, topo);
  REQUIRE(r.certificate.has_value());
  CHECK(r.composition.zeta < 0);
  CHECK(r.certificate->certificates[0].source == "model");
  const auto coeffs = quadratic_coefficients(r.p[0]);
  CHECK(coeffs.size() == 3);
  CHECK(coeffs[1] == doctest::Approx(2 * r.p[0](0, 1)));
}

TEST_CASE("model-based certification refuses unstable subsystems") {
  const std::vector<LinearModel> models = {{{1, 1, {1.2}}, {1, 1, {0.1}}},
                                           {{1, 1, {0.2}}, {1, 1, {0.1}}}};
  try {
    model_based_certify(models, NetworkTopology::ring(2));
    FAIL("expected refusal");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kRefused);
    CHECK(std::string(e.what()).rfind("lmi stage:", 0) == 0);
  }
}
