#include <doctest.h>

#include <cmath>

#include "filmlab/operator.hpp"
#include "filmlab/rng.hpp"

using namespace filmlab;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Vector vec3(double a, double b, double c) {
  Vector v(3);
  v << a, b, c;
  return v;
}

DifferentialOperator diag_symbol_operator() {
  // symbol diag(eta_1, eta_2): rank 1 on the axes, 2 elsewhere
  Matrix a1 = Matrix::Zero(2, 2), a2 = Matrix::Zero(2, 2);
  a1(0, 0) = 1.0;
  a2(1, 1) = 1.0;
  return DifferentialOperator::from_coeffs({a1, a2});
}

}  // namespace

TEST_CASE("symbol evaluation") {
  const auto div3 = builtin_operator("div", 1, 3);
  CHECK(div3.l == 1);
  CHECK(div3.m == 3);

  const Matrix s1 = evaluate_symbol(div3, vec3(1, 0, 0));
  CHECK(s1(0, 0) == 1.0);
  CHECK(s1(0, 1) == 0.0);
  CHECK(s1(0, 2) == 0.0);

  const Matrix s2 = evaluate_symbol(div3, vec3(1, 2, 3));
  CHECK(s2(0, 0) == 1.0);
  CHECK(s2(0, 1) == 2.0);
  CHECK(s2(0, 2) == 3.0);

  const auto curl2 = builtin_operator("curl", 1, 2);
  const Matrix c = evaluate_symbol(curl2, vec2(1, 0));
  CHECK(c(0, 0) == 0.0);
  CHECK(c(0, 1) == 1.0);

  CHECK_THROWS_AS(evaluate_symbol(div3, vec2(1, 0)), std::invalid_argument);
}

TEST_CASE("symbol linearity") {
  const auto curl3 = builtin_operator("curl", 2, 3);
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Vector eta(3), mu(3);
    for (int i = 0; i < 3; ++i) {
      eta[i] = rng.uniform(-2, 2);
      mu[i] = rng.uniform(-2, 2);
    }
    const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
    const Matrix lhs = evaluate_symbol(curl3, a * eta + b * mu);
    const Matrix rhs = a * evaluate_symbol(curl3, eta) + b * evaluate_symbol(curl3, mu);
    CHECK((lhs - rhs).norm() <= 1e-13 * (1.0 + rhs.norm()));
  }
}

TEST_CASE("rescaled symbol") {
  const auto div2 = builtin_operator("div", 1, 2);
  const Matrix at_one = evaluate_rescaled_symbol(div2, 1.0, vec2(0.3, -0.7));
  CHECK((at_one - evaluate_symbol(div2, vec2(0.3, -0.7))).norm() == 0.0);

  const Matrix s = evaluate_rescaled_symbol(div2, 0.5, vec2(0, 1));
  CHECK(s(0, 0) == 0.0);
  CHECK(s(0, 1) == 2.0);

  const Matrix t = evaluate_rescaled_symbol(div2, 0.1, vec2(1, 1));
  CHECK(t(0, 0) == doctest::Approx(1.0));
  CHECK(t(0, 1) == doctest::Approx(10.0));

  CHECK_THROWS_AS(evaluate_rescaled_symbol(div2, 0.0, vec2(1, 1)), std::invalid_argument);
}

TEST_CASE("constant rank certificates") {
  const auto div3 = builtin_operator("div", 1, 3);
  const RankCertificate c1 = check_constant_rank(div3, 10000);
  CHECK(c1.is_constant);
  CHECK(c1.r == 1);
  CHECK(c1.samples >= 10000);

  const auto curl3 = builtin_operator("curl", 1, 3);
  const RankCertificate c2 = check_constant_rank(curl3, 10000);
  CHECK(c2.is_constant);
  CHECK(c2.r == 2);  // r = n (d-1)

  const auto curl2 = builtin_operator("curl", 1, 2);
  CHECK(check_constant_rank(curl2, 2000).r == 1);

  const RankCertificate c3 = check_constant_rank(diag_symbol_operator(), 500);
  CHECK_FALSE(c3.is_constant);
  CHECK(c3.r == 2);

  // trivial operator is rejected with its own flag
  Matrix zero = Matrix::Zero(1, 2);
  const auto trivial = DifferentialOperator::from_coeffs({zero, zero});
  const RankCertificate c4 = check_constant_rank(trivial, 10);
  CHECK(c4.trivial);
  CHECK_FALSE(c4.is_constant);
}

TEST_CASE("normalization") {
  SUBCASE("divergence is already normalized") {
    const auto div3 = builtin_operator("div", 1, 3);
    auto [normalized, dec] = normalize(div3);
    CHECK(dec.r == 1);
    CHECK((dec.row_transform - Matrix::Identity(1, 1)).norm() == 0.0);
    CHECK((normalized.last_coeff() - div3.last_coeff()).norm() == 0.0);
  }

  SUBCASE("row scaling is undone") {
    Matrix a1(1, 3), a2(1, 3), a3(1, 3);
    a1 << 2, 0, 0;
    a2 << 0, 2, 0;
    a3 << 0, 0, 2;
    const auto scaled = DifferentialOperator::from_coeffs({a1, a2, a3});
    auto [normalized, dec] = normalize(scaled);
    CHECK(dec.row_transform(0, 0) == doctest::Approx(0.5));
    CHECK(normalized.last_coeff()(0, 2) == doctest::Approx(1.0));
  }

  SUBCASE("curl rows containing d_3 move to the front") {
    const auto curl3 = builtin_operator("curl", 1, 3);
    // row order (1,2), (1,3), (2,3); only the last two involve d_3
    auto [normalized, dec] = normalize(curl3);
    CHECK(dec.r == 2);
    CHECK(normalized.last_coeff().row(0).norm() > 0.5);
    CHECK(normalized.last_coeff().row(1).norm() > 0.5);
    CHECK(normalized.last_coeff().row(2).norm() == 0.0);
    // the transform is a permutation: every entry 0 or +-1
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double v = std::abs(dec.row_transform(i, j));
        CHECK((v < 1e-14 || std::abs(v - 1.0) < 1e-14));
      }
  }

  SUBCASE("normalization preserves the symbol up to the row transform") {
    const auto curl3 = builtin_operator("curl", 2, 3);
    auto [normalized, dec] = normalize(curl3);
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      Vector eta(3);
      for (int i = 0; i < 3; ++i) eta[i] = rng.uniform(-1, 1);
      const Matrix lhs = dec.row_transform * evaluate_symbol(curl3, eta);
      const Matrix rhs = evaluate_symbol(normalized, eta);
      CHECK((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }
  }

  SUBCASE("oversized tolerance is a degenerate normalization") {
    const auto div3 = builtin_operator("div", 1, 3);
    CHECK_THROWS_AS(normalize(div3, 2.0), std::runtime_error);
  }
}

TEST_CASE("limit operator") {
  SUBCASE("divergence: A_0 acts as d_3 on the last component") {
    const auto div3 = builtin_operator("div", 1, 3);
    auto [normalized, dec] = normalize(div3);
    const LimitOperator lim = limit_operator(normalized, dec);
    // symbol at e_3 is [A^(d)_+] = [0,0,1]; at (eta', 0) it vanishes (l-r = 0)
    const Matrix at_ed = evaluate_symbol(lim.base, vec3(0, 0, 1));
    CHECK(at_ed(0, 0) == 0.0);
    CHECK(at_ed(0, 1) == 0.0);
    CHECK(at_ed(0, 2) == 1.0);
    const Matrix inplane = evaluate_symbol(lim.base, vec3(0.4, -1.2, 0));
    CHECK(inplane.norm() == 0.0);
  }

  SUBCASE("A^(d) = 0 branch reduces to A'") {
    Matrix a1(1, 2), a2(1, 2);
    a1 << 1, 0;
    a2 << 0, 0;
    const auto op = DifferentialOperator::from_coeffs({a1, a2});
    auto [normalized, dec] = normalize(op);
    CHECK(dec.r == 0);
    const LimitOperator lim = limit_operator(normalized, dec);
    const Matrix at_ed = evaluate_symbol(lim.base, vec2(0, 1));
    CHECK(at_ed.norm() == 0.0);
    const Matrix inplane = evaluate_symbol(lim.base, vec2(1, 0));
    CHECK(inplane(0, 0) == 1.0);
  }

  SUBCASE("curl: in-plane rows survive below, thickness rows above") {
    const auto curl3 = builtin_operator("curl", 1, 3);
    auto [normalized, dec] = normalize(curl3);
    const LimitOperator lim = limit_operator(normalized, dec);
    const Matrix at_ed = evaluate_symbol(lim.base, vec3(0, 0, 1));
    CHECK(at_ed.bottomRows(1).norm() == 0.0);
    CHECK(at_ed.topRows(2).norm() > 0.5);
    const Matrix inplane = evaluate_symbol(lim.base, vec3(1, 1, 0));
    CHECK(inplane.topRows(2).norm() == 0.0);
    CHECK(inplane.bottomRows(1).norm() > 0.5);
  }

  SUBCASE("dimension mismatch is rejected") {
    const auto div3 = builtin_operator("div", 1, 3);
    auto [normalized, dec] = normalize(div3);
    dec.a_d_plus = Matrix::Zero(2, 3);
    dec.r = 2;
    CHECK_THROWS_AS(limit_operator(normalized, dec), std::invalid_argument);
  }
}

TEST_CASE("antisymmetry residual") {
  for (int d : {2, 3, 4}) {
    const auto divd = builtin_operator("div", 1, d);
    CHECK(check_antisymmetry(divd) == 0.0);
  }
  // d=2: single pair k1=k2=1, residual ||2 A^(1) (A^(2))^+ A^(1)||
  Matrix a1(1, 2), a2(1, 2);
  a1 << 1, 1;
  a2 << 0, 1;
  const auto op = DifferentialOperator::from_coeffs({a1, a2});
  const Matrix pinv = pseudo_inverse(a2);
  const double expected = (2.0 * a1 * pinv * a1).norm();
  CHECK(check_antisymmetry(op) == doctest::Approx(expected));
  CHECK(expected > 0.0);
}

TEST_CASE("kernel basis") {
  const auto div3 = builtin_operator("div", 1, 3);
  const Matrix at_e1 = evaluate_symbol(div3, vec3(1, 0, 0));
  const Matrix basis = kernel_basis(at_e1);
  CHECK(basis.cols() == 2);
  CHECK((at_e1 * basis).norm() <= 1e-12);
  CHECK((basis.transpose() * basis - Matrix::Identity(2, 2)).norm() <= 1e-12);
  // spans {e2, e3}
  for (int c = 0; c < 2; ++c) CHECK(std::abs(basis(0, c)) <= 1e-12);

  const Matrix zero = Matrix::Zero(2, 3);
  CHECK((kernel_basis(zero) - Matrix::Identity(3, 3)).norm() == 0.0);

  // 2D curl at (1,1): kernel spanned by (1,1)/sqrt(2)
  const auto curl2 = builtin_operator("curl", 1, 2);
  const Matrix at_diag = evaluate_symbol(curl2, vec2(1, 1));
  const Matrix kb = kernel_basis(at_diag);
  REQUIRE(kb.cols() == 1);
  CHECK(std::abs(std::abs(kb(0, 0)) - 1.0 / std::sqrt(2.0)) <= 1e-12);
  CHECK(std::abs(kb(0, 0) - kb(1, 0)) <= 1e-12);
}

TEST_CASE("kernel dimension is m - r at every sampled direction") {
  for (const auto& [name, n, d] : {std::tuple<std::string, int, int>{"div", 1, 3},
                                   std::tuple<std::string, int, int>{"curl", 1, 3},
                                   std::tuple<std::string, int, int>{"curl", 2, 2}}) {
    const auto op = builtin_operator(name, n, d);
    const RankCertificate cert = check_constant_rank(op, 300);
    REQUIRE(cert.is_constant);
    for (const Vector& eta : sphere_directions(d, 50))
      CHECK(kernel_basis(evaluate_symbol(op, eta)).cols() == op.m - cert.r);
  }
}

TEST_CASE("builtin operators") {
  const auto div2 = builtin_operator("div", 1, 2);
  CHECK(div2.coeff(0)(0, 0) == 1.0);
  CHECK(div2.coeff(0)(0, 1) == 0.0);
  CHECK(div2.coeff(1)(0, 0) == 0.0);
  CHECK(div2.coeff(1)(0, 1) == 1.0);

  const auto curl2 = builtin_operator("curl", 1, 2);
  CHECK(curl2.coeff(0)(0, 0) == 0.0);
  CHECK(curl2.coeff(0)(0, 1) == 1.0);
  CHECK(curl2.coeff(1)(0, 0) == -1.0);
  CHECK(curl2.coeff(1)(0, 1) == 0.0);

  const auto curl22 = builtin_operator("curl", 2, 2);
  CHECK(curl22.l == 2);
  CHECK(curl22.m == 4);
  // block-diagonal over the two field rows
  for (int k = 0; k < 2; ++k) {
    CHECK(curl22.coeff(k).row(0).tail(2).norm() == 0.0);
    CHECK(curl22.coeff(k).row(1).head(2).norm() == 0.0);
  }

  CHECK(builtin_operator("curl", 1, 3).l == 3);
  CHECK(builtin_operator("curl", 2, 3).l == 6);
  CHECK(builtin_operator("curl", 2, 3).m == 6);

  CHECK_THROWS_AS(builtin_operator("grad", 1, 3), std::invalid_argument);
  CHECK_THROWS_AS(builtin_operator("div", 1, 1), std::invalid_argument);
}
