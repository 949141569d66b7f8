#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace filmlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// First-order constant-coefficient operator sum_k A^(k) d_k, stored as its
/// d coefficient matrices of common shape l x m.
struct DifferentialOperator {
  int d = 0;
  int l = 0;
  int m = 0;
  std::vector<Matrix> coeffs;

  /// Builds from the coefficient list; validates common shape, d >= 2.
  static DifferentialOperator from_coeffs(std::vector<Matrix> mats);

  const Matrix& coeff(int k) const { return coeffs[static_cast<std::size_t>(k)]; }
  const Matrix& last_coeff() const { return coeffs.back(); }
};

/// Sphere-sampled constant-rank certificate.
struct RankCertificate {
  bool is_constant = false;
  int r = 0;
  int samples = 0;
  double tol = 0.0;
  bool trivial = false;  // all coefficient matrices vanish
};

/// Row decomposition produced by normalize(): after left-multiplication with
/// row_transform the last coefficient reads [a_d_plus; 0].
struct OperatorDecomposition {
  int r = 0;
  Matrix a_d_plus;                    // r x m
  std::vector<Matrix> a_prime_plus;   // d-1 matrices, first r rows of A'
  std::vector<Matrix> a_prime_minus;  // d-1 matrices, last l-r rows of A'
  Matrix row_transform;               // l x l invertible
  double condition = 1.0;
};

/// The thin-film limit constraint, assembled as r rows a_d_plus acting via
/// d_d stacked on the l-r trailing rows of A' acting via d_1..d_{d-1}.
struct LimitOperator {
  DifferentialOperator base;
};

Matrix evaluate_symbol(const DifferentialOperator& op, const Vector& eta);
Matrix evaluate_rescaled_symbol(const DifferentialOperator& op, double eps, const Vector& eta);

RankCertificate check_constant_rank(const DifferentialOperator& op, int n_samples = 10000,
                                    double tol = 1e-10);

std::pair<DifferentialOperator, OperatorDecomposition> normalize(const DifferentialOperator& op,
                                                                 double tol = 1e-10);

LimitOperator limit_operator(const DifferentialOperator& normalized,
                             const OperatorDecomposition& dec);

/// Max Frobenius norm of A^(k1) (A^(d))^+ A^(k2) + A^(k2) (A^(d))^+ A^(k1)
/// over k1, k2 < d, with the Moore-Penrose pseudoinverse.
double check_antisymmetry(const DifferentialOperator& op, double tol = 1e-10);

/// Orthonormal basis of ker(mat) via SVD thresholding at tol * sigma_max.
Matrix kernel_basis(const Matrix& mat, double tol = 1e-10);

/// Orthogonal projector onto ker(mat).
Matrix kernel_projector(const Matrix& mat, double tol = 1e-10);

Matrix pseudo_inverse(const Matrix& mat, double tol = 1e-10);
int numeric_rank(const Matrix& mat, double tol = 1e-10);

/// div: l=1, m=d.  curl on R^{n x d} fields: l = n d(d-1)/2, m = n d, rows
/// grouped per field row, ordered by (i, j) with i < j; sign d_i V_j - d_j V_i.
DifferentialOperator builtin_operator(const std::string& name, int n, int d);

/// Deterministic quasi-uniform unit directions: coordinate axes (both signs)
/// followed by a low-discrepancy Kronecker sequence pushed through the normal
/// quantile and normalized.
std::vector<Vector> sphere_directions(int d, int n_samples);

}  // namespace filmlab
