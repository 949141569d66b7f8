#include "filmlab/operator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace filmlab {

namespace {

// Acklam's rational approximation of the standard normal quantile.
double normal_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

DifferentialOperator DifferentialOperator::from_coeffs(std::vector<Matrix> mats) {
  if (mats.size() < 2) throw std::invalid_argument("operator needs d >= 2 coefficient matrices");
  const int l = static_cast<int>(mats.front().rows());
  const int m = static_cast<int>(mats.front().cols());
  if (l < 1 || m < 1) throw std::invalid_argument("coefficient matrices must be nonempty");
  for (const Matrix& a : mats) {
    if (a.rows() != l || a.cols() != m)
      throw std::invalid_argument("coefficient matrices must share one shape");
  }
  DifferentialOperator op;
  op.d = static_cast<int>(mats.size());
  op.l = l;
  op.m = m;
  op.coeffs = std::move(mats);
  return op;
}

Matrix evaluate_symbol(const DifferentialOperator& op, const Vector& eta) {
  if (eta.size() != op.d) throw std::invalid_argument("symbol argument has wrong dimension");
  Matrix s = Matrix::Zero(op.l, op.m);
  for (int k = 0; k < op.d; ++k) s += op.coeff(k) * eta[k];
  return s;
}

Matrix evaluate_rescaled_symbol(const DifferentialOperator& op, double eps, const Vector& eta) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (eta.size() != op.d) throw std::invalid_argument("symbol argument has wrong dimension");
  Matrix s = Matrix::Zero(op.l, op.m);
  for (int k = 0; k + 1 < op.d; ++k) s += op.coeff(k) * eta[k];
  s += op.last_coeff() * (eta[op.d - 1] / eps);
  return s;
}

int numeric_rank(const Matrix& mat, double tol) {
  if (mat.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(mat);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] <= 0.0) return 0;
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > tol * sv[0]) ++r;
  return r;
}

Matrix pseudo_inverse(const Matrix& mat, double tol) {
  Eigen::JacobiSVD<Matrix> svd(mat, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  Matrix inv_sigma = Matrix::Zero(mat.cols(), mat.rows());
  const double cutoff = sv.size() > 0 ? tol * sv[0] : 0.0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff && sv[i] > 0.0) inv_sigma(i, i) = 1.0 / sv[i];
  return svd.matrixV() * inv_sigma * svd.matrixU().transpose();
}

Matrix kernel_basis(const Matrix& mat, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  const int m = static_cast<int>(mat.cols());
  if (mat.norm() == 0.0) return Matrix::Identity(m, m);
  Eigen::JacobiSVD<Matrix> svd(mat, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > tol * sv[0]) ++r;
  return svd.matrixV().rightCols(m - r);
}

Matrix kernel_projector(const Matrix& mat, double tol) {
  const Matrix basis = kernel_basis(mat, tol);
  return basis * basis.transpose();
}

std::vector<Vector> sphere_directions(int d, int n_samples) {
  std::vector<Vector> dirs;
  dirs.reserve(static_cast<std::size_t>(2 * d + n_samples));
  for (int k = 0; k < d; ++k) {
    Vector e = Vector::Zero(d);
    e[k] = 1.0;
    dirs.push_back(e);
    dirs.push_back(-e);
  }
  // Kronecker (R_d) sequence: alpha_i = g^{-(i+1)} with g the root of
  // x^{d+1} = x + 1.
  double g = 1.5;
  for (int it = 0; it < 64; ++it) g = std::pow(1.0 + g, 1.0 / (d + 1));
  std::vector<double> alpha(static_cast<std::size_t>(d));
  double gp = 1.0;
  for (int k = 0; k < d; ++k) {
    gp /= g;
    alpha[static_cast<std::size_t>(k)] = gp;
  }
  std::vector<double> u(static_cast<std::size_t>(d), 0.5);
  int produced = 0;
  while (produced < n_samples) {
    Vector v(d);
    double norm2 = 0.0;
    for (int k = 0; k < d; ++k) {
      auto& uk = u[static_cast<std::size_t>(k)];
      uk += alpha[static_cast<std::size_t>(k)];
      uk -= std::floor(uk);
      const double q = std::min(std::max(uk, 1e-12), 1.0 - 1e-12);
      v[k] = normal_quantile(q);
      norm2 += v[k] * v[k];
    }
    if (norm2 < 1e-12) continue;
    dirs.push_back(v / std::sqrt(norm2));
    ++produced;
  }
  return dirs;
}

RankCertificate check_constant_rank(const DifferentialOperator& op, int n_samples, double tol) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  RankCertificate cert;
  cert.tol = tol;
  double norm = 0.0;
  for (const Matrix& a : op.coeffs) norm = std::max(norm, a.norm());
  if (norm == 0.0) {
    cert.trivial = true;
    cert.is_constant = false;
    cert.r = 0;
    cert.samples = 0;
    return cert;
  }
  const auto dirs = sphere_directions(op.d, n_samples);
  cert.samples = static_cast<int>(dirs.size());
  int r0 = -1;
  bool constant = true;
  for (const Vector& eta : dirs) {
    const int r = numeric_rank(evaluate_symbol(op, eta), tol);
    if (r0 < 0) r0 = r;
    if (r != r0) {
      constant = false;
      r0 = std::max(r0, r);
    }
  }
  cert.r = r0;
  cert.is_constant = constant && r0 > 0;
  if (r0 == 0) cert.trivial = true;
  return cert;
}

std::pair<DifferentialOperator, OperatorDecomposition> normalize(const DifferentialOperator& op,
                                                                 double tol) {
  const Matrix& ad = op.last_coeff();
  const int l = op.l;
  const double scale = ad.norm();
  const int reference_rank = numeric_rank(ad, 1e-12);

  // Greedy row selection: repeatedly take the row with the largest residual
  // after removing the span of the rows already chosen.
  std::vector<int> chosen;
  std::vector<Eigen::RowVectorXd> ortho;
  std::vector<bool> taken(static_cast<std::size_t>(l), false);
  while (true) {
    int best = -1;
    double best_norm = 0.0;
    Eigen::RowVectorXd best_resid;
    for (int i = 0; i < l; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      Eigen::RowVectorXd resid = ad.row(i);
      for (const auto& q : ortho) resid -= (resid * q.transpose())(0, 0) * q;
      const double n = resid.norm();
      if (n > best_norm) {
        best_norm = n;
        best = i;
        best_resid = resid;
      }
    }
    if (best < 0 || best_norm <= tol * std::max(scale, 1e-300)) break;
    taken[static_cast<std::size_t>(best)] = true;
    chosen.push_back(best);
    ortho.push_back(best_resid / best_norm);
  }
  const int r = static_cast<int>(chosen.size());
  if (r < reference_rank)
    throw std::runtime_error("degenerate normalization: tolerance collapses the rank of A^(d)");

  Matrix transform = Matrix::Zero(l, l);
  for (int c = 0; c < r; ++c) {
    const int i = chosen[static_cast<std::size_t>(c)];
    transform(c, i) = 1.0 / ad.row(i).norm();
  }
  // Trailing rows keep their identity entry and subtract their component in
  // the span of the chosen rows, so the transformed A^(d) vanishes there.
  Matrix chosen_pinv;
  if (r > 0) {
    Matrix chosen_rows(r, op.m);
    for (int c = 0; c < r; ++c) chosen_rows.row(c) = ad.row(chosen[static_cast<std::size_t>(c)]);
    chosen_pinv = pseudo_inverse(chosen_rows, 1e-12);
  }
  int pos = r;
  for (int i = 0; i < l; ++i) {
    if (taken[static_cast<std::size_t>(i)]) continue;
    transform(pos, i) = 1.0;
    if (r > 0) {
      const Vector beta = chosen_pinv.transpose() * ad.row(i).transpose();
      for (int c = 0; c < r; ++c) transform(pos, chosen[static_cast<std::size_t>(c)]) -= beta[c];
    }
    ++pos;
  }

  DifferentialOperator out = op;
  for (Matrix& a : out.coeffs) a = transform * a;
  // Scrub roundoff in the zero block.
  Matrix& ad_out = out.coeffs.back();
  for (int i = r; i < l; ++i)
    for (int j = 0; j < op.m; ++j)
      if (std::abs(ad_out(i, j)) < 1e-13 * std::max(scale, 1.0)) ad_out(i, j) = 0.0;

  OperatorDecomposition dec;
  dec.r = r;
  dec.a_d_plus = ad_out.topRows(r);
  dec.row_transform = transform;
  for (int k = 0; k + 1 < op.d; ++k) {
    dec.a_prime_plus.push_back(out.coeff(k).topRows(r));
    dec.a_prime_minus.push_back(out.coeff(k).bottomRows(l - r));
  }
  Eigen::JacobiSVD<Matrix> svd(transform);
  const auto& sv = svd.singularValues();
  dec.condition = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1]
                                          : std::numeric_limits<double>::infinity();
  if (!std::isfinite(dec.condition))
    throw std::runtime_error("degenerate normalization: row transform is singular");
  return {out, dec};
}

LimitOperator limit_operator(const DifferentialOperator& normalized,
                             const OperatorDecomposition& dec) {
  const int l = normalized.l;
  const int m = normalized.m;
  const int r = dec.r;
  if (dec.a_d_plus.rows() != r || (r > 0 && dec.a_d_plus.cols() != m) ||
      static_cast<int>(dec.a_prime_minus.size()) != normalized.d - 1)
    throw std::invalid_argument("inconsistent decomposition dimensions");
  for (const Matrix& a : dec.a_prime_minus)
    if (a.rows() != l - r || (a.rows() > 0 && a.cols() != m))
      throw std::invalid_argument("inconsistent decomposition dimensions");

  std::vector<Matrix> coeffs;
  for (int k = 0; k + 1 < normalized.d; ++k) {
    Matrix a = Matrix::Zero(l, m);
    if (l - r > 0) a.bottomRows(l - r) = dec.a_prime_minus[static_cast<std::size_t>(k)];
    coeffs.push_back(a);
  }
  Matrix ad = Matrix::Zero(l, m);
  if (r > 0) ad.topRows(r) = dec.a_d_plus;
  coeffs.push_back(ad);
  LimitOperator lim;
  lim.base = DifferentialOperator::from_coeffs(std::move(coeffs));
  return lim;
}

double check_antisymmetry(const DifferentialOperator& op, double tol) {
  const Matrix pinv = pseudo_inverse(op.last_coeff(), tol);
  double worst = 0.0;
  for (int k1 = 0; k1 + 1 < op.d; ++k1) {
    for (int k2 = k1; k2 + 1 < op.d; ++k2) {
      const Matrix res =
          op.coeff(k1) * pinv * op.coeff(k2) + op.coeff(k2) * pinv * op.coeff(k1);
      worst = std::max(worst, res.norm());
    }
  }
  return worst;
}

DifferentialOperator builtin_operator(const std::string& name, int n, int d) {
  if (d < 2) throw std::invalid_argument("builtin operators need d >= 2");
  if (name == "div") {
    std::vector<Matrix> coeffs;
    for (int k = 0; k < d; ++k) {
      Matrix a = Matrix::Zero(1, d);
      a(0, k) = 1.0;
      coeffs.push_back(a);
    }
    return DifferentialOperator::from_coeffs(std::move(coeffs));
  }
  if (name == "curl") {
    if (n < 1) throw std::invalid_argument("curl needs n >= 1");
    const int pairs = d * (d - 1) / 2;
    const int l = n * pairs;
    const int m = n * d;
    std::vector<Matrix> coeffs(static_cast<std::size_t>(d), Matrix::Zero(l, m));
    int row = 0;
    for (int a = 0; a < n; ++a) {
      for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
          // (curl V)_{ij} = d_i V_j - d_j V_i on field row a.
          coeffs[static_cast<std::size_t>(i)](row, a * d + j) += 1.0;
          coeffs[static_cast<std::size_t>(j)](row, a * d + i) -= 1.0;
          ++row;
        }
      }
    }
    return DifferentialOperator::from_coeffs(std::move(coeffs));
  }
  throw std::invalid_argument("unknown builtin operator: " + name);
}

}  // namespace filmlab
