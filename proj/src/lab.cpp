#include "filmlab/lab.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace filmlab {

namespace {

double fracf(double x) { return x - std::floor(x); }

Vector unit_axis(int d, int axis) {
  Vector e = Vector::Zero(d);
  e[axis] = 1.0;
  return e;
}

double kernel_distance(const Matrix& projector, const Vector& w) {
  return (w - projector * w).norm();
}

// Energy of a field against the x'-oscillating density: mean of
// f((q z')..., value). The density must not depend on z_d.
double oscillating_energy(const EnergyDensity& f, const PeriodicField& u, int q,
                          double phase_shift = 0.0) {
  const int dim = u.dim();
  const long n = u.npts();
  std::vector<int> idx;
  std::vector<double> z(static_cast<std::size_t>(f.d), 0.5);
  std::vector<double> val(static_cast<std::size_t>(u.m));
  double acc = 0.0;
  for (long node = 0; node < n; ++node) {
    unflatten(u.shape, node, idx);
    for (int a = 0; a + 1 < dim; ++a) {
      const double x = (idx[a] + 0.5) / u.shape[static_cast<std::size_t>(a)];
      z[static_cast<std::size_t>(a)] = fracf(q * x + phase_shift);
    }
    for (int c = 0; c < u.m; ++c) val[static_cast<std::size_t>(c)] = u.at(c, node);
    acc += f.value(z, val);
  }
  return acc / static_cast<double>(n);
}

// Splices lower (x_d <= 1/2) and upper halves node-wise.
PeriodicField glue_xd(const PeriodicField& lower, const PeriodicField& upper) {
  PeriodicField out = lower;
  const int dim = lower.dim();
  const int nd = lower.shape.back();
  const long n = lower.npts();
  std::vector<int> idx;
  for (long node = 0; node < n; ++node) {
    unflatten(lower.shape, node, idx);
    const double xd = (idx[static_cast<std::size_t>(dim - 1)] + 0.5) / nd;
    if (xd > 0.5)
      for (int c = 0; c < lower.m; ++c) out.at(c, node) = upper.at(c, node);
  }
  return out;
}

// The j-fold in-plane stripe field oscillation-sampled from a unit-cell jump.
PeriodicField stripe_field(int d, int axis, const Vector& low, const Vector& high, double eps,
                           double alpha, const std::vector<int>& shape) {
  std::vector<int> base_shape(static_cast<std::size_t>(d), 4);
  base_shape.back() = shape.back();
  const PeriodicField base = jump_field(base_shape, axis, 0.5, low, high);
  return oscillation_sample(base, eps, alpha, shape);
}

std::vector<int> experiment_shape(int d, int axis, int j, int nodes_per_stripe, int nd) {
  std::vector<int> shape(static_cast<std::size_t>(d), 4);
  shape[static_cast<std::size_t>(axis)] = nodes_per_stripe * j;
  shape.back() = nd;
  return shape;
}

PeriodicField apply_limit(const LimitOperator& lim, const PeriodicField& u) {
  return apply_operator(lim.base, 1.0, u);
}

}  // namespace

double RegimeConfig::eps_of(int j) const { return std::pow(static_cast<double>(j), -1.0 / alpha); }

QuartetCertificate verify_quartet(const DifferentialOperator& op, const Vector& xi1,
                                  const Vector& xi2, const Vector& sigma1, const Vector& sigma2,
                                  int axis) {
  auto [normalized, dec] = normalize(op);
  const LimitOperator lim = limit_operator(normalized, dec);
  const Matrix a0_ed = evaluate_symbol(lim.base, unit_axis(op.d, op.d - 1));
  const Matrix a_n = evaluate_symbol(op, unit_axis(op.d, axis));
  const Matrix a_ed = evaluate_symbol(op, unit_axis(op.d, op.d - 1));
  const Matrix p0 = kernel_projector(a0_ed);
  const Matrix pn = kernel_projector(a_n);
  const Matrix ped = kernel_projector(a_ed);

  QuartetCertificate cert;
  cert.xi1 = xi1;
  cert.xi2 = xi2;
  cert.sigma1 = sigma1;
  cert.sigma2 = sigma2;
  cert.axis = axis;
  const Vector mean_jump = (sigma1 + sigma2) - (xi1 + xi2);
  cert.res_mean_jump = kernel_distance(p0, mean_jump);
  cert.mean_jump_norm = mean_jump.norm();
  cert.res_xi_jump = kernel_distance(pn, xi1 - xi2);
  cert.res_sigma_jump = kernel_distance(pn, sigma1 - sigma2);
  cert.res_phase_kernel =
      std::max(kernel_distance(ped, xi1 - sigma1), kernel_distance(ped, xi2 - sigma2));
  Matrix pair(op.m, 2);
  pair.col(0) = xi1 - sigma1;
  pair.col(1) = xi2 - sigma2;
  Eigen::JacobiSVD<Matrix> svd(pair);
  cert.res_independence = svd.singularValues()[1];
  return cert;
}

QuartetCertificate construct_quartet(const DifferentialOperator& op, int axis, double alpha_param,
                                     double beta_param) {
  if (alpha_param == 0.0) throw std::invalid_argument("alpha parameter must be nonzero");
  const Matrix a_ed = evaluate_symbol(op, unit_axis(op.d, op.d - 1));
  const Matrix ker_ed = kernel_basis(a_ed);
  if (ker_ed.cols() == 0)
    throw std::invalid_argument("quartet construction needs ker A(e_d) != {0}");
  const Matrix ped = kernel_projector(a_ed);

  // pick the in-plane axis whose kernel differs most from ker A(e_d)
  int best_axis = -1;
  Vector best_v;
  double best_residual = 0.0;
  const int lo = axis >= 0 ? axis : 0;
  const int hi = axis >= 0 ? axis : op.d - 2;
  for (int a = lo; a <= hi; ++a) {
    const Matrix ker_n = kernel_basis(evaluate_symbol(op, unit_axis(op.d, a)));
    for (int c = 0; c < ker_n.cols(); ++c) {
      const Vector cand = ker_n.col(c);
      const double res = (cand - ped * cand).norm();
      if (res > best_residual) {
        best_residual = res;
        best_axis = a;
        best_v = cand;
      }
    }
  }
  if (best_axis < 0 || best_residual < 1e-8)
    throw std::invalid_argument(
        "operator is too symmetric: every in-plane kernel coincides with ker A(e_d)");

  const Vector z = ker_ed.col(0);
  const Vector v = best_v;
  const Vector sigma2 = Vector::Zero(op.m);
  const Vector sigma1 = beta_param * v;
  const Vector xi1 = sigma1 + alpha_param * v + z;
  const Vector xi2 = sigma2 - alpha_param * v + z;

  QuartetCertificate cert = verify_quartet(op, xi1, xi2, sigma1, sigma2, best_axis);
  cert.alpha_param = alpha_param;
  cert.beta_param = beta_param;
  cert.z = z;
  cert.v = v;
  return cert;
}

JumpCompatibility jump_compatibility(const DifferentialOperator& op, double eps, int axis,
                                     const Vector& minus, const Vector& plus,
                                     std::vector<int> shape) {
  const PeriodicField jump = jump_field(std::move(shape), axis, 0.5, minus, plus);
  const double gap = (minus - plus).norm();
  JumpCompatibility out;
  if (gap == 0.0) {
    out.residual = 0.0;
    out.compatible = true;
    return out;
  }
  out.residual = constraint_residual(op, eps, jump).h_minus1 / gap;
  out.compatible = out.residual <= 1e-8;
  return out;
}

double jump_residual_analytic(const DifferentialOperator& op, double eps, int axis,
                              const Vector& minus, const Vector& plus) {
  // field = mean + w s(x_axis) with w = (minus - plus)/2 and the unit square
  // wave s, whose coefficients have magnitude 2/(pi |n|) at odd n
  const Vector w = (minus - plus) / 2.0;
  const Matrix sym = evaluate_rescaled_symbol(op, eps, unit_axis(op.d, axis));
  const double image = (sym * w).norm();
  if (image == 0.0) return 0.0;
  const double pi2 = M_PI * M_PI;
  double acc = 0.0;
  for (long n = 1; n <= 4000001; n += 2) {
    // |i 2 pi n A_eps(e_axis) w|^2 |c_n|^2 / (1 + 4 pi^2 n^2), both signs
    const double term = 32.0 / (1.0 + 4.0 * pi2 * static_cast<double>(n) * n);
    acc += term;
    if (term < 1e-18 * acc) break;
  }
  return image * std::sqrt(acc);
}

std::vector<HalfDomainRow> halfdomain_recovery(const DifferentialOperator& op,
                                               const QuartetCertificate& quartet,
                                               const RegimeConfig& config) {
  if (config.alpha > 1.0)
    throw std::invalid_argument("half-domain recovery runs in the alpha <= 1 regime");
  const DensityPtr density = counterexample_density(quartet.vectors(), op.d);
  std::vector<HalfDomainRow> rows;
  for (int j : config.ladder) {
    const double eps = config.eps_of(j);
    const auto shape = experiment_shape(op.d, quartet.axis, j, config.nodes_per_stripe, config.nd);
    const PeriodicField lower =
        stripe_field(op.d, quartet.axis, quartet.xi1, quartet.xi2, eps, config.alpha, shape);
    const PeriodicField upper =
        stripe_field(op.d, quartet.axis, quartet.sigma1, quartet.sigma2, eps, config.alpha, shape);
    HalfDomainRow row;
    row.j = j;
    row.eps = eps;
    row.energy_lower = oscillating_energy(*density, lower, j);
    row.energy_upper = oscillating_energy(*density, upper, j);
    row.energy_swapped = oscillating_energy(*density, lower, j, 0.5);
    row.viol_lower = constraint_residual(op, eps, lower).h_minus1;
    row.viol_upper = constraint_residual(op, eps, upper).h_minus1;
    row.mean_lower = lower.mean();
    row.mean_upper = upper.mean();
    rows.push_back(std::move(row));
  }
  return rows;
}

double a0_obstruction_oracle(const DifferentialOperator& normalized,
                             const OperatorDecomposition& dec, const QuartetCertificate& quartet) {
  const Vector b_vec = (quartet.xi1 - quartet.xi2 + quartet.sigma1 - quartet.sigma2) / 4.0;
  const Vector c_vec = (quartet.xi1 + quartet.xi2 - quartet.sigma1 - quartet.sigma2) / 4.0;
  const Vector d_vec = (quartet.xi1 - quartet.xi2 - quartet.sigma1 + quartet.sigma2) / 4.0;
  const Matrix& aplus = dec.a_d_plus;
  const int lr = normalized.l - dec.r;
  Matrix m_axis = Matrix::Zero(std::max(lr, 1), normalized.m);
  if (lr > 0) m_axis = dec.a_prime_minus[static_cast<std::size_t>(quartet.axis)];

  const double nb = lr > 0 ? (m_axis * b_vec).squaredNorm() : 0.0;
  const double nc = dec.r > 0 ? (aplus * c_vec).squaredNorm() : 0.0;
  const double nd_plus = dec.r > 0 ? (aplus * d_vec).squaredNorm() : 0.0;
  const double nd_minus = lr > 0 ? (m_axis * d_vec).squaredNorm() : 0.0;

  // sum over odd n >= 1 of 1/(n^2 + a^2)
  auto odd_sum = [](double a) { return M_PI * std::tanh(M_PI * a / 2.0) / (4.0 * a); };

  const double pi2 = M_PI * M_PI;
  // single-axis families: sum_{n odd} 16 |M w|^2 / (1 + 4 pi^2 n^2), both signs
  const double single_scale = 2.0 * 16.0 / (4.0 * pi2);
  double total = (nb + nc) * single_scale * odd_sum(1.0 / (2.0 * M_PI));

  // mixed family: 4 * (64/pi^2) * sum_{n1,nd odd >= 1}
  //   [ |A+ D|^2 / n1^2 + |M D|^2 / nd^2 ] / (1 + 4 pi^2 (n1^2 + nd^2))
  auto mixed_sum = [&](double weight) {
    // weight / n^2 summed against the closed-form inner sum
    double acc = 0.0;
    for (long n = 1; n <= 200001; n += 2) {
      const double a = std::sqrt(1.0 + 4.0 * pi2 * static_cast<double>(n) * n) / (2.0 * M_PI);
      const double inner = odd_sum(a) / (4.0 * pi2);
      const double term = inner / (static_cast<double>(n) * n);
      acc += term;
      if (term < 1e-16 * std::max(acc, 1e-300) && n > 99) break;
    }
    return weight * acc;
  };
  total += 4.0 * (64.0 / pi2) * (mixed_sum(nd_plus) + mixed_sum(nd_minus));
  return std::sqrt(total);
}

namespace {

NonlocalityReport run_nonlocality(const DifferentialOperator& op,
                                  const QuartetCertificate& quartet, const RegimeConfig& config,
                                  bool successive) {
  if (!successive && config.alpha > 1.0)
    throw std::invalid_argument("nonlocality obstruction runs in the alpha <= 1 regime");
  auto [normalized, dec] = normalize(op);
  const LimitOperator lim = limit_operator(normalized, dec);
  const DensityPtr density = counterexample_density(quartet.vectors(), op.d);

  const Vector phases[4] = {quartet.xi1, quartet.xi2, quartet.sigma1, quartet.sigma2};
  double scale = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) scale = std::max(scale, (phases[a] - phases[b]).norm());
  const double delta = 0.05 * scale;

  NonlocalityReport report;
  report.successive = successive;
  report.oracle_floor = a0_obstruction_oracle(normalized, dec, quartet);

  for (int j : config.ladder) {
    // in the successive variant the heterogeneity scale is delta_j = 1/j and
    // the constraint is A_0; the stripe geometry is the same
    const double eps = successive ? 1.0 / static_cast<double>(j) : config.eps_of(j);
    const double alpha = successive ? 1.0 : config.alpha;
    const auto shape = experiment_shape(op.d, quartet.axis, j, config.nodes_per_stripe, config.nd);
    const PeriodicField lower =
        stripe_field(op.d, quartet.axis, quartet.xi1, quartet.xi2, eps, alpha, shape);
    const PeriodicField upper =
        stripe_field(op.d, quartet.axis, quartet.sigma1, quartet.sigma2, eps, alpha, shape);
    const PeriodicField glued = glue_xd(lower, upper);

    NonlocalityRow row;
    row.j = j;
    row.eps = eps;
    row.energy_lower = oscillating_energy(*density, lower, j);
    row.energy_upper = oscillating_energy(*density, upper, j);
    row.energy_full = oscillating_energy(*density, glued, j);

    const PeriodicField sharp = sharp_average_xprime(glued, j);
    const PeriodicField rescaled = rescale_xprime(sharp, j);

    if (successive) {
      row.viol_half_lower = h_minus1_norm(apply_limit(lim, lower));
      row.viol_half_upper = h_minus1_norm(apply_limit(lim, upper));
      row.viol_full = h_minus1_norm(apply_limit(lim, glued));
      row.chain_sharp = h_minus1_norm(apply_limit(lim, sharp));
      row.chain_rescaled = h_minus1_norm(apply_limit(lim, rescaled));
    } else {
      row.viol_half_lower = constraint_residual(op, eps, lower).h_minus1;
      row.viol_half_upper = constraint_residual(op, eps, upper).h_minus1;
      row.viol_full = constraint_residual(op, eps, glued).h_minus1;
      row.chain_sharp = constraint_residual(op, eps, sharp).h_minus1;
      const double eps_rescaled = std::pow(eps, 1.0 - config.alpha);
      row.chain_rescaled = constraint_residual(op, eps_rescaled, rescaled).h_minus1;
    }
    row.a0_residual = h_minus1_norm(apply_limit(lim, rescaled));

    // phase fractions of the rescaled candidate against the quartet values
    long counts[5] = {0, 0, 0, 0, 0};
    const long n = rescaled.npts();
    for (long node = 0; node < n; ++node) {
      const Vector val = rescaled.value(node);
      int best = 4;
      double best_dist = delta;
      for (int ph = 0; ph < 4; ++ph) {
        const double dist = (val - phases[ph]).norm();
        if (dist <= best_dist) {
          best_dist = dist;
          best = ph;
        }
      }
      ++counts[best];
    }
    for (int ph = 0; ph < 4; ++ph)
      row.phase_fractions[static_cast<std::size_t>(ph)] =
          static_cast<double>(counts[ph]) / static_cast<double>(n);
    row.phase_other = static_cast<double>(counts[4]) / static_cast<double>(n);
    report.rows.push_back(std::move(row));
  }

  double floor = std::numeric_limits<double>::infinity();
  for (const auto& row : report.rows)
    floor = std::min(floor, successive ? row.a0_residual : row.viol_full);
  report.min_full_violation = floor;
  return report;
}

}  // namespace

NonlocalityReport nonlocality_obstruction(const DifferentialOperator& op,
                                          const QuartetCertificate& quartet,
                                          const RegimeConfig& config) {
  return run_nonlocality(op, quartet, config, false);
}

NonlocalityReport successive_nonlocality(const DifferentialOperator& op,
                                         const QuartetCertificate& quartet,
                                         const RegimeConfig& config) {
  return run_nonlocality(op, quartet, config, true);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope needs >= 2 points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(std::max(y[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

LocalizationReport localization_rate(const DifferentialOperator& op, const std::vector<int>& ladder,
                                     double alpha, const FieldGenerator& generator,
                                     const std::function<double(double)>& eta_d,
                                     const std::function<double(double)>& eta_d_derivative,
                                     int nodes_per_cell, int nd) {
  if (!(alpha > 1.0)) throw std::invalid_argument("localization rate needs alpha > 1");
  LocalizationReport report;
  const Matrix& ad = op.last_coeff();
  for (int j : ladder) {
    const double eps = 1.0 / static_cast<double>(j);
    const double tau = std::pow(eps, alpha);
    const long q_long = std::lround(1.0 / tau);
    if (std::abs(1.0 / tau - static_cast<double>(q_long)) > 1e-9)
      throw std::invalid_argument("tau must be a reciprocal integer on the ladder");
    const int q = static_cast<int>(q_long);
    std::vector<int> shape(static_cast<std::size_t>(op.d), 4);
    for (int a = 0; a + 1 < op.d; ++a) shape[static_cast<std::size_t>(a)] = nodes_per_cell * q;
    shape.back() = nd;

    const PeriodicField sharp = generator(j, eps, shape);
    const double field_scale = std::max(1.0, sharp.l2_norm());
    if (constraint_residual(op, eps, sharp).h_minus1 > 1e-8 * field_scale)
      throw std::invalid_argument("generator produced a non-operator-free field");
    for (int a = 0; a + 1 < op.d; ++a)
      if (periodicity_defect(sharp, a, q) > 1e-10 * field_scale)
        throw std::invalid_argument("generator field is not tau-periodic in x'");

    const PeriodicField bar = cell_average_xprime(sharp, q);
    PeriodicField diff = sharp;
    diff.add_scaled(bar, -1.0);

    // localized quantity: eta_d'(x_d) A^(d) (v# - vbar)
    PeriodicField localized_field = PeriodicField::zeros(shape, op.l);
    {
      const long n = diff.npts();
      std::vector<int> idx;
      Vector val(op.m);
      for (long node = 0; node < n; ++node) {
        unflatten(shape, node, idx);
        const double xd = (idx[static_cast<std::size_t>(op.d - 1)] + 0.5) / nd;
        const double w = eta_d_derivative(xd);
        for (int c = 0; c < op.m; ++c) val[c] = diff.at(c, node);
        const Vector img = ad * val;
        for (int c = 0; c < op.l; ++c) localized_field.at(c, node) = w * img[c];
      }
    }

    // the cutoff acts along x_d alone here
    PeriodicField cut = PeriodicField::zeros(shape, op.m);
    {
      const long n = diff.npts();
      std::vector<int> idx;
      for (long node = 0; node < n; ++node) {
        unflatten(shape, node, idx);
        const double xd = (idx[static_cast<std::size_t>(op.d - 1)] + 0.5) / nd;
        const double w = eta_d(xd);
        if (w < -1e-12 || w > 1.0 + 1e-12)
          throw std::invalid_argument("eta_d must take values in [0,1]");
        for (int c = 0; c < op.m; ++c) cut.at(c, node) = w * diff.at(c, node);
      }
    }

    LocalizationRow row;
    row.j = j;
    row.eps = eps;
    row.tau = tau;
    row.localized = h_minus1_norm(localized_field);
    row.full = constraint_residual(op, eps, cut).h_minus1;
    report.rows.push_back(row);
  }
  std::vector<double> taus, vals;
  for (const auto& row : report.rows) {
    taus.push_back(row.tau);
    vals.push_back(row.localized);
  }
  report.slope = loglog_slope(taus, vals);
  return report;
}

std::vector<LocalizationXPrimeRow> localization_xprime(
    const DifferentialOperator& op, const std::vector<int>& ladder, double alpha,
    const FieldGenerator& generator,
    const std::function<double(std::span<const double>)>& rho_prime, int nodes_per_cell, int nd) {
  std::vector<LocalizationXPrimeRow> rows;
  // profile contract: compactly supported in Q^{d-1}
  std::vector<double> corner(static_cast<std::size_t>(op.d - 1), 0.0);
  if (std::abs(rho_prime(corner)) > 1e-12)
    throw std::invalid_argument("rho' must be compactly supported in Q^{d-1}");
  for (int j : ladder) {
    const double eps = 1.0 / static_cast<double>(j);
    const double tau = std::pow(eps, alpha);
    const int q = static_cast<int>(std::lround(1.0 / tau));
    std::vector<int> shape(static_cast<std::size_t>(op.d), 4);
    for (int a = 0; a + 1 < op.d; ++a) shape[static_cast<std::size_t>(a)] = nodes_per_cell * q;
    shape.back() = nd;
    const PeriodicField v = generator(j, eps, shape);
    const double field_scale = std::max(1.0, v.l2_norm());

    LocalizationXPrimeRow row;
    row.j = j;
    row.eps = eps;
    row.input_residual = constraint_residual(op, eps, v).h_minus1;
    if (row.input_residual > 0.1 * field_scale)
      throw std::invalid_argument("input sequence violates the vanishing-residual precondition");

    // weak convergence to zero: mean and low Fourier modes
    const Spectrum spec = forward_fft(v);
    double defect = 0.0;
    std::vector<int> k;
    for (long node = 0; node < spec.npts(); ++node) {
      mode_frequency(v.shape, node, k);
      bool low = true;
      for (int kv : k)
        if (std::abs(kv) > 2) low = false;
      if (!low) continue;
      for (int c = 0; c < v.m; ++c) defect = std::max(defect, std::abs(spec.at(c, node)));
    }
    row.weak_defect = defect;

    PeriodicField cut = PeriodicField::zeros(shape, v.m);
    {
      const long n = v.npts();
      std::vector<int> idx;
      std::vector<double> xp(static_cast<std::size_t>(op.d - 1));
      for (long node = 0; node < n; ++node) {
        unflatten(shape, node, idx);
        for (int a = 0; a + 1 < op.d; ++a)
          xp[static_cast<std::size_t>(a)] = (idx[a] + 0.5) / shape[static_cast<std::size_t>(a)];
        const double w = rho_prime(xp);
        if (w < -1e-12 || w > 1.0 + 1e-12)
          throw std::invalid_argument("rho' must take values in [0,1]");
        for (int c = 0; c < v.m; ++c) cut.at(c, node) = w * v.at(c, node);
      }
    }
    row.cutoff_residual = constraint_residual(op, eps, cut).h_minus1;
    rows.push_back(row);
  }
  return rows;
}

namespace {

struct CubeGrid {
  std::vector<int> cells;  // cells per axis
  int cube_of(const std::vector<double>& y) const {
    int id = 0;
    for (std::size_t a = 0; a < cells.size(); ++a) {
      int c = static_cast<int>(y[a] * cells[a]);
      c = std::min(c, cells[a] - 1);
      id = id * cells[a] + c;
    }
    return id;
  }
  int count() const {
    int n = 1;
    for (int c : cells) n *= c;
    return n;
  }
  void bounds(int id, std::vector<double>& lo, std::vector<double>& hi) const {
    lo.resize(cells.size());
    hi.resize(cells.size());
    for (std::size_t a = cells.size(); a-- > 0;) {
      const int c = id % cells[static_cast<std::size_t>(a)];
      id /= cells[static_cast<std::size_t>(a)];
      lo[a] = static_cast<double>(c) / cells[a];
      hi[a] = static_cast<double>(c + 1) / cells[a];
    }
  }
};

double ramp(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return 0.5 * (1.0 - std::cos(M_PI * t));
}

}  // namespace

std::vector<RecoveryRow> build_recovery(const DifferentialOperator& op, const DensityPtr& density,
                                        const PeriodicField& target, double alpha,
                                        const std::vector<int>& ladder,
                                        const RecoveryParams& params) {
  if (!(alpha > 1.0)) throw std::invalid_argument("recovery pipeline needs alpha > 1");
  auto [normalized, dec] = normalize(op);
  const LimitOperator lim = limit_operator(normalized, dec);
  const double target_scale = std::max(1.0, target.l2_norm());
  if (h_minus1_norm(apply_limit(lim, target)) > 1e-8 * target_scale)
    throw std::invalid_argument("recovery target must be A_0-free");

  const int d = op.d;
  CubeGrid cubes;
  cubes.cells.assign(static_cast<std::size_t>(d), params.h_cells_xprime);
  cubes.cells.back() = params.h_cells_xd;

  // piecewise-constant approximation by cube means
  const int n_cubes = cubes.count();
  std::vector<Vector> xi(static_cast<std::size_t>(n_cubes), Vector::Zero(op.m));
  std::vector<long> cube_counts(static_cast<std::size_t>(n_cubes), 0);
  {
    const long n = target.npts();
    std::vector<int> idx;
    std::vector<double> y(static_cast<std::size_t>(d));
    for (long node = 0; node < n; ++node) {
      unflatten(target.shape, node, idx);
      for (int a = 0; a < d; ++a)
        y[static_cast<std::size_t>(a)] = (idx[a] + 0.5) / target.shape[static_cast<std::size_t>(a)];
      const int id = cubes.cube_of(y);
      ++cube_counts[static_cast<std::size_t>(id)];
      for (int c = 0; c < op.m; ++c) xi[static_cast<std::size_t>(id)][c] += target.at(c, node);
    }
    for (int id = 0; id < n_cubes; ++id)
      if (cube_counts[static_cast<std::size_t>(id)] > 0)
        xi[static_cast<std::size_t>(id)] /= static_cast<double>(cube_counts[static_cast<std::size_t>(id)]);
  }

  // reference homogenized values and correctors per distinct cube value
  auto key_of = [](const Vector& v) {
    std::vector<double> k(v.data(), v.data() + v.size());
    return k;
  };
  std::map<std::vector<double>, double> fhom;
  for (int id = 0; id < n_cubes; ++id) {
    const auto key = key_of(xi[static_cast<std::size_t>(id)]);
    if (fhom.count(key)) continue;
    CellProblem prob;
    prob.op = op;
    prob.density = density;
    prob.xi = xi[static_cast<std::size_t>(id)];
    prob.shape.assign(static_cast<std::size_t>(d), params.corrector_resolution);
    fhom[key] = solve_cell(prob).value;
  }
  double target_energy = 0.0;
  for (int id = 0; id < n_cubes; ++id)
    target_energy += fhom[key_of(xi[static_cast<std::size_t>(id)])] / n_cubes;

  std::vector<RecoveryRow> rows;
  for (int j : ladder) {
    const double eps = 1.0 / static_cast<double>(j);
    const double qp_real = std::pow(1.0 / eps, alpha);
    const double qd_real = std::pow(1.0 / eps, alpha - 1.0);
    const int qp = static_cast<int>(std::lround(qp_real));
    const int qd = static_cast<int>(std::lround(qd_real));
    if (std::abs(qp_real - qp) > 1e-9 || std::abs(qd_real - qd) > 1e-9)
      throw std::invalid_argument("cube grid incompatible with the eps ladder");
    std::vector<int> corrector_shape(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) {
      const int q = a + 1 < d ? qp : qd;
      if (params.shape[static_cast<std::size_t>(a)] % q != 0)
        throw std::invalid_argument("cube grid incompatible with the eps ladder");
      corrector_shape[static_cast<std::size_t>(a)] = params.shape[static_cast<std::size_t>(a)] / q;
    }
    check_grid(corrector_shape);

    // correctors per distinct value, oscillation-sampled and sharp-averaged
    std::map<std::vector<double>, PeriodicField> sampled;
    const Matrix pd = kernel_projector(op.last_coeff());
    for (int id = 0; id < n_cubes; ++id) {
      const auto key = key_of(xi[static_cast<std::size_t>(id)]);
      if (sampled.count(key)) continue;
      CellProblem prob;
      prob.op = op;
      prob.density = density;
      prob.xi = xi[static_cast<std::size_t>(id)];
      prob.shape = corrector_shape;
      const CellResult res = solve_cell(prob);
      PeriodicField osc = oscillation_sample(res.corrector, eps, alpha, params.shape);
      osc = sharp_average_xprime(osc, qp);
      const PeriodicField bar = cell_average_xprime(osc, qp);
      // kernel-split correction: subtract vbar, re-add P^(d) vbar
      const long n = osc.npts();
      Vector val(op.m);
      for (long node = 0; node < n; ++node) {
        for (int c = 0; c < op.m; ++c) val[c] = bar.at(c, node);
        const Vector keep = pd * val;
        for (int c = 0; c < op.m; ++c) osc.at(c, node) += keep[c] - val[c];
      }
      sampled.emplace(key, std::move(osc));
    }

    // glue with per-cube cutoffs; axes with a single cube need no cutoff
    PeriodicField u_glued = PeriodicField::zeros(params.shape, op.m);
    const long n = u_glued.npts();
    std::vector<int> idx;
    std::vector<double> y(static_cast<std::size_t>(d)), lo, hi;
    for (long node = 0; node < n; ++node) {
      unflatten(params.shape, node, idx);
      for (int a = 0; a < d; ++a)
        y[static_cast<std::size_t>(a)] = (idx[a] + 0.5) / params.shape[static_cast<std::size_t>(a)];
      const int id = cubes.cube_of(y);
      cubes.bounds(id, lo, hi);
      double mask = 1.0;
      for (int a = 0; a < d; ++a) {
        if (cubes.cells[static_cast<std::size_t>(a)] == 1) continue;
        const double t0 = (y[static_cast<std::size_t>(a)] - lo[a]) / params.band;
        const double t1 = (hi[a] - y[static_cast<std::size_t>(a)]) / params.band;
        mask *= ramp(t0) * ramp(t1);
      }
      const auto& corr = sampled.at(key_of(xi[static_cast<std::size_t>(id)]));
      for (int c = 0; c < op.m; ++c)
        u_glued.at(c, node) = xi[static_cast<std::size_t>(id)][c] + mask * corr.at(c, node);
    }

    RecoveryRow row;
    row.j = j;
    row.eps = eps;
    row.target = target_energy;
    row.violation_before = constraint_residual(op, eps, u_glued).h_minus1;

    const PeriodicField projected = project_afree(op, eps, u_glued, true);
    PeriodicField diff = projected;
    diff.add_scaled(u_glued, -1.0);
    row.displacement = diff.l2_norm();

    // energy of the recovered field against f(x'/eps^alpha, x_d/eps^{alpha-1}, .)
    {
      const EnergyDensity& f = *density;
      std::vector<double> z(static_cast<std::size_t>(f.d));
      std::vector<double> val(static_cast<std::size_t>(op.m));
      double acc = 0.0;
      for (long node = 0; node < n; ++node) {
        unflatten(params.shape, node, idx);
        for (int a = 0; a < d; ++a) {
          const double x = (idx[a] + 0.5) / params.shape[static_cast<std::size_t>(a)];
          const int q = a + 1 < d ? qp : qd;
          z[static_cast<std::size_t>(a)] = fracf(q * x);
        }
        for (int c = 0; c < op.m; ++c) val[static_cast<std::size_t>(c)] = projected.at(c, node);
        acc += f.value(z, val);
      }
      row.energy = acc / static_cast<double>(n);
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<LimitTransferRow> limit_transfer_check(const DifferentialOperator& normalized,
                                                   const OperatorDecomposition& dec, double beta,
                                                   const std::vector<double>& eps_list,
                                                   const std::vector<PeriodicField>& fields) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (eps_list.size() != fields.size())
    throw std::invalid_argument("eps list and field list must have the same length");
  const int l = normalized.l;
  const int r = dec.r;
  const LimitOperator lim = limit_operator(normalized, dec);

  auto row_slice = [&](int row0, int row1, bool keep_last) {
    std::vector<Matrix> coeffs;
    for (int k = 0; k < normalized.d; ++k) {
      Matrix a = normalized.coeff(k).middleRows(row0, row1 - row0);
      if (k == normalized.d - 1 && !keep_last) a.setZero();
      coeffs.push_back(a);
    }
    return DifferentialOperator::from_coeffs(std::move(coeffs));
  };

  std::vector<LimitTransferRow> rows;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const PeriodicField& v = fields[i];
    const double eb = std::pow(eps_list[i], beta);
    LimitTransferRow row;
    row.eps_beta = eb;
    row.input_residual = constraint_residual(normalized, eb, v).h_minus1;
    if (r > 0) {
      const DifferentialOperator a_plus = row_slice(0, r, true);
      const DifferentialOperator a_prime_plus = row_slice(0, r, false);
      std::vector<Matrix> adp_coeffs;
      for (int k = 0; k + 1 < normalized.d; ++k) adp_coeffs.push_back(Matrix::Zero(r, normalized.m));
      adp_coeffs.push_back(dec.a_d_plus);
      const DifferentialOperator adp = DifferentialOperator::from_coeffs(std::move(adp_coeffs));
      row.adplus_residual = constraint_residual(adp, 1.0, v).h_minus1;
      row.adplus_bound = eb * (constraint_residual(a_plus, eb, v).h_minus1 +
                               constraint_residual(a_prime_plus, 1.0, v).h_minus1);
    }
    if (l - r > 0) {
      const DifferentialOperator a_minus = row_slice(r, l, false);
      row.aminus_residual = constraint_residual(a_minus, 1.0, v).h_minus1;
    }
    row.a0_residual = h_minus1_norm(apply_limit(lim, v));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace filmlab
