#include "filmlab/field.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>

namespace filmlab {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

long product(const std::vector<int>& shape) {
  long n = 1;
  for (int s : shape) n *= s;
  return n;
}

// FFTW plans are cached per (shape, direction); plan creation is not
// reentrant, execution on distinct buffers is.
struct PlanCache {
  std::mutex mu;
  std::map<std::pair<std::vector<int>, int>, fftw_plan> plans;

  fftw_plan get(const std::vector<int>& shape, int sign, fftw_complex* buf) {
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(shape, sign);
    auto it = plans.find(key);
    if (it != plans.end()) return it->second;
    fftw_plan p = fftw_plan_dft(static_cast<int>(shape.size()), shape.data(), buf, buf, sign,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans.emplace(key, p);
    return p;
  }
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

void run_fft(const std::vector<int>& shape, int sign, std::vector<std::complex<double>>& buf) {
  auto* raw = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_plan p = plan_cache().get(shape, sign, raw);
  fftw_execute_dft(p, raw, raw);
}

int freq_of(int idx, int n) { return idx < n / 2 ? idx : idx - n; }

}  // namespace

long PeriodicField::npts() const { return product(shape); }
long Spectrum::npts() const { return product(shape); }

void check_grid(const std::vector<int>& shape) {
  if (shape.empty()) throw std::invalid_argument("empty grid shape");
  for (int n : shape) {
    if (n < 4 || n % 2 != 0)
      throw std::invalid_argument("grid sizes must be even and >= 4");
  }
}

PeriodicField PeriodicField::zeros(std::vector<int> shape, int m) {
  check_grid(shape);
  PeriodicField f;
  f.m = m;
  f.shape = std::move(shape);
  f.data.assign(static_cast<std::size_t>(f.npts()) * m, 0.0);
  return f;
}

Vector PeriodicField::mean() const {
  Vector mu = Vector::Zero(m);
  const long n = npts();
  for (int c = 0; c < m; ++c) {
    double s = 0.0;
    const double* p = data.data() + static_cast<std::size_t>(c) * n;
    for (long i = 0; i < n; ++i) s += p[i];
    mu[c] = s / static_cast<double>(n);
  }
  return mu;
}

double PeriodicField::l2_norm() const {
  double s = 0.0;
  for (double v : data) s += v * v;
  return std::sqrt(s / static_cast<double>(npts()));
}

double PeriodicField::linf_norm() const {
  double s = 0.0;
  for (double v : data) s = std::max(s, std::abs(v));
  return s;
}

Vector PeriodicField::value(long node) const {
  Vector v(m);
  for (int c = 0; c < m; ++c) v[c] = at(c, node);
  return v;
}

void PeriodicField::add_scaled(const PeriodicField& other, double factor) {
  if (other.data.size() != data.size()) throw std::invalid_argument("field shape mismatch");
  for (std::size_t i = 0; i < data.size(); ++i) data[i] += factor * other.data[i];
}

long flat_index(const std::vector<int>& shape, const std::vector<int>& idx) {
  long f = 0;
  for (std::size_t a = 0; a < shape.size(); ++a) f = f * shape[a] + idx[a];
  return f;
}

void unflatten(const std::vector<int>& shape, long node, std::vector<int>& idx) {
  idx.resize(shape.size());
  for (std::size_t a = shape.size(); a-- > 0;) {
    idx[a] = static_cast<int>(node % shape[a]);
    node /= shape[a];
  }
}

PeriodicField make_field(
    std::vector<int> shape, int m,
    const std::function<void(std::span<const double>, std::span<double>)>& fn) {
  PeriodicField f = PeriodicField::zeros(std::move(shape), m);
  const long n = f.npts();
  const int dim = f.dim();
  std::vector<int> idx(static_cast<std::size_t>(dim));
  std::vector<double> y(static_cast<std::size_t>(dim));
  std::vector<double> out(static_cast<std::size_t>(m));
  for (long node = 0; node < n; ++node) {
    unflatten(f.shape, node, idx);
    for (int a = 0; a < dim; ++a) y[static_cast<std::size_t>(a)] = (idx[a] + 0.5) / f.shape[a];
    fn(y, out);
    for (int c = 0; c < m; ++c) f.at(c, node) = out[static_cast<std::size_t>(c)];
  }
  return f;
}

Spectrum forward_fft(const PeriodicField& f) {
  Spectrum s;
  s.m = f.m;
  s.shape = f.shape;
  const long n = f.npts();
  s.coef.resize(static_cast<std::size_t>(n) * f.m);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(n));
  const double inv = 1.0 / static_cast<double>(n);
  for (int c = 0; c < f.m; ++c) {
    for (long i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = f.at(c, i);
    run_fft(f.shape, FFTW_FORWARD, buf);
    for (long i = 0; i < n; ++i) s.at(c, i) = buf[static_cast<std::size_t>(i)] * inv;
  }
  return s;
}

PeriodicField inverse_fft(const Spectrum& s) {
  PeriodicField f = PeriodicField::zeros(s.shape, s.m);
  const long n = s.npts();
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(n));
  for (int c = 0; c < s.m; ++c) {
    for (long i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = s.at(c, i);
    run_fft(s.shape, FFTW_BACKWARD, buf);
    for (long i = 0; i < n; ++i) f.at(c, i) = buf[static_cast<std::size_t>(i)].real();
  }
  return f;
}

void mode_frequency(const std::vector<int>& shape, long node, std::vector<int>& k) {
  k.resize(shape.size());
  for (std::size_t a = shape.size(); a-- > 0;) {
    const int idx = static_cast<int>(node % shape[a]);
    k[a] = freq_of(idx, shape[a]);
    node /= shape[a];
  }
}

bool is_nyquist(const std::vector<int>& shape, const std::vector<int>& k) {
  for (std::size_t a = 0; a < shape.size(); ++a)
    if (k[a] == -shape[a] / 2) return true;
  return false;
}

PeriodicField apply_operator(const DifferentialOperator& op, double eps, const PeriodicField& u) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (u.m != op.m) throw std::invalid_argument("field components do not match operator");
  if (u.dim() != op.d) throw std::invalid_argument("field dimension does not match operator");
  const Spectrum s = forward_fft(u);
  Spectrum out;
  out.m = op.l;
  out.shape = u.shape;
  const long n = s.npts();
  out.coef.assign(static_cast<std::size_t>(n) * op.l, {0.0, 0.0});
  std::vector<int> k;
  Vector eta(op.d);
  Eigen::VectorXcd uk(op.m), gk(op.l);
  for (long node = 0; node < n; ++node) {
    mode_frequency(u.shape, node, k);
    if (is_nyquist(u.shape, k)) continue;
    bool zero = true;
    for (std::size_t a = 0; a < k.size(); ++a) {
      eta[static_cast<int>(a)] = kTwoPi * k[a];
      if (k[a] != 0) zero = false;
    }
    if (zero) continue;
    const Matrix sym = evaluate_rescaled_symbol(op, eps, eta);
    for (int c = 0; c < op.m; ++c) uk[c] = s.at(c, node);
    gk = sym * uk;
    const std::complex<double> i_unit(0.0, 1.0);
    for (int c = 0; c < op.l; ++c) out.at(c, node) = i_unit * gk[c];
  }
  return inverse_fft(out);
}

double l2_norm(const PeriodicField& g) { return g.l2_norm(); }

double h_minus1_norm(const PeriodicField& g) {
  const Spectrum s = forward_fft(g);
  const long n = s.npts();
  std::vector<int> k;
  double acc = 0.0;
  for (long node = 0; node < n; ++node) {
    mode_frequency(g.shape, node, k);
    double k2 = 0.0;
    for (std::size_t a = 0; a < k.size(); ++a) k2 += static_cast<double>(k[a]) * k[a];
    const double weight = k2 == 0.0 ? 1.0 : 1.0 / (1.0 + kTwoPi * kTwoPi * k2);
    for (int c = 0; c < g.m; ++c) acc += std::norm(s.at(c, node)) * weight;
  }
  return std::sqrt(acc);
}

ConstraintResidual constraint_residual(const DifferentialOperator& op, double eps,
                                       const PeriodicField& u) {
  ConstraintResidual res;
  res.image = apply_operator(op, eps, u);
  res.h_minus1 = h_minus1_norm(res.image);
  res.l2 = res.image.l2_norm();
  return res;
}

ModeProjector ModeProjector::for_operator(const DifferentialOperator& op, double eps,
                                          std::vector<int> shape, bool require_constant_rank) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (require_constant_rank) {
    const RankCertificate cert = check_constant_rank(op, 200);
    if (!cert.is_constant)
      throw std::invalid_argument("projector requires a constant-rank operator");
  }
  DifferentialOperator local = op;
  return for_symbol(
      [local, eps](const std::vector<int>& k) {
        Vector eta(local.d);
        for (int a = 0; a < local.d; ++a) eta[a] = kTwoPi * k[static_cast<std::size_t>(a)];
        return evaluate_rescaled_symbol(local, eps, eta);
      },
      op.m, std::move(shape));
}

ModeProjector ModeProjector::for_symbol(SymbolFn symbol, int m, std::vector<int> shape) {
  check_grid(shape);
  ModeProjector p;
  p.shape_ = std::move(shape);
  p.m_ = m;
  p.symbol_ = std::move(symbol);
  const long n = product(p.shape_);
  p.proj_.assign(static_cast<std::size_t>(n) * m * m, 0.0);
  std::vector<int> k;
  for (long node = 0; node < n; ++node) {
    mode_frequency(p.shape_, node, k);
    bool zero = true;
    for (int kv : k)
      if (kv != 0) zero = false;
    Matrix pr;
    if (zero) {
      pr = Matrix::Identity(m, m);
    } else {
      const Matrix sym = p.symbol_(k);
      if (p.l_ == 0) p.l_ = static_cast<int>(sym.rows());
      pr = kernel_projector(sym, 1e-10);
    }
    double* dst = p.proj_.data() + static_cast<std::size_t>(node) * m * m;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) dst[i * m + j] = pr(i, j);
  }
  if (p.l_ == 0) p.l_ = 1;
  return p;
}

PeriodicField ModeProjector::apply(const PeriodicField& u, bool keep_mean) const {
  if (u.shape != shape_ || u.m != m_) throw std::invalid_argument("projector/grid mismatch");
  Spectrum s = forward_fft(u);
  const long n = s.npts();
  Eigen::VectorXcd uk(m_), pk(m_);
  for (long node = 0; node < n; ++node) {
    const double* pr = proj_.data() + static_cast<std::size_t>(node) * m_ * m_;
    if (node == 0) {
      if (!keep_mean)
        for (int c = 0; c < m_; ++c) s.at(c, 0) = 0.0;
      continue;
    }
    for (int c = 0; c < m_; ++c) uk[c] = s.at(c, node);
    for (int i = 0; i < m_; ++i) {
      std::complex<double> acc(0.0, 0.0);
      for (int j = 0; j < m_; ++j) acc += pr[i * m_ + j] * uk[j];
      pk[i] = acc;
    }
    for (int c = 0; c < m_; ++c) s.at(c, node) = pk[c];
  }
  return inverse_fft(s);
}

PeriodicField ModeProjector::apply_symbol(const PeriodicField& u) const {
  if (u.shape != shape_ || u.m != m_) throw std::invalid_argument("projector/grid mismatch");
  const Spectrum s = forward_fft(u);
  Spectrum out;
  out.m = l_;
  out.shape = shape_;
  const long n = s.npts();
  out.coef.assign(static_cast<std::size_t>(n) * l_, {0.0, 0.0});
  std::vector<int> k;
  Eigen::VectorXcd uk(m_);
  const std::complex<double> i_unit(0.0, 1.0);
  for (long node = 1; node < n; ++node) {
    mode_frequency(shape_, node, k);
    if (is_nyquist(shape_, k)) continue;
    bool zero = true;
    for (int kv : k)
      if (kv != 0) zero = false;
    if (zero) continue;
    const Matrix sym = symbol_(k);
    for (int c = 0; c < m_; ++c) uk[c] = s.at(c, node);
    const Eigen::VectorXcd gk = sym * uk;
    for (int c = 0; c < l_; ++c) out.at(c, node) = i_unit * gk[c];
  }
  return inverse_fft(out);
}

PeriodicField project_afree(const DifferentialOperator& op, double eps, const PeriodicField& u,
                            bool keep_mean) {
  const ModeProjector p = ModeProjector::for_operator(op, eps, u.shape, true);
  return p.apply(u, keep_mean);
}

ProjectionBoundCheck projection_error_bound_check(const DifferentialOperator& op, double eps,
                                                  const PeriodicField& u) {
  ProjectionBoundCheck out;
  const PeriodicField pu = project_afree(op, eps, u, true);
  PeriodicField diff = u;
  diff.add_scaled(pu, -1.0);
  out.lhs = diff.l2_norm();
  out.rhs = constraint_residual(op, eps, u).h_minus1;
  out.ratio = out.rhs > 0.0 ? out.lhs / out.rhs : (out.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  return out;
}

namespace {

PeriodicField shifted_copy_average(const PeriodicField& v, int q, int axes) {
  // axes = number of leading axes that get shifted (d or d-1).
  const int dim = v.dim();
  for (int a = 0; a < axes; ++a)
    if (v.shape[static_cast<std::size_t>(a)] % q != 0)
      throw std::invalid_argument("shift count must divide the grid size");
  PeriodicField out = PeriodicField::zeros(v.shape, v.m);
  const long n = v.npts();
  std::vector<int> idx;
  std::vector<int> shifted(static_cast<std::size_t>(dim));
  std::vector<int> s(static_cast<std::size_t>(axes));
  const long copies = static_cast<long>(std::pow(static_cast<double>(q), axes) + 0.5);
  const double w = 1.0 / static_cast<double>(copies);
  for (long node = 0; node < n; ++node) {
    unflatten(v.shape, node, idx);
    // enumerate shift multi-indices in [0, q)^axes
    std::fill(s.begin(), s.end(), 0);
    for (long copy = 0; copy < copies; ++copy) {
      for (int a = 0; a < dim; ++a) shifted[static_cast<std::size_t>(a)] = idx[a];
      for (int a = 0; a < axes; ++a) {
        const int step = v.shape[static_cast<std::size_t>(a)] / q;
        shifted[static_cast<std::size_t>(a)] =
            (idx[a] + s[static_cast<std::size_t>(a)] * step) % v.shape[static_cast<std::size_t>(a)];
      }
      const long src = flat_index(v.shape, shifted);
      for (int c = 0; c < v.m; ++c) out.at(c, node) += w * v.at(c, src);
      for (int a = axes - 1; a >= 0; --a) {
        if (++s[static_cast<std::size_t>(a)] < q) break;
        s[static_cast<std::size_t>(a)] = 0;
      }
    }
  }
  return out;
}

}  // namespace

PeriodicField sharp_average(const PeriodicField& v, int n) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (n == 1) return v;
  return shifted_copy_average(v, n, v.dim());
}

PeriodicField sharp_average_xprime(const PeriodicField& v, int j) {
  if (j < 1) throw std::invalid_argument("j must be >= 1");
  if (j == 1 || v.dim() == 1) return v;
  return shifted_copy_average(v, j, v.dim() - 1);
}

double periodicity_defect(const PeriodicField& v, int axis, int q) {
  const int n = v.shape[static_cast<std::size_t>(axis)];
  if (n % q != 0) return std::numeric_limits<double>::infinity();
  const int step = n / q;
  double defect = 0.0;
  const long npts = v.npts();
  std::vector<int> idx, shifted;
  for (long node = 0; node < npts; ++node) {
    unflatten(v.shape, node, idx);
    shifted = idx;
    shifted[static_cast<std::size_t>(axis)] = (idx[axis] + step) % n;
    const long other = flat_index(v.shape, shifted);
    for (int c = 0; c < v.m; ++c)
      defect = std::max(defect, std::abs(v.at(c, node) - v.at(c, other)));
  }
  return defect;
}

PeriodicField cell_average_xprime(const PeriodicField& v, int tau_inverse) {
  const int dim = v.dim();
  const double scale = std::max(1.0, v.linf_norm());
  for (int a = 0; a + 1 < dim; ++a) {
    if (periodicity_defect(v, a, tau_inverse) > 1e-10 * scale)
      throw std::invalid_argument("field is not (1/tau)-periodic in x'");
  }
  PeriodicField out = PeriodicField::zeros(v.shape, v.m);
  // For a periodic field the one-cell average equals the full x'-average.
  const int nd = v.shape.back();
  const long npts = v.npts();
  const long per_level = npts / nd;
  std::vector<int> idx;
  std::vector<double> level_mean(static_cast<std::size_t>(v.m) * nd, 0.0);
  for (long node = 0; node < npts; ++node) {
    unflatten(v.shape, node, idx);
    const int level = idx[static_cast<std::size_t>(dim - 1)];
    for (int c = 0; c < v.m; ++c)
      level_mean[static_cast<std::size_t>(c) * nd + level] += v.at(c, node);
  }
  for (double& x : level_mean) x /= static_cast<double>(per_level);
  for (long node = 0; node < npts; ++node) {
    unflatten(v.shape, node, idx);
    const int level = idx[static_cast<std::size_t>(dim - 1)];
    for (int c = 0; c < v.m; ++c)
      out.at(c, node) = level_mean[static_cast<std::size_t>(c) * nd + level];
  }
  return out;
}

PeriodicField cutoff_glue(const PeriodicField& v, const std::function<double(double)>& eta_d,
                          const std::function<double(std::span<const double>)>& rho_prime) {
  const int dim = v.dim();
  // Profile contract: range [0,1], compact support inside the open cell.
  for (double t : {0.0, 1.0}) {
    if (std::abs(eta_d(t)) > 1e-12)
      throw std::invalid_argument("eta_d must be compactly supported in (0,1)");
  }
  std::vector<double> corner(static_cast<std::size_t>(dim - 1), 0.0);
  if (dim > 1 && std::abs(rho_prime(corner)) > 1e-12)
    throw std::invalid_argument("rho' must be compactly supported in Q^{d-1}");
  PeriodicField out = PeriodicField::zeros(v.shape, v.m);
  const long n = v.npts();
  std::vector<int> idx;
  std::vector<double> xp(static_cast<std::size_t>(std::max(dim - 1, 1)));
  for (long node = 0; node < n; ++node) {
    unflatten(v.shape, node, idx);
    for (int a = 0; a + 1 < dim; ++a)
      xp[static_cast<std::size_t>(a)] = (idx[a] + 0.5) / v.shape[static_cast<std::size_t>(a)];
    const double xd = (idx[dim - 1] + 0.5) / v.shape.back();
    const double e = eta_d(xd);
    const double r = dim > 1 ? rho_prime(std::span<const double>(xp.data(), static_cast<std::size_t>(dim - 1)))
                             : 1.0;
    if (e < -1e-12 || e > 1.0 + 1e-12 || r < -1e-12 || r > 1.0 + 1e-12)
      throw std::invalid_argument("cutoff profiles must take values in [0,1]");
    const double w = e * r;
    for (int c = 0; c < v.m; ++c) out.at(c, node) = w * v.at(c, node);
  }
  return out;
}

PeriodicField jump_field(std::vector<int> shape, int normal_axis, double threshold,
                         const Vector& minus, const Vector& plus) {
  check_grid(shape);
  if (minus.size() != plus.size()) throw std::invalid_argument("jump values must share length");
  const int n = shape[static_cast<std::size_t>(normal_axis)];
  const double aligned = threshold * n;
  if (std::abs(aligned - std::round(aligned)) > 1e-12)
    throw std::invalid_argument("jump threshold must align with a grid face");
  const int m = static_cast<int>(minus.size());
  PeriodicField f = PeriodicField::zeros(std::move(shape), m);
  const long npts = f.npts();
  std::vector<int> idx;
  for (long node = 0; node < npts; ++node) {
    unflatten(f.shape, node, idx);
    const double x = (idx[normal_axis] + 0.5) / n;
    const Vector& val = x <= threshold ? minus : plus;
    for (int c = 0; c < m; ++c) f.at(c, node) = val[c];
  }
  return f;
}

namespace {

bool axis_constant(const PeriodicField& v, int axis) {
  const long npts = v.npts();
  std::vector<int> idx, base;
  for (long node = 0; node < npts; ++node) {
    unflatten(v.shape, node, idx);
    base = idx;
    base[static_cast<std::size_t>(axis)] = 0;
    const long other = flat_index(v.shape, base);
    for (int c = 0; c < v.m; ++c)
      if (v.at(c, node) != v.at(c, other)) return false;
  }
  return true;
}

// Index map for one axis of oscillation sampling with scale factor s:
// target node i reads source node map[i]. Integer s needs N = s*M; reciprocal
// s = 1/t needs M = t*N; an axis-constant field accepts any pair.
std::vector<long> axis_sample_map(const PeriodicField& v, int axis, double scale, int target_n) {
  const int src_n = v.shape[static_cast<std::size_t>(axis)];
  std::vector<long> map(static_cast<std::size_t>(target_n));
  const double s_round = std::round(scale);
  const double t_round = scale > 0.0 ? std::round(1.0 / scale) : 0.0;
  if (std::abs(scale - 1.0) < 1e-12 && src_n == target_n) {
    for (int i = 0; i < target_n; ++i) map[static_cast<std::size_t>(i)] = i;
    return map;
  }
  if (s_round >= 2.0 && std::abs(scale - s_round) < 1e-9 && target_n == static_cast<int>(s_round) * src_n) {
    const int s = static_cast<int>(s_round);
    (void)s;
    for (int i = 0; i < target_n; ++i) map[static_cast<std::size_t>(i)] = i % src_n;
    return map;
  }
  if (t_round >= 2.0 && std::abs(1.0 / scale - t_round) < 1e-9 &&
      src_n == static_cast<int>(t_round) * target_n) {
    for (int i = 0; i < target_n; ++i) map[static_cast<std::size_t>(i)] = i;
    return map;
  }
  if (axis_constant(v, axis)) {
    for (int i = 0; i < target_n; ++i) map[static_cast<std::size_t>(i)] = 0;
    return map;
  }
  throw std::invalid_argument("oscillation sampling: incompatible scale/grid combination");
}

}  // namespace

PeriodicField oscillation_sample(const PeriodicField& v, double eps, double alpha,
                                 std::vector<int> target_shape) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  const int dim = v.dim();
  if (static_cast<int>(target_shape.size()) != dim)
    throw std::invalid_argument("target shape dimension mismatch");
  check_grid(target_shape);
  const double sp = 1.0 / std::pow(eps, alpha);
  const double sd = alpha == 1.0 ? 1.0 : 1.0 / std::pow(eps, alpha - 1.0);
  std::vector<std::vector<long>> maps;
  for (int a = 0; a < dim; ++a) {
    const double scale = a + 1 < dim ? sp : sd;
    const int target_n = target_shape[static_cast<std::size_t>(a)];
    maps.push_back(scale == 1.0 && target_n == v.shape[static_cast<std::size_t>(a)]
                       ? axis_sample_map(v, a, 1.0, target_n)
                       : axis_sample_map(v, a, scale, target_n));
  }
  PeriodicField out = PeriodicField::zeros(target_shape, v.m);
  const long n = out.npts();
  std::vector<int> idx;
  std::vector<int> src(static_cast<std::size_t>(dim));
  for (long node = 0; node < n; ++node) {
    unflatten(out.shape, node, idx);
    for (int a = 0; a < dim; ++a)
      src[static_cast<std::size_t>(a)] =
          static_cast<int>(maps[static_cast<std::size_t>(a)][static_cast<std::size_t>(idx[a])]);
    const long s = flat_index(v.shape, src);
    for (int c = 0; c < v.m; ++c) out.at(c, node) = v.at(c, s);
  }
  return out;
}

PeriodicField rescale_xprime(const PeriodicField& v, int j) {
  if (j < 1) throw std::invalid_argument("j must be >= 1");
  if (j == 1) return v;
  const int dim = v.dim();
  const double scale = std::max(1.0, v.linf_norm());
  std::vector<int> out_shape = v.shape;
  std::vector<bool> constant_axis(static_cast<std::size_t>(dim), false);
  for (int a = 0; a + 1 < dim; ++a) {
    if (periodicity_defect(v, a, j) > 1e-10 * scale)
      throw std::invalid_argument("field is not (1/j)-periodic in x'");
    if (axis_constant(v, a)) {
      // nothing to stretch along a constant axis; keep its grid
      constant_axis[static_cast<std::size_t>(a)] = true;
      continue;
    }
    if (v.shape[static_cast<std::size_t>(a)] % j != 0)
      throw std::invalid_argument("grid not divisible by j");
    out_shape[static_cast<std::size_t>(a)] = v.shape[static_cast<std::size_t>(a)] / j;
  }
  check_grid(out_shape);
  PeriodicField out = PeriodicField::zeros(out_shape, v.m);
  const long n = out.npts();
  std::vector<int> idx, src(static_cast<std::size_t>(dim));
  for (long node = 0; node < n; ++node) {
    unflatten(out.shape, node, idx);
    for (int a = 0; a < dim; ++a)
      src[static_cast<std::size_t>(a)] =
          a + 1 < dim && constant_axis[static_cast<std::size_t>(a)] ? 0 : idx[a];
    const long s = flat_index(v.shape, src);
    for (int c = 0; c < v.m; ++c) out.at(c, node) = v.at(c, s);
  }
  return out;
}

}  // namespace filmlab
