#include "filmlab/density.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "filmlab/rng.hpp"

namespace filmlab {

namespace {

double fracf(double x) { return x - std::floor(x); }

class QuadraticDensity final : public EnergyDensity {
 public:
  QuadraticDensity(int dd, int mm, std::function<Matrix(std::span<const double>)> coefficient)
      : coefficient_(std::move(coefficient)) {
    d = dd;
    m = mm;
    p = 2.0;
    certified_convex = true;
  }

  double value(std::span<const double> z, std::span<const double> v) const override {
    const Matrix c = coefficient_(z);
    double acc = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) acc += v[static_cast<std::size_t>(i)] * c(i, j) * v[static_cast<std::size_t>(j)];
    return 0.5 * acc;
  }

  void gradient(std::span<const double> z, std::span<const double> v,
                std::span<double> out) const override {
    const Matrix c = coefficient_(z);
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      for (int j = 0; j < m; ++j) acc += c(i, j) * v[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(i)] = acc;
    }
  }

  std::function<Matrix(std::span<const double>)> coefficient_;
};

std::shared_ptr<QuadraticDensity> build_quadratic(
    int d, int m, const std::function<Matrix(std::span<const double>)>& coefficient,
    int spd_check_samples) {
  auto density = std::make_shared<QuadraticDensity>(d, m, coefficient);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  Rng rng(0x5eedULL);
  std::vector<double> z(static_cast<std::size_t>(d));
  for (int s = 0; s < spd_check_samples; ++s) {
    for (double& zi : z) zi = rng.uniform();
    const Matrix c = coefficient(z);
    if (c.rows() != m || c.cols() != m) throw std::invalid_argument("coefficient has wrong shape");
    if ((c - c.transpose()).norm() > 1e-10 * std::max(1.0, c.norm()))
      throw std::invalid_argument("coefficient matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
    const double lmin = eig.eigenvalues().minCoeff();
    const double lmax = eig.eigenvalues().maxCoeff();
    if (lmin <= 0.0) throw std::invalid_argument("coefficient matrix must be positive definite");
    lo = std::min(lo, lmin);
    hi = std::max(hi, lmax);
  }
  density->c1 = hi / 2.0;
  density->c2 = lo / 2.0;
  density->c3 = 0.0;
  density->c4 = hi / 2.0;
  return density;
}

}  // namespace

DensityPtr quadratic_density(int d, int m,
                             const std::function<Matrix(std::span<const double> z)>& coefficient,
                             int spd_check_samples) {
  return build_quadratic(d, m, coefficient, spd_check_samples);
}

DensityPtr quadratic_identity(int d, int m) {
  auto density =
      build_quadratic(d, m, [m](std::span<const double>) { return Matrix::Identity(m, m); }, 4);
  density->independent_of_zd = true;
  density->independent_of_zprime = true;
  return density;
}

DensityPtr quadratic_laminate(int d, int m, int axis, double a_lo, double a_hi) {
  auto density = build_quadratic(
      d, m,
      [m, axis, a_lo, a_hi](std::span<const double> z) {
        const double a = fracf(z[static_cast<std::size_t>(axis)]) <= 0.5 ? a_lo : a_hi;
        return (a * Matrix::Identity(m, m)).eval();
      },
      64);
  density->independent_of_zd = axis != d - 1;
  density->independent_of_zprime = axis == d - 1;
  return density;
}

DensityPtr quadratic_laminate_coupled(int d, int m, int axis, double a_lo, double a_hi,
                                      double coupling) {
  if (m < 2) throw std::invalid_argument("coupled laminate needs m >= 2");
  auto density = build_quadratic(
      d, m,
      [m, axis, a_lo, a_hi, coupling](std::span<const double> z) {
        const bool first = fracf(z[static_cast<std::size_t>(axis)]) <= 0.5;
        const double a = first ? a_lo : a_hi;
        Matrix c = a * Matrix::Identity(m, m);
        const double b = first ? coupling : -coupling;
        c(0, 1) += b;
        c(1, 0) += b;
        return c;
      },
      64);
  density->independent_of_zd = axis != d - 1;
  density->independent_of_zprime = axis == d - 1;
  return density;
}

TwoPhaseProductDensity::TwoPhaseProductDensity(Vector x1, Vector x2, Vector s1, Vector s2,
                                               int axis, double pp)
    : xi1(std::move(x1)), xi2(std::move(x2)), sigma1(std::move(s1)), sigma2(std::move(s2)),
      stripe_axis(axis), p(pp) {}

int TwoPhaseProductDensity::phase(std::span<const double> z) const {
  return fracf(z[static_cast<std::size_t>(stripe_axis)]) <= 0.5 ? 1 : 2;
}

double TwoPhaseProductDensity::value(std::span<const double> z, std::span<const double> v) const {
  const Vector& a = phase(z) == 1 ? xi1 : xi2;
  const Vector& b = phase(z) == 1 ? sigma1 : sigma2;
  double da = 0.0, db = 0.0;
  for (int c = 0; c < a.size(); ++c) {
    const double ta = v[static_cast<std::size_t>(c)] - a[c];
    const double tb = v[static_cast<std::size_t>(c)] - b[c];
    da += ta * ta;
    db += tb * tb;
  }
  return std::pow(da, p / 4.0) * std::pow(db, p / 4.0);
}

ConvexEnvelopeTable convexify_pair(const Vector& a, const Vector& b, double p, int resolution,
                                   double box_radius) {
  return ConvexEnvelopeTable(a, b, p, resolution, box_radius);
}

namespace {

class TwoPhaseEnvelopeDensity final : public EnergyDensity {
 public:
  TwoPhaseEnvelopeDensity(const QuartetVectors& q, int dd, double pp, int resolution,
                          double box_radius)
      : table1_(q.xi1, q.sigma1, pp, resolution, box_radius),
        table2_(q.xi2, q.sigma2, pp, resolution, box_radius),
        axis_(q.axis) {
    d = dd;
    m = static_cast<int>(q.xi1.size());
    p = pp;
    independent_of_zd = true;
    certified_convex = true;
    // growth/coercivity constants from the phase endpoints
    double big = 0.0;
    for (const Vector* v : {&q.xi1, &q.xi2, &q.sigma1, &q.sigma2}) big = std::max(big, v->norm());
    double gap = std::max((q.xi1 - q.sigma1).norm(), (q.xi2 - q.sigma2).norm());
    c1 = std::max(1.0 + big, 0.5 * (2.0 * big) + big * big + 1.0);
    c2 = 0.25;
    c3 = 0.5 * big * big + 0.5 * gap * gap;
    c4 = 4.0 * (1.0 + big) * (1.0 + big);
    grad_lipschitz_hint = probe_curvature(big + 2.0);
  }

  double probe_curvature(double radius) const {
    Rng rng(0xc0ffeeULL);
    const double h = std::max(table1_.spacing(), table2_.spacing());
    double worst = 1.0;
    std::vector<double> v(static_cast<std::size_t>(m)), vp(static_cast<std::size_t>(m)),
        vm(static_cast<std::size_t>(m)), dir(static_cast<std::size_t>(m));
    for (const ConvexEnvelopeTable* table : {&table1_, &table2_}) {
      for (int s = 0; s < 256; ++s) {
        double n2 = 0.0;
        for (int c = 0; c < m; ++c) {
          v[static_cast<std::size_t>(c)] = rng.uniform(-radius, radius);
          dir[static_cast<std::size_t>(c)] = rng.normal();
          n2 += dir[static_cast<std::size_t>(c)] * dir[static_cast<std::size_t>(c)];
        }
        const double inv = 1.0 / std::sqrt(std::max(n2, 1e-300));
        for (int c = 0; c < m; ++c) {
          vp[static_cast<std::size_t>(c)] = v[static_cast<std::size_t>(c)] + h * dir[static_cast<std::size_t>(c)] * inv;
          vm[static_cast<std::size_t>(c)] = v[static_cast<std::size_t>(c)] - h * dir[static_cast<std::size_t>(c)] * inv;
        }
        const double second =
            (table->value(vp) + table->value(vm) - 2.0 * table->value(v)) / (h * h);
        worst = std::max(worst, second);
      }
    }
    return 2.0 * worst;
  }

  const ConvexEnvelopeTable& table(std::span<const double> z) const {
    return fracf(z[static_cast<std::size_t>(axis_)]) <= 0.5 ? table1_ : table2_;
  }

  double value(std::span<const double> z, std::span<const double> v) const override {
    return table(z).value(v);
  }

  void gradient(std::span<const double> z, std::span<const double> v,
                std::span<double> out) const override {
    table(z).gradient(v, out);
  }

  const ConvexEnvelopeTable& table_phase(int phase) const { return phase == 1 ? table1_ : table2_; }

 private:
  ConvexEnvelopeTable table1_, table2_;
  int axis_;
};

}  // namespace

DensityPtr counterexample_density(const QuartetVectors& quartet, int d, double p, int resolution,
                                  double box_radius) {
  double big = 0.0;
  for (const Vector* v : {&quartet.xi1, &quartet.xi2, &quartet.sigma1, &quartet.sigma2})
    big = std::max(big, v->norm());
  const double gap = std::max((quartet.xi1 - quartet.sigma1).norm(),
                              (quartet.xi2 - quartet.sigma2).norm());
  if (box_radius <= 0.0) box_radius = std::max(2.5 * gap, big + 12.0);
  return std::make_shared<TwoPhaseEnvelopeDensity>(quartet, d, p, resolution, box_radius);
}

HypothesisReport verify_hypotheses(const EnergyDensity& f, int n_samples, std::uint64_t seed) {
  HypothesisReport rep;
  rep.samples = n_samples;
  Rng rng(seed);
  const double radius = 10.0;
  std::vector<double> z(static_cast<std::size_t>(f.d));
  std::vector<double> v(static_cast<std::size_t>(f.m)), w(static_cast<std::size_t>(f.m)),
      mid(static_cast<std::size_t>(f.m));
  rep.margin_growth = rep.margin_coercivity = rep.margin_convexity = rep.margin_lipschitz =
      rep.margin_nonneg = std::numeric_limits<double>::infinity();

  auto ball_point = [&](std::vector<double>& out) {
    double n2 = 0.0;
    for (double& x : out) {
      x = rng.normal();
      n2 += x * x;
    }
    const double radius_sample = radius * std::pow(rng.uniform(), 1.0 / f.m);
    const double scale = n2 > 0.0 ? radius_sample / std::sqrt(n2) : 0.0;
    for (double& x : out) x *= scale;
  };

  for (int s = 0; s < n_samples; ++s) {
    for (double& zi : z) zi = rng.uniform();
    ball_point(v);
    ball_point(w);
    const double fv = f.value(z, v);
    const double fw = f.value(z, w);
    double nv = 0.0, nw = 0.0, dvw = 0.0;
    for (int c = 0; c < f.m; ++c) {
      nv += v[static_cast<std::size_t>(c)] * v[static_cast<std::size_t>(c)];
      nw += w[static_cast<std::size_t>(c)] * w[static_cast<std::size_t>(c)];
      const double dd = v[static_cast<std::size_t>(c)] - w[static_cast<std::size_t>(c)];
      dvw += dd * dd;
      mid[static_cast<std::size_t>(c)] =
          0.5 * (v[static_cast<std::size_t>(c)] + w[static_cast<std::size_t>(c)]);
    }
    nv = std::sqrt(nv);
    nw = std::sqrt(nw);
    dvw = std::sqrt(dvw);
    const double fmid = f.value(z, mid);
    rep.margin_nonneg = std::min(rep.margin_nonneg, fv);
    rep.margin_growth = std::min(rep.margin_growth, f.c1 * (1.0 + std::pow(nv, f.p)) - fv);
    rep.margin_coercivity = std::min(rep.margin_coercivity, fv - f.c2 * std::pow(nv, f.p) + f.c3);
    rep.margin_convexity = std::min(rep.margin_convexity, 0.5 * (fv + fw) - fmid);
    rep.margin_lipschitz = std::min(
        rep.margin_lipschitz, f.c4 * std::pow(nv + nw, f.p - 1.0) * dvw - std::abs(fv - fw));
  }

  const double tol = 1e-7;
  if (rep.margin_nonneg < -tol) {
    rep.passed = false;
    rep.failed = "H0 nonnegativity";
  } else if (rep.margin_growth < -tol) {
    rep.passed = false;
    rep.failed = "H3 growth";
  } else if (rep.margin_coercivity < -tol) {
    rep.passed = false;
    rep.failed = "H4 coercivity";
  } else if (rep.margin_convexity < -1e-6) {
    rep.passed = false;
    rep.failed = "H5 convexity";
  } else if (rep.margin_lipschitz < -tol) {
    rep.passed = false;
    rep.failed = "p-Lipschitz bound";
  }
  return rep;
}

}  // namespace filmlab
