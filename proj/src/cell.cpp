#include "filmlab/cell.hpp"

#include <cmath>
#include <stdexcept>

namespace filmlab {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double fracf(double x) { return x - std::floor(x); }

// Maps a solve-grid node to the full d-dimensional density argument.
struct ZMap {
  CellMode mode;
  int d;
  std::vector<int> multicell;

  void operator()(const std::vector<double>& y, std::vector<double>& z) const {
    z.assign(static_cast<std::size_t>(d), 0.5);
    switch (mode) {
      case CellMode::Full:
      case CellMode::Limit:
        for (int a = 0; a < d; ++a) z[static_cast<std::size_t>(a)] = y[static_cast<std::size_t>(a)];
        break;
      case CellMode::ReducedXPrime:
        for (int a = 0; a + 1 < d; ++a)
          z[static_cast<std::size_t>(a)] = y[static_cast<std::size_t>(a)];
        break;
      case CellMode::Thickness:
        z[static_cast<std::size_t>(d - 1)] = y[0];
        break;
    }
    if (!multicell.empty()) {
      const std::size_t solve_dim = y.size();
      for (std::size_t a = 0; a < solve_dim; ++a) {
        const int n = multicell[a];
        if (n == 1) continue;
        // multicell oscillation acts on the solve coordinates
        std::size_t full_axis = a;
        if (mode == CellMode::Thickness) full_axis = static_cast<std::size_t>(d - 1);
        z[full_axis] = fracf(n * y[a]);
      }
    }
  }
};

ModeProjector build_projector(const CellProblem& prob) {
  const DifferentialOperator& op = prob.op;
  switch (prob.mode) {
    case CellMode::Full: {
      if (static_cast<int>(prob.shape.size()) != op.d)
        throw std::invalid_argument("solve grid dimension must match the operator");
      if (!prob.scaled_thickness)
        return ModeProjector::for_operator(op, prob.film_eps, prob.shape, true);
      // Stretched cell E_eps: torus frequencies (k', eps k_d) fed through A_eps.
      const double eps = prob.film_eps;
      DifferentialOperator local = op;
      return ModeProjector::for_symbol(
          [local, eps](const std::vector<int>& k) {
            Vector eta(local.d);
            for (int a = 0; a < local.d; ++a) eta[a] = kTwoPi * k[static_cast<std::size_t>(a)];
            eta[local.d - 1] *= eps;
            return evaluate_rescaled_symbol(local, eps, eta);
          },
          op.m, prob.shape);
    }
    case CellMode::ReducedXPrime: {
      if (static_cast<int>(prob.shape.size()) != op.d - 1)
        throw std::invalid_argument("reduced solve needs a (d-1)-dimensional grid");
      DifferentialOperator local = op;
      return ModeProjector::for_symbol(
          [local](const std::vector<int>& k) {
            Matrix s = Matrix::Zero(local.l, local.m);
            for (int a = 0; a + 1 < local.d; ++a)
              s += local.coeff(a) * (kTwoPi * k[static_cast<std::size_t>(a)]);
            return s;
          },
          op.m, prob.shape);
    }
    case CellMode::Thickness: {
      if (prob.shape.size() != 1)
        throw std::invalid_argument("thickness solve needs a 1D grid");
      DifferentialOperator local = op;
      return ModeProjector::for_symbol(
          [local](const std::vector<int>& k) {
            return (local.last_coeff() * (kTwoPi * k[0])).eval();
          },
          op.m, prob.shape);
    }
    case CellMode::Limit: {
      if (static_cast<int>(prob.shape.size()) != op.d)
        throw std::invalid_argument("limit solve needs a d-dimensional grid");
      if (!prob.dec) throw std::invalid_argument("limit solve needs an operator decomposition");
      const LimitOperator lim = limit_operator(op, *prob.dec);
      DifferentialOperator base = lim.base;
      return ModeProjector::for_symbol(
          [base](const std::vector<int>& k) {
            Vector eta(base.d);
            for (int a = 0; a < base.d; ++a) eta[a] = kTwoPi * k[static_cast<std::size_t>(a)];
            return evaluate_symbol(base, eta);
          },
          op.m, prob.shape);
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

CellResult solve_cell(const CellProblem& prob) {
  if (!prob.density) throw std::invalid_argument("cell problem needs a density");
  const EnergyDensity& f = *prob.density;
  if (!f.certified_convex)
    throw std::invalid_argument("cell solver requires a convexity-certified density");
  if (f.m != prob.op.m) throw std::invalid_argument("density components must match the operator");
  if (static_cast<int>(prob.xi.size()) != f.m) throw std::invalid_argument("xi has wrong length");
  if (!prob.multicell.empty()) {
    if (prob.multicell.size() != prob.shape.size())
      throw std::invalid_argument("multicell vector must match the grid dimension");
    for (std::size_t a = 0; a < prob.multicell.size(); ++a) {
      if (prob.multicell[a] < 1 || prob.shape[a] % prob.multicell[a] != 0)
        throw std::invalid_argument("grid must be divisible by every multicell count");
    }
  }
  check_grid(prob.shape);

  const ModeProjector projector = build_projector(prob);
  ZMap zmap{prob.mode, prob.op.d, prob.multicell};

  const int m = f.m;
  PeriodicField v = PeriodicField::zeros(prob.shape, m);
  const long npts = v.npts();
  const int dim = v.dim();

  // Precompute node coordinates -> density z arguments.
  std::vector<double> zs(static_cast<std::size_t>(npts) * f.d);
  {
    std::vector<int> idx;
    std::vector<double> y(static_cast<std::size_t>(dim)), z;
    for (long node = 0; node < npts; ++node) {
      unflatten(prob.shape, node, idx);
      for (int a = 0; a < dim; ++a)
        y[static_cast<std::size_t>(a)] = (idx[a] + 0.5) / prob.shape[static_cast<std::size_t>(a)];
      zmap(y, z);
      for (int a = 0; a < f.d; ++a)
        zs[static_cast<std::size_t>(node) * f.d + a] = z[static_cast<std::size_t>(a)];
    }
  }

  auto energy = [&](const PeriodicField& w) {
    double acc = 0.0;
    std::vector<double> arg(static_cast<std::size_t>(m));
    for (long node = 0; node < npts; ++node) {
      for (int c = 0; c < m; ++c) arg[static_cast<std::size_t>(c)] = prob.xi[c] + w.at(c, node);
      acc += f.value(std::span<const double>(zs.data() + static_cast<std::size_t>(node) * f.d,
                                             static_cast<std::size_t>(f.d)),
                     arg);
    }
    return acc / static_cast<double>(npts);
  };

  auto fill_gradient = [&](const PeriodicField& w, PeriodicField& g) {
    std::vector<double> arg(static_cast<std::size_t>(m)), grad(static_cast<std::size_t>(m));
    for (long node = 0; node < npts; ++node) {
      for (int c = 0; c < m; ++c) arg[static_cast<std::size_t>(c)] = prob.xi[c] + w.at(c, node);
      f.gradient(std::span<const double>(zs.data() + static_cast<std::size_t>(node) * f.d,
                                         static_cast<std::size_t>(f.d)),
                 arg, grad);
      for (int c = 0; c < m; ++c) g.at(c, node) = grad[static_cast<std::size_t>(c)];
    }
  };

  CellResult result;
  double e = energy(v);
  result.energy_history.push_back(e);
  const double iterate_bound = std::max(1.0, prob.xi.norm() + 1.0);
  double lipschitz = f.grad_lipschitz_hint > 0.0
                         ? f.grad_lipschitz_hint
                         : std::max(1e-12, f.p * f.c4 *
                                               std::pow(iterate_bound, std::max(0.0, f.p - 2.0)));
  const double tau0 = prob.params.step_safety / lipschitz;

  PeriodicField grad = PeriodicField::zeros(prob.shape, m);
  int it = 0;
  for (; it < prob.params.max_iterations; ++it) {
    fill_gradient(v, grad);
    // re-arm the step each iteration; halving only has to absorb the local
    // nonsmoothness of tabulated envelope regions
    double tau = tau0;
    bool accepted = false;
    for (int halving = 0; halving < 60 && !accepted; ++halving) {
      PeriodicField trial = v;
      trial.add_scaled(grad, -tau);
      trial = projector.apply(trial, false);
      const double e_new = energy(trial);
      if (e_new <= e + 1e-14 * std::max(1.0, std::abs(e))) {
        v = std::move(trial);
        e = e_new;
        accepted = true;
      } else {
        tau /= 2.0;
      }
    }
    if (!accepted) break;
    result.energy_history.push_back(e);
    const int w = prob.params.plateau_window;
    const int hist = static_cast<int>(result.energy_history.size());
    if (hist > w) {
      const double drop = result.energy_history[static_cast<std::size_t>(hist - 1 - w)] -
                          result.energy_history[static_cast<std::size_t>(hist - 1)];
      if (drop <= prob.params.rel_tol * std::max(1.0, std::abs(e))) {
        result.converged = true;
        ++it;
        break;
      }
    }
  }

  result.value = e;
  result.iterations = it;
  result.corrector = std::move(v);
  result.corrector_mean = result.corrector.mean().cwiseAbs().maxCoeff();
  result.residual_h_minus1 = h_minus1_norm(projector.apply_symbol(result.corrector));
  return result;
}

CellResult f_hom_multicell(const CellProblem& prob, const std::vector<int>& n) {
  CellProblem local = prob;
  local.multicell = n;
  return solve_cell(local);
}

CellResult f_hom_reduced_xprime(const CellProblem& prob) {
  if (!prob.density->independent_of_zd)
    throw std::invalid_argument("reduced x' formula needs a z_d-independent density");
  CellProblem local = prob;
  local.mode = CellMode::ReducedXPrime;
  if (static_cast<int>(local.shape.size()) == prob.op.d) local.shape.pop_back();
  if (!local.multicell.empty() && local.multicell.size() != local.shape.size())
    local.multicell.pop_back();
  return solve_cell(local);
}

CellResult f_hom_thickness(const CellProblem& prob) {
  if (!prob.density->independent_of_zprime)
    throw std::invalid_argument("thickness formula needs a z'-independent density");
  CellProblem local = prob;
  local.mode = CellMode::Thickness;
  if (local.shape.size() != 1) local.shape = {prob.shape.back()};
  if (!local.multicell.empty() && local.multicell.size() != 1)
    local.multicell = {prob.multicell.back()};
  return solve_cell(local);
}

CellResult f_hom_limit(const CellProblem& prob) {
  CellProblem local = prob;
  local.mode = CellMode::Limit;
  if (!local.dec) {
    auto [normalized, dec] = normalize(prob.op);
    local.op = normalized;
    local.dec = dec;
  }
  return solve_cell(local);
}

std::vector<ScalingCheckRow> scaling_identity_check(const CellProblem& prob,
                                                    const std::vector<double>& eps_list) {
  const CellResult reference = solve_cell(prob);
  std::vector<ScalingCheckRow> rows;
  for (double eps : eps_list) {
    CellProblem local = prob;
    local.film_eps = eps;
    local.scaled_thickness = true;
    const CellResult r = solve_cell(local);
    rows.push_back({eps, r.value, reference.value});
  }
  return rows;
}

}  // namespace filmlab
