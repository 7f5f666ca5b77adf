#include "pushest/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/Cholesky>

namespace pushest {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Ordering::Ordering(const FactorGraph& graph, const Values& values) {
  for (const auto& [key, value] : values) {
    if (graph.isFixed(key)) continue;
    offsets_.emplace(key, dim_);
    dim_ += dimOf(key.role);
  }
}

std::string toString(Termination t) {
  switch (t) {
    case Termination::GradientTolerance: return "gradient_tolerance";
    case Termination::CostTolerance: return "cost_tolerance";
    case Termination::StepTolerance: return "step_tolerance";
    case Termination::NoDescent: return "no_descent";
    case Termination::MaxIterations: return "max_iterations";
  }
  return "?";
}

bool usesCurvature(FactorKind kind) {
  switch (kind) {
    case FactorKind::ObjectContact:
    case FactorKind::EEContact:
    case FactorKind::ObjectEEContact:
    case FactorKind::Intersection:
    case FactorKind::QuasiStatic: return true;
    default: return false;
  }
}

namespace {

/// Sum over residual rows of r_k * Hessian(r_k) for the whitened residual, by central
/// differences of the analytic Jacobian. Blocks follow the factor's key order.
MatrixXd residualCurvature(const Factor& factor, const Values& values, const VectorXd& r) {
  const auto& keys = factor.keys();
  Values local;
  std::vector<int> offs;
  int n = 0;
  for (const auto& k : keys) {
    local.insert(k, values.at(k));
    offs.push_back(n);
    n += dimOf(k.role);
  }
  auto gradient = [&](const Values& v) {
    std::vector<MatrixXd> jac;
    factor.evaluate(v, &jac);
    VectorXd g(n);
    for (std::size_t i = 0; i < keys.size(); ++i) g.segment(offs[i], jac[i].cols()) = factor.noise().whiten(jac[i]).transpose() * r;
    return g;
  };
  constexpr double h = 1e-6;
  MatrixXd out(n, n);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    for (int d = 0; d < dimOf(keys[i].role); ++d) {
      VectorXd delta = VectorXd::Zero(dimOf(keys[i].role));
      Values plus = local, minus = local;
      delta(d) = h;
      plus.retract(keys[i], delta);
      delta(d) = -h;
      minus.retract(keys[i], delta);
      out.col(offs[i] + d) = (gradient(plus) - gradient(minus)) / (2.0 * h);
    }
  }
  return 0.5 * (out + out.transpose());
}

}  // namespace

NormalSystem linearize(const FactorGraph& graph, const Values& values, bool curvature) {
  graph.checkKeys(values);
  NormalSystem sys;
  sys.ordering = Ordering(graph, values);
  const int n = sys.ordering.dim();
  sys.gradient = VectorXd::Zero(n);
  std::vector<Eigen::Triplet<double>> triplets, second;
  triplets.reserve(graph.size() * 64);
  std::vector<MatrixXd> jac;
  auto scatter = [](std::vector<Eigen::Triplet<double>>& out, const MatrixXd& block, int row, int col) {
    for (int c = 0; c < block.cols(); ++c) {
      for (int rr = 0; rr < block.rows(); ++rr) {
        if (block(rr, c) != 0.0) out.emplace_back(row + rr, col + c, block(rr, c));
      }
    }
  };
  for (const auto& factor : graph.factors()) {
    jac.clear();
    const VectorXd r = factor->noise().whiten(factor->evaluate(values, &jac));
    sys.cost += r.squaredNorm();
    const auto& keys = factor->keys();
    std::vector<int> offs(keys.size(), -1);
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (!sys.ordering.contains(keys[i])) continue;
      offs[i] = sys.ordering.offset(keys[i]);
      jac[i] = factor->noise().whiten(jac[i]);
    }
    MatrixXd curv;
    std::vector<int> local;
    if (curvature && usesCurvature(factor->kind()) && r.squaredNorm() > 0.0) {
      curv = residualCurvature(*factor, values, r);
      int m = 0;
      for (const auto& k : keys) {
        local.push_back(m);
        m += dimOf(k.role);
      }
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (offs[i] < 0) continue;
      sys.gradient.segment(offs[i], jac[i].cols()) += jac[i].transpose() * r;
      for (std::size_t j = 0; j < keys.size(); ++j) {
        if (offs[j] < 0) continue;
        scatter(triplets, jac[i].transpose() * jac[j], offs[i], offs[j]);
        if (curv.size() > 0) {
          scatter(second, curv.block(local[i], local[j], jac[i].cols(), jac[j].cols()), offs[i], offs[j]);
        }
      }
    }
  }
  sys.hessian.resize(n, n);
  sys.hessian.setFromTriplets(triplets.begin(), triplets.end());
  if (curvature) {
    sys.curvature.resize(n, n);
    sys.curvature.setFromTriplets(second.begin(), second.end());
  }
  return sys;
}

namespace {

/// Solves (H + lambda diag(H)) dx = -g; empty on factorization failure.
std::optional<VectorXd> solveStep(const NormalSystem& sys, double lambda, LinearSolver solver) {
  SparseMatrix h = sys.hessian;
  if (lambda > 0.0) {
    for (int i = 0; i < h.rows(); ++i) h.coeffRef(i, i) *= (1.0 + lambda);
  }
  VectorXd dx;
  if (solver == LinearSolver::DenseCholesky) {
    Eigen::LLT<MatrixXd> llt{MatrixXd(h)};
    if (llt.info() != Eigen::Success) return std::nullopt;
    dx = llt.solve(-sys.gradient);
  } else {
    Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>> llt(h);
    if (llt.info() != Eigen::Success) return std::nullopt;
    dx = llt.solve(-sys.gradient);
  }
  if (!dx.allFinite()) return std::nullopt;
  return dx;
}

Values applyStep(const Values& values, const Ordering& ordering, const VectorXd& dx) {
  Values out = values;
  for (const auto& [key, offset] : ordering.offsets()) {
    out.retract(key, dx.segment(offset, dimOf(key.role)));
  }
  return out;
}

}  // namespace

SolveResult gaussNewton(const FactorGraph& graph, const Values& init, const GaussNewtonOptions& options) {
  SolveResult result{init, {}};
  SolveReport& rep = result.report;
  double cost = graph.cost(init);
  if (!std::isfinite(cost)) throw NonFiniteCost("initial cost is not finite");
  rep.initialCost = cost;
  rep.costTrace.push_back(cost);

  bool tail = false;  // Newton steps once Gauss-Newton progress has slowed
  while (true) {
    NormalSystem sys = linearize(graph, result.values, options.curvature && tail);
    std::optional<NormalSystem> newton;
    if (sys.curvature.nonZeros() > 0) {
      newton = NormalSystem{sys.ordering, sys.hessian + sys.curvature, sys.gradient, sys.cost, {}};
    }
    rep.finalGradientNorm = sys.ordering.dim() > 0 ? sys.gradient.cwiseAbs().maxCoeff() : 0.0;
    if (rep.finalGradientNorm < options.absGradTol) {
      rep.converged = true;
      rep.termination = Termination::GradientTolerance;
      break;
    }
    if (cost <= options.absCostTol) {
      rep.converged = true;
      rep.termination = Termination::CostTolerance;
      break;
    }
    if (rep.iterations >= options.maxIterations) {
      rep.termination = Termination::MaxIterations;
      break;
    }

    std::optional<VectorXd> accepted;
    Values next;
    double nextCost = cost;
    bool factorized = false;
    bool damped = false;
    auto attempt = [&](const NormalSystem& system, double lambda) {
      auto dx = solveStep(system, lambda, options.solver);
      if (!dx) return false;
      factorized = true;
      Values cand = applyStep(result.values, sys.ordering, *dx);
      const double c = graph.cost(cand);
      if (std::isfinite(c) && c <= cost) {
        accepted = std::move(dx);
        next = std::move(cand);
        nextCost = c;
        return true;
      }
      return false;
    };
    if (!(newton && attempt(*newton, 0.0)) && !attempt(sys, 0.0)) {
      for (double lambda : options.damping) {
        if (attempt(sys, lambda)) {
          ++rep.dampedSteps;
          damped = true;
          break;
        }
      }
    }
    if (!factorized) throw SingularSystem("normal equations are singular even with damping");
    if (!accepted) {
      rep.converged = true;
      rep.termination = Termination::NoDescent;
      break;
    }

    ++rep.iterations;
    const double rel = (cost - nextCost) / std::max(cost, 1e-300);
    const double step = accepted->size() > 0 ? accepted->cwiseAbs().maxCoeff() : 0.0;
    result.values = std::move(next);
    cost = nextCost;
    tail = tail || rel < 1e-2;
    rep.costTrace.push_back(cost);
    // A damped step is short because of the damping, not because the iterate has converged.
    if (step < options.stepTol && (!damped || rel < options.relCostTol * 1e-6)) {
      rep.converged = true;
      rep.termination = rel < options.relCostTol ? Termination::CostTolerance : Termination::StepTolerance;
      break;
    }
  }
  rep.finalCost = cost;
  return result;
}

MarginalCovariances::MarginalCovariances(const FactorGraph& graph, const Values& values)
    : system_(linearize(graph, values)) {
  llt_.compute(system_.hessian);
  if (llt_.info() != Eigen::Success) throw SingularSystem("information matrix is not positive definite");
}

MatrixXd MarginalCovariances::joint(const std::vector<VariableKey>& keys) const {
  const int n = system_.ordering.dim();
  std::vector<int> cols;
  for (const auto& k : keys) {
    if (!system_.ordering.contains(k)) throw std::out_of_range("no free variable " + toString(k));
    const int off = system_.ordering.offset(k);
    for (int d = 0; d < dimOf(k.role); ++d) cols.push_back(off + d);
  }
  MatrixXd rhs = MatrixXd::Zero(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) rhs(cols[i], static_cast<Eigen::Index>(i)) = 1.0;
  const MatrixXd sol = llt_.solve(rhs);
  MatrixXd out(cols.size(), cols.size());
  for (std::size_t i = 0; i < cols.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = sol(cols[i], static_cast<Eigen::Index>(j));
  }
  return 0.5 * (out + out.transpose());
}

MatrixXd MarginalCovariances::marginal(const VariableKey& key) const { return joint({key}); }

MatrixXd marginalCovariance(const FactorGraph& graph, const Values& values, const VariableKey& key) {
  return MarginalCovariances(graph, values).marginal(key);
}

StagedSolveResult solveStaged(const FactorGraph& graph, const Values& init, const GaussNewtonOptions& options) {
  StagedSolveResult out;
  Values start = init;
  if (graph.count(FactorKind::Intersection) > 0) {
    FactorGraph relaxed = graph;
    auto& fs = relaxed.factors();
    fs.erase(std::remove_if(fs.begin(), fs.end(),
                            [](const FactorPtr& f) { return f->kind() == FactorKind::Intersection; }),
             fs.end());
    SolveResult first = gaussNewton(relaxed, init, options);
    start = std::move(first.values);
    out.reports.push_back(std::move(first.report));
  }
  SolveResult full = gaussNewton(graph, start, options);
  out.values = std::move(full.values);
  out.reports.push_back(std::move(full.report));
  return out;
}

}  // namespace pushest
