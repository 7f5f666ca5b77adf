#include "pushest/smoother.hpp"

#include <set>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace pushest {

using Eigen::MatrixXd;
using Eigen::VectorXd;

FixedLagSmoother::FixedLagSmoother(GraphModel model, const MeasuredTrajectory& traj, const GraphConfig& config,
                                   SmootherOptions options)
    : generator_(model, traj, config), options_(std::move(options)) {
  if (options_.lag < 3) throw std::invalid_argument("lag must be at least 3 timesteps");
  if (options_.trigger < 1) throw std::invalid_argument("trigger must be at least 1");
}

const Values& FixedLagSmoother::update() {
  if (done()) throw std::logic_error("all timesteps have been added");
  const int t = next_++;
  generator_.initialize(t, graph_.values());
  if (windowStart_ == 0) generator_.initialize(t, coldStart_);
  graph_.add(generator_.factorsFor(t));
  if (generator_.trajectory().steps[t].y) ++pendingMeasurements_;
  if (pendingMeasurements_ >= options_.trigger) {
    optimize();
    pendingMeasurements_ = 0;
    marginalizeBefore(t - options_.lag + 1);
  }
  refreshEstimates();
  return estimates_;
}

const Values& FixedLagSmoother::finish() {
  const bool cold = windowStart_ == 0 && done();
  if (cold) graph_.values() = coldStart_;
  if (graph_.size() > 0) optimize(cold && options_.staged);
  pendingMeasurements_ = 0;
  refreshEstimates();
  return estimates_;
}

const Values& FixedLagSmoother::run() {
  while (!done()) update();
  return finish();
}

void FixedLagSmoother::optimize(bool staged) {
  GaussNewtonOptions opts = options_.solver;
  int dim = 0;
  for (const auto& [key, value] : graph_.values()) dim += dimOf(key.role);
  opts.solver = dim <= options_.denseMaxDim ? LinearSolver::DenseCholesky : LinearSolver::SparseCholesky;
  if (staged) {
    StagedSolveResult res = solveStaged(graph_, graph_.values(), opts);
    graph_.values() = std::move(res.values);
    for (auto& r : res.reports) reports_.push_back(std::move(r));
    return;
  }
  SolveResult res = gaussNewton(graph_, graph_.values(), opts);
  graph_.values() = std::move(res.values);
  reports_.push_back(std::move(res.report));
}

void FixedLagSmoother::refreshEstimates() {
  for (const auto& [key, value] : graph_.values()) estimates_.insert(key, value);
}

void FixedLagSmoother::marginalizeBefore(int t) {
  if (t <= windowStart_) return;
  std::set<VariableKey> gone;
  for (const auto& [key, value] : graph_.values()) {
    if (key.timestep < t) gone.insert(key);
  }
  windowStart_ = t;
  coldStart_ = Values();
  if (gone.empty()) return;
  refreshEstimates();

  FactorGraph involved;
  std::vector<FactorPtr> kept;
  for (const auto& f : graph_.factors()) {
    bool touches = false;
    for (const auto& k : f->keys()) touches = touches || gone.count(k) != 0;
    (touches ? involved.factors() : kept).push_back(f);
  }
  for (const auto& f : involved.factors()) {
    for (const auto& k : f->keys()) involved.values().insert(k, graph_.values().at(k));
  }

  std::vector<VariableKey> separator;
  int mDim = 0;
  for (const auto& [key, value] : involved.values()) {
    if (gone.count(key)) {
      mDim += dimOf(key.role);
    } else {
      separator.push_back(key);
    }
  }

  if (!separator.empty()) {
    // Marginalized keys have smaller timesteps, so they lead the ordering.
    const NormalSystem sys = linearize(involved, involved.values());
    const MatrixXd h(sys.hessian);
    const int sDim = static_cast<int>(h.rows()) - mDim;
    const MatrixXd hmm = h.topLeftCorner(mDim, mDim);
    const MatrixXd hsm = h.bottomLeftCorner(sDim, mDim);
    const MatrixXd hss = h.bottomRightCorner(sDim, sDim);
    Eigen::LDLT<MatrixXd> ldlt(hmm);
    MatrixXd schur = hss - hsm * ldlt.solve(hsm.transpose());
    VectorXd g = sys.gradient.tail(sDim) - hsm * ldlt.solve(sys.gradient.head(mDim));
    schur = 0.5 * (schur + schur.transpose());

    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(schur);
    const VectorXd lambda = eig.eigenvalues();
    const double floor = 1e-12 * std::max(lambda.maxCoeff(), 0.0);
    std::vector<int> keep;
    for (int i = 0; i < lambda.size(); ++i) {
      if (lambda(i) > floor && lambda(i) > 0.0) keep.push_back(i);
    }
    if (!keep.empty()) {
      MatrixXd r(keep.size(), sDim);
      VectorXd d(keep.size());
      for (std::size_t i = 0; i < keep.size(); ++i) {
        const VectorXd v = eig.eigenvectors().col(keep[i]);
        const double l = lambda(keep[i]);
        r.row(static_cast<Eigen::Index>(i)) = std::sqrt(l) * v.transpose();
        d(static_cast<Eigen::Index>(i)) = v.dot(g) / std::sqrt(l);
      }
      std::vector<Value> point;
      for (const auto& k : separator) point.push_back(graph_.values().at(k));
      kept.push_back(makeLinearizedPrior(separator, std::move(point), std::move(r), std::move(d)));
    }
  }

  graph_.factors() = std::move(kept);
  for (const auto& k : gone) graph_.values().erase(k);
}

}  // namespace pushest
