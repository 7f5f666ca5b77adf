#include "pushest/estimate.hpp"

#include <algorithm>
#include <cctype>

namespace pushest {

std::string toString(EstimationMode mode) { return mode == EstimationMode::Batch ? "batch" : "incremental"; }

EstimationMode parseEstimationMode(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "batch") return EstimationMode::Batch;
  if (lower == "incremental") return EstimationMode::Incremental;
  throw std::invalid_argument("unknown mode '" + name + "' (expected batch or incremental)");
}

std::vector<StateSample> statesFromValues(const MeasuredTrajectory& traj, const Values& values) {
  std::vector<StateSample> out(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const int t = static_cast<int>(i);
    out[i].t = traj.steps[i].t;
    if (values.contains(objectKey(t))) out[i].object = values.pose(objectKey(t));
    if (values.contains(eeKey(t))) out[i].ee = values.pose(eeKey(t));
    if (values.contains(contactKey(t))) {
      const ContactForceState& pf = values.contactForce(contactKey(t));
      out[i].contact = pf.p;
      out[i].force = pf.f;
    }
  }
  return out;
}

EstimateResult estimateTrajectory(const MeasuredTrajectory& traj, const EstimateOptions& options) {
  FactorGraph graph = buildGraph(options.model, traj, options.graph);
  if (options.fixPosesToTruth) {
    if (options.mode != EstimationMode::Batch) {
      throw std::invalid_argument("ground-truth-fixed poses are only supported in batch mode");
    }
    const auto truth = traj.groundTruth();
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const int t = static_cast<int>(i);
      graph.values().insert(objectKey(t), truth[i].object);
      graph.values().insert(eeKey(t), truth[i].ee);
      graph.fix(objectKey(t));
      graph.fix(eeKey(t));
    }
  }

  EstimateResult result;
  if (options.mode == EstimationMode::Batch) {
    if (options.staged) {
      StagedSolveResult solved = solveStaged(graph, graph.values(), options.solver);
      result.values = std::move(solved.values);
      result.reports = std::move(solved.reports);
    } else {
      SolveResult solved = gaussNewton(graph, graph.values(), options.solver);
      result.values = std::move(solved.values);
      result.reports.push_back(std::move(solved.report));
    }
    result.converged = result.reports.back().converged;
  } else {
    SmootherOptions so;
    so.lag = options.lag;
    so.trigger = options.trigger;
    so.solver = options.solver;
    so.staged = options.staged;
    FixedLagSmoother smoother(options.model, traj, options.graph, so);
    result.values = smoother.run();
    result.reports = smoother.reports();
    result.converged = std::all_of(result.reports.begin(), result.reports.end(),
                                   [](const SolveReport& r) { return r.converged; });
  }
  result.finalCost = graph.cost(result.values);
  result.states = statesFromValues(traj, result.values);

  if (options.covariances) {
    MarginalCovariances marginals(graph, result.values);
    std::vector<StateCovariance> cov(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const int t = static_cast<int>(i);
      if (!graph.isFixed(objectKey(t))) cov[i].object = marginals.marginal(objectKey(t));
      if (!graph.isFixed(eeKey(t))) cov[i].ee = marginals.marginal(eeKey(t));
      cov[i].contactForce = marginals.marginal(contactKey(t));
    }
    result.covariances = std::move(cov);
  }
  return result;
}

}  // namespace pushest
