#pragma once

#include <optional>
#include <vector>

#include "pushest/dataio.hpp"
#include "pushest/graph.hpp"
#include "pushest/optimizer.hpp"
#include "pushest/smoother.hpp"

namespace pushest {

enum class EstimationMode { Batch, Incremental };

std::string toString(EstimationMode mode);
EstimationMode parseEstimationMode(const std::string& name);

struct EstimateOptions {
  GraphModel model = GraphModel::QS;
  EstimationMode mode = EstimationMode::Batch;
  GraphConfig graph{};
  GaussNewtonOptions solver{};
  int lag = 20;
  int trigger = 5;
  bool covariances = true;
  /// Holds object and end-effector poses at the embedded ground truth (batch only).
  bool fixPosesToTruth = false;
  /// Batch: solve without intersection factors before the full solve (see solveStaged).
  bool staged = true;
};

struct EstimateResult {
  std::vector<StateSample> states;
  std::optional<std::vector<StateCovariance>> covariances;
  Values values;
  /// Batch: one report per solve stage. Incremental: one report per window optimization.
  std::vector<SolveReport> reports;
  bool converged = false;
  double finalCost = 0.0;  // full-graph cost at the returned values
};

/// Builds the graph of the selected model and solves it in batch or with the fixed-lag
/// smoother. Covariances are the marginals of the full graph at the returned estimate.
EstimateResult estimateTrajectory(const MeasuredTrajectory& traj, const EstimateOptions& options);

std::vector<StateSample> statesFromValues(const MeasuredTrajectory& traj, const Values& values);

}  // namespace pushest
