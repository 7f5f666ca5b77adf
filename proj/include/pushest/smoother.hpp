#pragma once

#include <vector>

#include "pushest/graph.hpp"
#include "pushest/optimizer.hpp"

namespace pushest {

struct SmootherOptions {
  int lag = 20;                 // timesteps kept in the optimization window
  int trigger = 5;              // optimize after this many new object-pose measurements
  GaussNewtonOptions solver{};
  /// Windows up to this many unknowns use dense Cholesky, larger ones the sparse solver.
  int denseMaxDim = 0;
  /// Final solve of a window that never slid uses solveStaged, matching the batch path.
  bool staged = true;
};

/// Fixed-lag smoother: variables older than the window are marginalized into a dense linear
/// prior on the variables they share factors with.
class FixedLagSmoother {
 public:
  /// Throws std::invalid_argument for lag < 3 or trigger < 1.
  FixedLagSmoother(GraphModel model, const MeasuredTrajectory& traj, const GraphConfig& config = {},
                   SmootherOptions options = {});

  /// Adds the next timestep; optimizes (and marginalizes) when the trigger fires. Returns the
  /// current estimates of all timesteps seen so far.
  const Values& update();
  /// Final optimization of the current window. If nothing has been marginalized and every
  /// timestep was added, the window is the batch problem and is solved from the batch
  /// initialization, so the result equals the batch estimate.
  const Values& finish();
  /// Runs update() over the whole trajectory followed by finish().
  const Values& run();

  int nextTimestep() const { return next_; }
  bool done() const { return static_cast<std::size_t>(next_) >= generator_.size(); }
  const Values& estimates() const { return estimates_; }
  /// Oldest timestep still inside the optimization window.
  int windowStart() const { return windowStart_; }
  std::size_t windowFactorCount() const { return graph_.size(); }
  const std::vector<SolveReport>& reports() const { return reports_; }

 private:
  void optimize(bool staged = false);
  void marginalizeBefore(int t);
  void refreshEstimates();

  StepFactorGenerator generator_;
  SmootherOptions options_;
  FactorGraph graph_;    // window factors (including the boundary prior)
  Values estimates_;     // every timestep seen; marginalized ones frozen
  Values coldStart_;     // measurement-only initialization while the window has not slid
  std::vector<SolveReport> reports_;
  int next_ = 0;
  int windowStart_ = 0;
  int pendingMeasurements_ = 0;
};

}  // namespace pushest
