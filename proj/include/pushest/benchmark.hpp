#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pushest/dataio.hpp"
#include "pushest/estimate.hpp"
#include "pushest/pushsim.hpp"

namespace pushest {

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);
/// Seed of trial `index` under `master`: splitmix64(master + (index + 1) * golden gamma).
/// Independent of how trials are scheduled across threads.
std::uint64_t trialSeed(std::uint64_t master, std::uint64_t index);

/// Parses "box:WxH", "rect:WxH", "disc:R", "ellipse:AxB" (semi-axes) and "poly:x1,y1;x2,y2;...".
Shape2D parseShapeSpec(const std::string& spec);

enum class PathFamily { Straight, Arc, RandomCurvature, Mixed };
std::string toString(PathFamily family);
PathFamily parsePathFamily(const std::string& name);

struct ScenarioOptions {
  /// Object shapes drawn from; empty means the built-in set (box, rectangle, disc, ellipse).
  std::vector<Shape2D> objects;
  Shape2D ee = Shape2D::disc(0.01);
  PathFamily family = PathFamily::Mixed;
  double minSpeed = 0.05;  // m/s
  double maxSpeed = 0.07;  // m/s
  double duration = 10.0;  // s
  double dt = 0.04;        // s
  double muS = 0.5;
  double minMass = 0.5;  // kg
  double maxMass = 1.5;  // kg
  /// Arc family: steering offset magnitude drawn from [minArcBias, maxArcBias] rad, random sign.
  double minArcBias = 0.1;
  double maxArcBias = 0.3;
  /// Random-curvature family: bound on the steering offset (rad).
  double maxSteeringOffset = 0.35;
  /// Forces a push straight through the centroid along a straight path.
  bool centered = false;
  int maxAttempts = 50;
};

/// Draws a scene and steered push from `seed` and simulates it; attempts that lose contact
/// are redrawn from a derived seed. Throws SimulationError after maxAttempts failures.
GroundTruthTrajectory makeScenario(const ScenarioOptions& options, std::uint64_t seed);

/// Gaussian corruption of 0.5 cm translation and contact and 0.5 N force, with the given rotation sigma.
NoiseSpec benchmarkGaussianNoise(double rotSigma, std::uint64_t seed);
/// Bimodal triangular corruption of contact (modes in cm) and force (modes in N).
NoiseSpec bimodalNoise(double mode, double halfWidth, std::uint64_t seed);

struct TrialSetting {
  std::string name;
  NoiseSpec noise;  // seed is replaced per trial
  std::optional<std::pair<double, double>> occlusion;
  bool fixPosesToTruth = false;
};

struct TrialRow {
  int trial = 0;
  std::uint64_t seed = 0;
  std::string setting;
  GraphModel model = GraphModel::QS;
  bool ok = false;
  bool converged = false;
  std::string error;
  Metrics raw;
  Metrics estimate;
  int iterations = 0;
  double finalCost = 0.0;
  bool costMonotone = true;
  /// Largest ratio over timesteps of posterior marginal trace to measurement covariance trace.
  double maxObjectTraceRatio = 0.0;
  double maxContactTraceRatio = 0.0;
};

struct BenchmarkOptions {
  std::uint64_t masterSeed = 1;
  int trials = 50;
  std::vector<GraphModel> models = {GraphModel::CP, GraphModel::SDF, GraphModel::QS};
  std::vector<TrialSetting> settings;
  ScenarioOptions scenario{};
  /// When non-empty, trial i uses sources[i] instead of a simulated scenario.
  std::vector<GroundTruthTrajectory> sources;
  EstimateOptions estimate{};
  int threads = 1;
};

/// Ground truth embedded in a trajectory file; requires shapes and parameters.
GroundTruthTrajectory groundTruthTrajectory(const MeasuredTrajectory& traj);

/// Runs every (trial, setting, model) combination. Failures are recorded per row.
std::vector<TrialRow> runBenchmark(const BenchmarkOptions& options);

/// Simulates and corrupts one trial, then estimates it with each model.
std::vector<TrialRow> runTrial(const BenchmarkOptions& options, int trial, const TrialSetting& setting);

struct AggregateRow {
  std::string setting;
  GraphModel model = GraphModel::QS;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
  int count = 0;
};

/// Mean and standard deviation across trials of every per-trial metric, per (setting, model).
std::vector<AggregateRow> aggregate(const std::vector<TrialRow>& rows);

std::vector<std::string> trialColumns();
std::vector<std::string> trialValues(const TrialRow& row);
/// Per-trial rows followed by the aggregate block; '#' lines carry `provenance`.
std::string benchmarkCsv(const std::vector<TrialRow>& rows, const std::vector<AggregateRow>& agg,
                         const nlohmann::json& provenance);

}  // namespace pushest
