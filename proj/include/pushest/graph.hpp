#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pushest/dataio.hpp"
#include "pushest/factors.hpp"

namespace pushest {

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class EmptyTrajectory : public GraphError {
 public:
  using GraphError::GraphError;
};
class MissingShapeConfig : public GraphError {
 public:
  using GraphError::GraphError;
};

/// CP: measurements, contact and smoothness. SDF adds the intersection factor, QS adds the
/// quasi-static dynamics factor on top of SDF.
enum class GraphModel { CP, SDF, QS };

std::string toString(GraphModel model);
/// Accepts "CP", "SDF", "QS" (case-insensitive); throws std::invalid_argument otherwise.
GraphModel parseGraphModel(const std::string& name);

/// Noise of the graph factors. Measurement sigmas left unset are taken from the trajectory's
/// recorded corruption, and fall back to the defaults below for clean or unknown data.
struct GraphConfig {
  std::optional<double> objectTransSigma;  // m
  std::optional<double> objectRotSigma;    // rad
  std::optional<double> eeTransSigma;      // m
  std::optional<double> eeRotSigma;        // rad
  std::optional<double> contactSigma;      // m
  std::optional<double> forceSigma;        // N

  double fallbackTransSigma = 5e-3;
  double fallbackRotSigma = 0.05;
  double fallbackForceSigma = 0.5;

  double contactFactorSigma = 1e-3;       // m, C factors
  double intersectionSigma = 1e-3;        // m, S factor
  Vec3 velocitySigma{0.01, 0.01, 0.05};   // m/s, m/s, rad/s; variance scaled by the mean step
  double dynamicsSigma = 1e-5;            // D factor, SI products
  double gaugeInflation = 10.0;           // gauge prior sigma = inflation * measurement sigma
  double weakPriorSigma = 1e3;            // unobserved contact/force channels
};

struct MeasurementSigmas {
  double objectTrans = 0.0;
  double objectRot = 0.0;
  double eeTrans = 0.0;
  double eeRot = 0.0;
  double contact = 0.0;
  double force = 0.0;
};

MeasurementSigmas resolveMeasurementSigmas(const MeasuredTrajectory& traj, const GraphConfig& config);

/// Variables with their current values, the factors over them, and the subset of variables
/// held constant during optimization.
class FactorGraph {
 public:
  void add(FactorPtr factor) { factors_.push_back(std::move(factor)); }
  void add(const std::vector<FactorPtr>& factors) { factors_.insert(factors_.end(), factors.begin(), factors.end()); }
  const std::vector<FactorPtr>& factors() const { return factors_; }
  std::vector<FactorPtr>& factors() { return factors_; }
  std::size_t size() const { return factors_.size(); }

  Values& values() { return values_; }
  const Values& values() const { return values_; }

  void fix(const VariableKey& key) { fixed_.insert(key); }
  void unfix(const VariableKey& key) { fixed_.erase(key); }
  bool isFixed(const VariableKey& key) const { return fixed_.count(key) != 0; }
  const std::set<VariableKey>& fixedKeys() const { return fixed_; }

  /// Number of factors of the given kind.
  std::size_t count(FactorKind kind) const;
  /// Sum of squared whitened residuals at `values`.
  double cost(const Values& values) const;
  /// Throws GraphError if a factor references a key missing from `values`.
  void checkKeys(const Values& values) const;

 private:
  std::vector<FactorPtr> factors_;
  Values values_;
  std::set<VariableKey> fixed_;
};

/// Emits the factors and initial values of one timestep. Factors are attributed to the latest
/// timestep they touch, so adding timesteps in order yields exactly the batch graph.
class StepFactorGenerator {
 public:
  /// Throws EmptyTrajectory for fewer than two steps and MissingShapeConfig when shapes (or,
  /// for QS, limit-surface parameters) are absent.
  StepFactorGenerator(GraphModel model, const MeasuredTrajectory& traj, GraphConfig config = {});

  GraphModel model() const { return model_; }
  const MeasuredTrajectory& trajectory() const { return traj_; }
  const MeasurementSigmas& sigmas() const { return sigmas_; }
  const GraphConfig& config() const { return config_; }
  std::size_t size() const { return traj_.size(); }

  std::vector<FactorPtr> factorsFor(int t) const;

  /// Initial values for timestep t from its measurements; missing entries are extrapolated at
  /// constant velocity from `previous` (which must then hold timesteps t-1 and, if t >= 2, t-2).
  void initialize(int t, Values& previous) const;

  /// Values the t = 0 gauge priors are anchored at: the first available measurement of each
  /// variable.
  const Values& anchors() const { return anchors_; }

  NoiseModel objectNoise() const;
  NoiseModel eeNoise() const;
  /// Covariance of the 4-vector contact/force measurement.
  NoiseModel contactForceNoise() const;

 private:
  GraphModel model_;
  MeasuredTrajectory traj_;
  GraphConfig config_;
  MeasurementSigmas sigmas_;
  std::optional<Shape2D> objectShape_;
  std::optional<Shape2D> eeShape_;
  double c_ = 0.0;
  Values anchors_;
};

/// Full batch graph with initial values from the measurements.
FactorGraph buildGraph(GraphModel model, const MeasuredTrajectory& traj, const GraphConfig& config = {});

}  // namespace pushest
