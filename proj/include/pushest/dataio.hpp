#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "pushest/factors.hpp"
#include "pushest/geometry.hpp"
#include "pushest/pushsim.hpp"

namespace pushest {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ParseError : public DataError {
 public:
  using DataError::DataError;
};
class SchemaVersionError : public DataError {
 public:
  using DataError::DataError;
};
class NonMonotonicTimestamps : public DataError {
 public:
  using DataError::DataError;
};
class LengthMismatch : public DataError {
 public:
  using DataError::DataError;
};
class IoError : public DataError {
 public:
  using DataError::DataError;
};

inline constexpr int kSchemaVersion = 1;

/// A pose measurement either already planar or a full 3-D pose to be projected.
using PoseMeasurement = std::variant<PlanarPose, Pose3>;

struct MeasuredStep {
  double t = 0.0;
  std::optional<PoseMeasurement> y;      // object pose
  std::optional<PoseMeasurement> z;      // end-effector pose
  std::optional<Vec2> w;                 // contact point
  std::optional<Eigen::VectorXd> alpha;  // force, 2 or 3 components; only x/y are used
  bool inContact = true;                 // false drops contact and dynamics factors
  std::optional<GroundTruthStep> truth;
};

enum class NoiseKind { Gaussian, BimodalTriangular };

enum class NoiseChannel : int {
  ObjectTranslation = 0,
  ObjectRotation,
  EETranslation,
  EERotation,
  Contact,
  Force,
};
inline constexpr int kNoiseChannels = 6;
std::string toString(NoiseChannel channel);

/// Per-channel corruption. Units are SI (m, rad, N).
struct ChannelNoise {
  bool enabled = false;
  double sigma = 0.0;      // Gaussian std
  double mode = 0.0;       // bimodal: modes at +/- mode
  double halfWidth = 0.0;  // bimodal: triangle half-width
};

struct NoiseSpec {
  NoiseKind kind = NoiseKind::Gaussian;
  std::array<ChannelNoise, kNoiseChannels> channels{};
  std::uint64_t seed = 0;

  ChannelNoise& channel(NoiseChannel c) { return channels[static_cast<int>(c)]; }
  const ChannelNoise& channel(NoiseChannel c) const { return channels[static_cast<int>(c)]; }
  /// Standard deviation of the per-component error distribution of a channel.
  double effectiveStd(NoiseChannel c) const;

  static NoiseSpec gaussian(double transSigma, double rotSigma, double contactSigma, double forceSigma,
                            std::uint64_t seed);
  /// Bimodal corruption on contact and force only, modes/half-widths in SI units.
  static NoiseSpec bimodalContactForce(double contactMode, double contactHalfWidth, double forceMode,
                                       double forceHalfWidth, std::uint64_t seed);
};

/// One draw from the 50/50 mixture of triangular densities centred at +/- mode.
template <typename Rng>
double sampleBimodalTriangular(Rng& rng, double mode, double halfWidth);

struct MeasuredTrajectory {
  Plane3 plane;
  std::optional<Shape2D> objectShape;
  std::optional<Shape2D> eeShape;
  std::optional<PushParams> params;
  std::vector<MeasuredStep> steps;
  /// Corruption applied to the measurements, if any; used for default measurement noise.
  std::optional<NoiseSpec> noise;
  /// Effective configuration of the run that produced the file.
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t size() const { return steps.size(); }
  std::optional<PlanarPose> objectMeasurement(std::size_t i) const;
  std::optional<PlanarPose> eeMeasurement(std::size_t i) const;
  bool hasGroundTruth() const;
  std::vector<GroundTruthStep> groundTruth() const;
};

/// Validates timestamps and that at least one stream is present.
void validate(const MeasuredTrajectory& traj);

/// Noiseless measurements equal to the ground truth, which is embedded alongside.
MeasuredTrajectory measuredFromGroundTruth(const GroundTruthTrajectory& gt,
                                           const Plane3& plane = Plane3::xyPlane());

nlohmann::json toJson(const MeasuredTrajectory& traj);
MeasuredTrajectory fromJson(const nlohmann::json& j);
nlohmann::json toJson(const Shape2D& shape);
Shape2D shapeFromJson(const nlohmann::json& j);
nlohmann::json toJson(const NoiseSpec& spec);
NoiseSpec noiseSpecFromJson(const nlohmann::json& j);

/// Serialized text; identical inputs give byte-identical output.
std::string dumpTrajectory(const MeasuredTrajectory& traj);
void saveTrajectory(const MeasuredTrajectory& traj, const std::filesystem::path& path);
MeasuredTrajectory loadTrajectory(const std::filesystem::path& path);

/// Imports an MIT-pushing-style log: {"tip_pose": rows, "object_pose": rows, "ft_wrench": rows}
/// where pose rows are [t, x, y, yaw] or [t, x, y, z, qw, qx, qy, qz] and wrench rows are
/// [t, fx, fy, ...]. The tip clock is the master clock; other streams are matched to the
/// nearest sample within half a tip period and otherwise marked missing.
MeasuredTrajectory importMitLog(const nlohmann::json& log, const Shape2D& objectShape,
                                const Shape2D& eeShape, const PushParams& params,
                                const Plane3& plane = Plane3::xyPlane());

/// Adds noise to every present measurement. Pose measurements are projected to the plane
/// first and headings re-wrapped. Deterministic per seed.
MeasuredTrajectory injectNoise(const MeasuredTrajectory& traj, const NoiseSpec& spec);

enum class OcclusionChannel { Object, EE, Contact, Force };

/// Marks measurements missing for step indices in [round(begin*N), round(end*N)).
MeasuredTrajectory applyOcclusion(const MeasuredTrajectory& traj, double begin, double end,
                                  const std::vector<OcclusionChannel>& channels = {OcclusionChannel::Object});

/// Estimated (or measured) state per timestep; absent entries are skipped by the metrics.
struct StateSample {
  double t = 0.0;
  std::optional<PlanarPose> object;
  std::optional<PlanarPose> ee;
  std::optional<Vec2> contact;
  std::optional<Vec2> force;
};

/// Raw measurements as state samples (projected to the plane).
std::vector<StateSample> measurementSamples(const MeasuredTrajectory& traj);

struct ChannelStats {
  double rmse = 0.0;
  double mae = 0.0;
  double sigma = 0.0;  // std of the error magnitudes
  std::size_t count = 0;
};

/// Errors in reporting units: translations and contact in cm, rotations in rad, force
/// magnitude in N, force direction in degrees.
struct Metrics {
  ChannelStats objectTranslation;
  ChannelStats objectRotation;
  ChannelStats eeTranslation;
  ChannelStats eeRotation;
  ChannelStats contact;
  ChannelStats forceMagnitude;
  ChannelStats forceDirection;
};

inline constexpr double kInMotionSpeed = 1e-4;  // m/s

ChannelStats summarize(const std::vector<double>& errors);

/// Object-pose errors only count steps where the true object speed exceeds kInMotionSpeed.
Metrics computeMetrics(const std::vector<StateSample>& estimate, const std::vector<GroundTruthStep>& truth);

/// Marginal covariance blocks of one timestep.
struct StateCovariance {
  Eigen::Matrix3d object = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d ee = Eigen::Matrix3d::Zero();
  Eigen::Matrix4d contactForce = Eigen::Matrix4d::Zero();
};

/// Two-sigma ellipse of a 2x2 covariance: semi-axes 2*sqrt(eigenvalues), major-axis angle.
struct Ellipse2Sigma {
  double major = 0.0;
  double minor = 0.0;
  double angle = 0.0;
};
Ellipse2Sigma twoSigmaEllipse(const Mat2& covariance);

std::vector<std::string> resultColumns();

/// CSV with '#'-prefixed header lines (provenance), a column-name line and one row per step.
std::string resultsCsv(const std::vector<StateSample>& estimate,
                       const std::optional<std::vector<StateCovariance>>& covariances,
                       const nlohmann::json& provenance = {});
void exportResults(const std::vector<StateSample>& estimate,
                   const std::optional<std::vector<StateCovariance>>& covariances,
                   const std::filesystem::path& path, const nlohmann::json& provenance = {});

struct ResultsTable {
  std::vector<std::string> headerLines;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};
ResultsTable readResults(const std::filesystem::path& path);

/// Shortest round-trip decimal representation used by every text writer.
std::string formatDouble(double value);

}  // namespace pushest

#include "pushest/dataio_impl.hpp"
