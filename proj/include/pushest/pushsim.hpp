#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pushest/geometry.hpp"

namespace pushest {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateShape : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

class NoSolution : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

class NonConvergence : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

class ContactLost : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

enum class PressureModel { Uniform };

/// Ellipsoidal limit-surface constants of a pushed object.
struct PushParams {
  double muS = 0.5;
  double mass = 1.0;
  double gravity = 9.81;
  double fMax = 0.0;    // mu_s * m * g
  double tauMax = 0.0;  // mu_s * m * g * mean |r_CM| over the support area
  double c = 0.0;       // tauMax / fMax
  PressureModel pressure = PressureModel::Uniform;
};

/// Mean distance from the centroid over the shape's area; closed form for discs and
/// adaptive Simpson quadrature over each centroid-edge triangle for polygons.
double meanRadialDistance(const Shape2D& shape);

/// Throws DegenerateShape for zero-area shapes.
PushParams limitSurfaceConstants(const Shape2D& shape, double muS, double mass, double gravity = 9.81);

/// Object, end-effector and mechanics of one pushing problem.
struct PushScene {
  Shape2D object;
  Shape2D ee;
  PushParams params;
};

/// World-frame planar twist of the end-effector origin.
struct PlanarTwist {
  Vec2 linear = Vec2::Zero();
  double angular = 0.0;
};

struct StepResult {
  PlanarPose object;
  PlanarPose ee;
  Vec2 contact = Vec2::Zero();
  Vec2 force = Vec2::Zero();
  double torque = 0.0;
  bool moving = false;
};

/// Instantaneous quasi-static response at a sticking contact: object twist (about the CM,
/// world frame) and the load on the limit-surface ellipsoid for the given pusher velocity.
struct QuasiStaticResponse {
  Vec2 velocity = Vec2::Zero();
  double omega = 0.0;
  Vec2 force = Vec2::Zero();
  double torque = 0.0;
};

QuasiStaticResponse instantaneousResponse(const PushParams& params, const PlanarPose& objPose,
                                          const Vec2& contact, const Vec2& pusherVelocity);

/// Advances the object over one step of the pusher from `eeStart` to `eeEnd`.
///
/// The end pose is found by Newton iteration on three conditions: the finite-difference
/// object twist satisfies limit-surface normality about the end-of-step contact, the two
/// bodies touch at the end of the step, and the contact does not slip tangentially. The
/// force is the ellipsoid load parallel to the resulting motion. This is a first-order
/// implicit scheme; every accepted transition has a zero quasi-static residual to solver
/// precision. Throws ContactLost when the pusher would have to pull the object.
StepResult stepPush(const PushScene& scene, const PlanarPose& objPose, const PlanarPose& eeStart,
                    const PlanarPose& eeEnd, double dt);

/// Single step driven by a constant end-effector twist; `contact` must lie on both surfaces.
StepResult quasiStaticStep(const PushScene& scene, const PlanarPose& objPose, const PlanarPose& eePose,
                           const PlanarTwist& eeMotion, const Vec2& contact, double dt);

struct GroundTruthStep {
  double t = 0.0;
  PlanarPose object;
  PlanarPose ee;
  Vec2 contact = Vec2::Zero();
  Vec2 force = Vec2::Zero();
};

struct GroundTruthTrajectory {
  PushScene scene;
  std::vector<GroundTruthStep> steps;
  bool truncated = false;
  std::string truncationReason;
};

/// Shifts an end-effector path along its initial direction of motion so that the
/// end-effector touches the object at the first sample. Throws NoSolution if the path
/// never reaches the object.
std::vector<PlanarPose> resolveInitialContact(const PushScene& scene, const PlanarPose& objInit,
                                              std::vector<PlanarPose> eePath);

/// Simulates a push with the end-effector following `eePath` (one pose per dt). Only disc
/// end-effectors are supported. Losing contact truncates the trajectory and sets the flag.
GroundTruthTrajectory simulatePush(const std::vector<PlanarPose>& eePath, const PlanarPose& objInit,
                                   const PushScene& scene, double dt);

enum class PathKind { Straight, Arc, RandomCurvature };

struct PusherPathSpec {
  PathKind kind = PathKind::Straight;
  double speed = 0.06;      // m/s
  double duration = 10.0;   // s
  double dt = 0.04;         // s
  double curvature = 0.0;   // 1/m, Arc only
  double maxCurvature = 2.0;  // 1/m, RandomCurvature amplitude bound
  std::uint64_t seed = 0;   // RandomCurvature only
};

/// Number of samples round(duration / dt).
int pathSampleCount(const PusherPathSpec& spec);

/// End-effector poses at t_i = i * dt starting from `start`, heading = direction of travel.
std::vector<PlanarPose> generatePusherPath(const PlanarPose& start, const PusherPathSpec& spec);

/// Closed-loop pusher: each step the end-effector heads at the object's centroid rotated by an
/// offset angle beta(s) of the travelled arc length s. Straight: beta = 0 (pure translation);
/// Arc: beta = constant `bias`; RandomCurvature: a seeded sum of three sinusoids bounded by
/// `maxOffset`. Keeping the push line near the centroid prevents the sticking contact from
/// turning into a pull.
struct SteeredPushSpec {
  PathKind kind = PathKind::Straight;
  double speed = 0.06;      // m/s
  double duration = 10.0;   // s
  double dt = 0.04;         // s
  double bias = 0.2;        // rad, Arc only
  double maxOffset = 0.35;  // rad, RandomCurvature only
  std::uint64_t seed = 0;
};

/// Offset angle beta(s) of the steering law.
double steeringOffset(const SteeredPushSpec& spec, double arcLength);

/// Starts the end-effector touching the object on the side opposite `approachDirection` and
/// steers it for round(duration / dt) samples. The returned end-effector poses replayed through
/// simulatePush reproduce the trajectory.
GroundTruthTrajectory simulateSteeredPush(const PushScene& scene, const PlanarPose& objInit,
                                          const Vec2& approachDirection, const SteeredPushSpec& spec);

}  // namespace pushest
