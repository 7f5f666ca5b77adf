#pragma once

#include <compare>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "pushest/geometry.hpp"

namespace pushest {

using Vec4 = Eigen::Vector4d;

class NonPositiveTimestep : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Combined contact point p and applied planar force f of one timestep.
struct ContactForceState {
  Vec2 p = Vec2::Zero();
  Vec2 f = Vec2::Zero();

  Vec4 vector() const { return {p.x(), p.y(), f.x(), f.y()}; }
  static ContactForceState fromVector(const Vec4& v) { return {v.head<2>(), v.tail<2>()}; }
  ContactForceState retract(const Vec4& delta) const { return fromVector(vector() + delta); }
  Vec4 localCoordinates(const ContactForceState& other) const { return vector() - other.vector(); }
};

enum class VariableRole : int { ObjectPose = 0, EEPose = 1, ContactForce = 2 };

/// Ordered by timestep first so that map order is the elimination order.
struct VariableKey {
  VariableRole role = VariableRole::ObjectPose;
  int timestep = 0;

  friend auto operator<=>(const VariableKey& a, const VariableKey& b) {
    if (auto c = a.timestep <=> b.timestep; c != 0) return c;
    return static_cast<int>(a.role) <=> static_cast<int>(b.role);
  }
  friend bool operator==(const VariableKey&, const VariableKey&) = default;
};

inline VariableKey objectKey(int t) { return {VariableRole::ObjectPose, t}; }
inline VariableKey eeKey(int t) { return {VariableRole::EEPose, t}; }
inline VariableKey contactKey(int t) { return {VariableRole::ContactForce, t}; }

inline int dimOf(VariableRole role) { return role == VariableRole::ContactForce ? 4 : 3; }
std::string toString(const VariableKey& key);

using Value = std::variant<PlanarPose, ContactForceState>;

/// Manifold values keyed by variable.
class Values {
 public:
  void insert(const VariableKey& key, const Value& value) { values_.insert_or_assign(key, value); }
  bool contains(const VariableKey& key) const { return values_.count(key) != 0; }
  void erase(const VariableKey& key) { values_.erase(key); }
  std::size_t size() const { return values_.size(); }

  const Value& at(const VariableKey& key) const;
  const PlanarPose& pose(const VariableKey& key) const;
  const ContactForceState& contactForce(const VariableKey& key) const;

  /// Applies the per-variable update `delta` (size dimOf(key.role)).
  void retract(const VariableKey& key, const Eigen::VectorXd& delta);

  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

 private:
  std::map<VariableKey, Value> values_;
};

Value retractValue(const Value& value, const Eigen::VectorXd& delta);
Eigen::VectorXd valueDifference(const Value& a, const Value& b);

/// Gaussian noise with covariance Sigma; whitening multiplies by L^-1 where Sigma = L L^T.
class NoiseModel {
 public:
  NoiseModel() = default;
  /// Throws std::invalid_argument unless `covariance` is symmetric and positive definite.
  explicit NoiseModel(const Eigen::MatrixXd& covariance);
  static NoiseModel fromSigmas(const Eigen::VectorXd& sigmas);
  static NoiseModel isotropic(int dim, double sigma);
  static NoiseModel unit(int dim) { return isotropic(dim, 1.0); }

  int dim() const { return static_cast<int>(covariance_.rows()); }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  Eigen::MatrixXd information() const;
  NoiseModel scaled(double covarianceFactor) const { return NoiseModel(covariance_ * covarianceFactor); }

  Eigen::VectorXd whiten(const Eigen::VectorXd& r) const;
  Eigen::MatrixXd whiten(const Eigen::MatrixXd& jacobian) const;

 private:
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd lower_;
  Eigen::VectorXd invSigmas_;  // set for diagonal covariances
};

// Residual functions. All measurement-style residuals are state - measured.

Vec3 measurementResidual(const PlanarPose& state, const PlanarPose& measured);
Vec4 measurementResidual(const ContactForceState& state, const ContactForceState& measured);
/// Gauge prior residual: state - anchor.
Vec3 priorResidual(const PlanarPose& state, const PlanarPose& anchor);
Vec4 priorResidual(const ContactForceState& state, const ContactForceState& anchor);

/// G(shape(pose), p) - p.
Vec2 contactSurfaceResidual(const Shape2D& ownerShape, const PlanarPose& ownerPose, const Vec2& p);

/// Gap between the object surface and the end-effector surface: G(obj, delta) - delta where
/// delta is the end-effector boundary point nearest to (or deepest inside) the object.
Vec2 objectEeGapResidual(const Shape2D& objShape, const PlanarPose& objPose, const Shape2D& eeShape,
                         const PlanarPose& eePose);

/// G_delta - delta when the shapes overlap, zero otherwise.
Vec2 intersectionResidual(const Shape2D& objShape, const PlanarPose& objPose, const Shape2D& eeShape,
                          const PlanarPose& eePose);

/// (b - a)/dt1 - (c - b)/dt2 per coordinate, headings by shortest arc.
Vec3 constVelocityResidual(const PlanarPose& a, const PlanarPose& b, const PlanarPose& c, double dt1,
                           double dt2);

/// Limit-surface normality in cross-multiplied form: v * tau - c^2 * omega * f, with
/// tau = (p - CM) x f about the current object origin.
Vec2 quasiStaticResidual(const PlanarPose& xPrev, const PlanarPose& xCur, const ContactForceState& pf,
                         double c, double dt);

enum class FactorKind {
  MeasurementPose,
  MeasurementContactForce,
  ObjectContact,
  EEContact,
  ObjectEEContact,
  Intersection,
  ConstVelocity,
  QuasiStatic,
  Prior,
  LinearizedPrior,
};

std::string toString(FactorKind kind);

/// Residual with analytic Jacobians, one block per key.
class Factor {
 public:
  Factor(FactorKind kind, std::vector<VariableKey> keys, NoiseModel noise)
      : kind_(kind), keys_(std::move(keys)), noise_(std::move(noise)) {}
  virtual ~Factor() = default;

  FactorKind kind() const { return kind_; }
  const std::vector<VariableKey>& keys() const { return keys_; }
  const NoiseModel& noise() const { return noise_; }
  int dim() const { return noise_.dim(); }

  virtual Eigen::VectorXd evaluate(const Values& values,
                                   std::vector<Eigen::MatrixXd>* jacobians = nullptr) const = 0;

  Eigen::VectorXd whitenedError(const Values& values) const { return noise_.whiten(evaluate(values)); }
  /// r^T Sigma^-1 r.
  double cost(const Values& values) const { return whitenedError(values).squaredNorm(); }

 private:
  FactorKind kind_;
  std::vector<VariableKey> keys_;
  NoiseModel noise_;
};

using FactorPtr = std::shared_ptr<const Factor>;

/// Central finite differences with step 1e-6 in each local coordinate.
std::vector<Eigen::MatrixXd> numericJacobian(const Factor& factor, const Values& values,
                                             double step = 1e-6);

/// Pose measurement (or pose prior when `kind` is Prior).
FactorPtr makePoseMeasurement(const VariableKey& key, const PlanarPose& measured, NoiseModel noise,
                              FactorKind kind = FactorKind::MeasurementPose);

/// Contact/force measurement restricted to the measured channels. `noise` covers the full
/// 4-vector; rows of unmeasured channels are dropped.
FactorPtr makeContactForceMeasurement(const VariableKey& key, const ContactForceState& measured,
                                      bool hasPoint, bool hasForce, const NoiseModel& noise,
                                      FactorKind kind = FactorKind::MeasurementContactForce);

/// Contact point on the surface of the object (ObjectContact) or end-effector (EEContact).
FactorPtr makeSurfaceContact(const VariableKey& ownerPose, const VariableKey& contact, Shape2D shape,
                             NoiseModel noise);

FactorPtr makeObjectEeContact(const VariableKey& objectPose, const VariableKey& eePose, Shape2D objShape,
                              Shape2D eeShape, NoiseModel noise);

FactorPtr makeIntersection(const VariableKey& objectPose, const VariableKey& eePose, Shape2D objShape,
                           Shape2D eeShape, NoiseModel noise);

/// Throws NonPositiveTimestep unless dt1, dt2 > 0.
FactorPtr makeConstVelocity(const VariableKey& a, const VariableKey& b, const VariableKey& c, double dt1,
                            double dt2, NoiseModel noise);

FactorPtr makeQuasiStatic(const VariableKey& xPrev, const VariableKey& xCur, const VariableKey& contact,
                          double c, double dt, NoiseModel noise);

/// Whitened linear prior r = R * (x - linearizationPoint) + d over several variables; used for
/// the marginalized window boundary of the fixed-lag smoother.
FactorPtr makeLinearizedPrior(std::vector<VariableKey> keys, std::vector<Value> linearizationPoint,
                              Eigen::MatrixXd sqrtInformation, Eigen::VectorXd offset);

}  // namespace pushest
