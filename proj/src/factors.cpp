#include "pushest/factors.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace pushest {

std::string toString(const VariableKey& key) {
  const char* role = key.role == VariableRole::ObjectPose ? "x"
                     : key.role == VariableRole::EEPose   ? "e"
                                                          : "p";
  return std::string(role) + std::to_string(key.timestep);
}

std::string toString(FactorKind kind) {
  switch (kind) {
    case FactorKind::MeasurementPose: return "M_pose";
    case FactorKind::MeasurementContactForce: return "M_contactforce";
    case FactorKind::ObjectContact: return "C_objectcontact";
    case FactorKind::EEContact: return "C_eecontact";
    case FactorKind::ObjectEEContact: return "C_objee";
    case FactorKind::Intersection: return "S_intersection";
    case FactorKind::ConstVelocity: return "V_constvel";
    case FactorKind::QuasiStatic: return "D_quasistatic";
    case FactorKind::Prior: return "Prior";
    case FactorKind::LinearizedPrior: return "LinearizedPrior";
  }
  return "unknown";
}

const Value& Values::at(const VariableKey& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::out_of_range("no value for key " + toString(key));
  return it->second;
}

const PlanarPose& Values::pose(const VariableKey& key) const { return std::get<PlanarPose>(at(key)); }

const ContactForceState& Values::contactForce(const VariableKey& key) const {
  return std::get<ContactForceState>(at(key));
}

Value retractValue(const Value& value, const Eigen::VectorXd& delta) {
  if (const auto* pose = std::get_if<PlanarPose>(&value)) return pose->retract(delta.head<3>());
  return std::get<ContactForceState>(value).retract(delta.head<4>());
}

Eigen::VectorXd valueDifference(const Value& a, const Value& b) {
  if (const auto* pose = std::get_if<PlanarPose>(&a)) {
    return pose->localCoordinates(std::get<PlanarPose>(b));
  }
  return std::get<ContactForceState>(a).localCoordinates(std::get<ContactForceState>(b));
}

void Values::retract(const VariableKey& key, const Eigen::VectorXd& delta) {
  auto& v = values_.at(key);
  v = retractValue(v, delta);
}

NoiseModel::NoiseModel(const Eigen::MatrixXd& covariance) : covariance_(covariance) {
  if (covariance.rows() != covariance.cols() || covariance.rows() == 0) {
    throw std::invalid_argument("covariance must be square and non-empty");
  }
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("covariance is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("covariance is not positive definite");
  lower_ = llt.matrixL();
  if (covariance.isDiagonal(0.0)) invSigmas_ = lower_.diagonal().cwiseInverse();
}

NoiseModel NoiseModel::fromSigmas(const Eigen::VectorXd& sigmas) {
  return NoiseModel(Eigen::MatrixXd(sigmas.array().square().matrix().asDiagonal()));
}

NoiseModel NoiseModel::isotropic(int dim, double sigma) {
  return fromSigmas(Eigen::VectorXd::Constant(dim, sigma));
}

Eigen::MatrixXd NoiseModel::information() const {
  const Eigen::MatrixXd inv = lower_.triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd::Identity(dim(), dim()));
  return inv.transpose() * inv;
}

Eigen::VectorXd NoiseModel::whiten(const Eigen::VectorXd& r) const {
  if (invSigmas_.size() > 0) return invSigmas_.cwiseProduct(r);
  return lower_.triangularView<Eigen::Lower>().solve(r);
}

Eigen::MatrixXd NoiseModel::whiten(const Eigen::MatrixXd& jacobian) const {
  if (invSigmas_.size() > 0) return invSigmas_.asDiagonal() * jacobian;
  return lower_.triangularView<Eigen::Lower>().solve(jacobian);
}

Vec3 measurementResidual(const PlanarPose& state, const PlanarPose& measured) {
  return state.localCoordinates(measured);
}

Vec4 measurementResidual(const ContactForceState& state, const ContactForceState& measured) {
  return state.localCoordinates(measured);
}

Vec3 priorResidual(const PlanarPose& state, const PlanarPose& anchor) {
  return measurementResidual(state, anchor);
}

Vec4 priorResidual(const ContactForceState& state, const ContactForceState& anchor) {
  return measurementResidual(state, anchor);
}

Vec2 contactSurfaceResidual(const Shape2D& ownerShape, const PlanarPose& ownerPose, const Vec2& p) {
  return closestSurfacePoint(ownerShape, ownerPose, p) - p;
}

Vec2 objectEeGapResidual(const Shape2D& objShape, const PlanarPose& objPose, const Shape2D& eeShape,
                         const PlanarPose& eePose) {
  const DeepestPoint d = deepestPoint(objShape, objPose, eeShape, eePose);
  return d.projection - d.delta;
}

Vec2 intersectionResidual(const Shape2D& objShape, const PlanarPose& objPose, const Shape2D& eeShape,
                          const PlanarPose& eePose) {
  const auto pen = deepestPenetration(objShape, objPose, eeShape, eePose);
  if (!pen) return Vec2::Zero();
  return pen->gDelta - pen->delta;
}

namespace {

void checkTimestep(double dt) {
  if (!(dt > 0.0)) throw NonPositiveTimestep("timestep must be positive");
}

}  // namespace

Vec3 constVelocityResidual(const PlanarPose& a, const PlanarPose& b, const PlanarPose& c, double dt1,
                           double dt2) {
  checkTimestep(dt1);
  checkTimestep(dt2);
  return b.localCoordinates(a) / dt1 - c.localCoordinates(b) / dt2;
}

Vec2 quasiStaticResidual(const PlanarPose& xPrev, const PlanarPose& xCur, const ContactForceState& pf,
                         double c, double dt) {
  const Vec2 v = (xCur.translation() - xPrev.translation()) / dt;
  const double omega = angleDiff(xCur.theta(), xPrev.theta()) / dt;
  const double tau = cross2(pf.p - xCur.translation(), pf.f);
  return v * tau - c * c * omega * pf.f;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class PoseMeasurementFactor final : public Factor {
 public:
  PoseMeasurementFactor(const VariableKey& key, const PlanarPose& measured, NoiseModel noise,
                        FactorKind kind)
      : Factor(kind, {key}, std::move(noise)), measured_(measured) {}

  VectorXd evaluate(const Values& values, std::vector<MatrixXd>* jacobians) const override {
    if (jacobians) *jacobians = {MatrixXd::Identity(3, 3)};
    return measurementResidual(values.pose(keys()[0]), measured_);
  }

 private:
  PlanarPose measured_;
};

class ContactForceMeasurementFactor final : public Factor {
 public:
  ContactForceMeasurementFactor(const VariableKey& key, const ContactForceState& measured,
                                std::vector<int> rows, NoiseModel noise, FactorKind kind)
      : Factor(kind, {key}, std::move(noise)), measured_(measured), rows_(std::move(rows)) {}

  VectorXd evaluate(const Values& values, std::vector<MatrixXd>* jacobians) const override {
    const Vec4 full = measurementResidual(values.contactForce(keys()[0]), measured_);
    const int m = static_cast<int>(rows_.size());
    VectorXd r(m);
    MatrixXd j = MatrixXd::Zero(m, 4);
    for (int i = 0; i < m; ++i) {
      r(i) = full(rows_[i]);
      j(i, rows_[i]) = 1.0;
    }
    if (jacobians) *jacobians = {j};
    return r;
  }

 private:
  ContactForceState measured_;
  std::vector<int> rows_;
};

class SurfaceContactFactor final : public Factor {
 public:
  SurfaceContactFactor(FactorKind kind, const VariableKey& owner, const VariableKey& contact,
                       Shape2D shape, NoiseModel noise)
      : Factor(kind, {owner, contact}, std::move(noise)), shape_(std::move(shape)) {}

  VectorXd evaluate(const Values& values, std::vector<MatrixXd>* jacobians) const override {
    const PlanarPose& owner = values.pose(keys()[0]);
    const Vec2 p = values.contactForce(keys()[1]).p;
    const SurfaceProjection proj = projectOntoSurface(shape_, owner, p);
    if (jacobians) {
      MatrixXd jc = MatrixXd::Zero(2, 4);
      jc.leftCols(2) = proj.dPoint_dQuery - Mat2::Identity();
      *jacobians = {MatrixXd(proj.dPoint_dPose), jc};
    }
    return proj.point - p;
  }

 private:
  Shape2D shape_;
};

class ObjectEeFactor final : public Factor {
 public:
  ObjectEeFactor(FactorKind kind, const VariableKey& obj, const VariableKey& ee, Shape2D objShape,
                 Shape2D eeShape, NoiseModel noise)
      : Factor(kind, {obj, ee}, std::move(noise)),
        objShape_(std::move(objShape)),
        eeShape_(std::move(eeShape)) {}

  VectorXd evaluate(const Values& values, std::vector<MatrixXd>* jacobians) const override {
    const PlanarPose& x = values.pose(keys()[0]);
    const PlanarPose& e = values.pose(keys()[1]);
    if (kind() == FactorKind::Intersection && !shapesOverlap(objShape_, x, eeShape_, e)) {
      if (jacobians) *jacobians = {MatrixXd::Zero(2, 3), MatrixXd::Zero(2, 3)};
      return Vec2::Zero();
    }
    const DeepestPoint d = deepestPoint(objShape_, x, eeShape_, e);
    if (jacobians) {
      *jacobians = {MatrixXd(d.dProjection_dObject - d.dDelta_dObject),
                    MatrixXd(d.dProjection_dEe - d.dDelta_dEe)};
    }
    return d.projection - d.delta;
  }

 private:
  Shape2D objShape_;
  Shape2D eeShape_;
};

class ConstVelocityFactor final : public Factor {
 public:
  ConstVelocityFactor(const VariableKey& a, const VariableKey& b, const VariableKey& c, double dt1,
                      double dt2, NoiseModel noise)
      : Factor(FactorKind::ConstVelocity, {a, b, c}, std::move(noise)), dt1_(dt1), dt2_(dt2) {
    checkTimestep(dt1);
    checkTimestep(dt2);
  }

  VectorXd evaluate(const Values& values, std::vector<MatrixXd>* jacobians) const override {
    if (jacobians) {
      const MatrixXd i3 = MatrixXd::Identity(3, 3);
      *jacobians = {-i3 / dt1_, i3 / dt1_ + i3 / dt2_, -i3 / dt2_};
    }
    return constVelocityResidual(values.pose(keys()[0]), values.pose(keys()[1]),
                                 values.pose(keys()[2]), dt1_, dt2_);
  }

 private:
  double dt1_;
  double dt2_;
};

class QuasiStaticFactor final : public Factor {
 public:
  QuasiStaticFactor(const VariableKey& xPrev, const VariableKey& xCur, const VariableKey& contact,
                    double c, double dt, NoiseModel noise)
      : Factor(FactorKind::QuasiStatic, {xPrev, xCur, contact}, std::move(noise)), c_(c), dt_(dt) {
    checkTimestep(dt);
    if (!(c > 0.0)) throw std::invalid_argument("limit-surface ratio c must be positive");
  }

  VectorXd evaluate(const Values& values, std::vector<MatrixXd>* jacobians) const override {
    const PlanarPose& prev = values.pose(keys()[0]);
    const PlanarPose& cur = values.pose(keys()[1]);
    const ContactForceState& pf = values.contactForce(keys()[2]);
    if (jacobians) {
      const Vec2 v = (cur.translation() - prev.translation()) / dt_;
      const double omega = angleDiff(cur.theta(), prev.theta()) / dt_;
      const Vec2 arm = pf.p - cur.translation();
      const double tau = cross2(arm, pf.f);
      const double c2 = c_ * c_;
      // d tau / d p = (f_y, -f_x); d tau / d f = perp(arm).
      const Vec2 dTauDp(pf.f.y(), -pf.f.x());

      MatrixXd jPrev(2, 3);
      jPrev.leftCols(2) = -tau / dt_ * Mat2::Identity();
      jPrev.col(2) = c2 * pf.f / dt_;

      MatrixXd jCur(2, 3);
      jCur.leftCols(2) = tau / dt_ * Mat2::Identity() - v * dTauDp.transpose();
      jCur.col(2) = -c2 * pf.f / dt_;

      MatrixXd jContact(2, 4);
      jContact.leftCols(2) = v * dTauDp.transpose();
      jContact.rightCols(2) = v * perp(arm).transpose() - c2 * omega * Mat2::Identity();
      *jacobians = {jPrev, jCur, jContact};
    }
    return quasiStaticResidual(prev, cur, pf, c_, dt_);
  }

 private:
  double c_;
  double dt_;
};

class LinearizedPriorFactor final : public Factor {
 public:
  LinearizedPriorFactor(std::vector<VariableKey> keys, std::vector<Value> point, MatrixXd sqrtInfo,
                        VectorXd offset)
      : Factor(FactorKind::LinearizedPrior, std::move(keys),
               NoiseModel::unit(static_cast<int>(sqrtInfo.rows()))),
        point_(std::move(point)),
        sqrtInfo_(std::move(sqrtInfo)),
        offset_(std::move(offset)) {}

  VectorXd evaluate(const Values& values, std::vector<MatrixXd>* jacobians) const override {
    VectorXd delta(sqrtInfo_.cols());
    int col = 0;
    if (jacobians) jacobians->clear();
    for (std::size_t i = 0; i < keys().size(); ++i) {
      const int d = dimOf(keys()[i].role);
      delta.segment(col, d) = valueDifference(values.at(keys()[i]), point_[i]);
      if (jacobians) jacobians->push_back(sqrtInfo_.middleCols(col, d));
      col += d;
    }
    return sqrtInfo_ * delta + offset_;
  }

 private:
  std::vector<Value> point_;
  MatrixXd sqrtInfo_;
  VectorXd offset_;
};

}  // namespace

std::vector<Eigen::MatrixXd> numericJacobian(const Factor& factor, const Values& values, double step) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& key : factor.keys()) {
    const int d = dimOf(key.role);
    Eigen::MatrixXd j(factor.dim(), d);
    for (int k = 0; k < d; ++k) {
      Eigen::VectorXd delta = Eigen::VectorXd::Zero(d);
      delta(k) = step;
      Values plus = values;
      Values minus = values;
      plus.retract(key, delta);
      minus.retract(key, -delta);
      j.col(k) = (factor.evaluate(plus) - factor.evaluate(minus)) / (2.0 * step);
    }
    out.push_back(std::move(j));
  }
  return out;
}

FactorPtr makePoseMeasurement(const VariableKey& key, const PlanarPose& measured, NoiseModel noise,
                              FactorKind kind) {
  return std::make_shared<PoseMeasurementFactor>(key, measured, std::move(noise), kind);
}

FactorPtr makeContactForceMeasurement(const VariableKey& key, const ContactForceState& measured,
                                      bool hasPoint, bool hasForce, const NoiseModel& noise,
                                      FactorKind kind) {
  std::vector<int> rows;
  if (hasPoint) rows.insert(rows.end(), {0, 1});
  if (hasForce) rows.insert(rows.end(), {2, 3});
  if (rows.empty()) throw std::invalid_argument("contact/force measurement has no channels");
  Eigen::MatrixXd cov(rows.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.size(); ++j) cov(i, j) = noise.covariance()(rows[i], rows[j]);
  }
  return std::make_shared<ContactForceMeasurementFactor>(key, measured, std::move(rows),
                                                         NoiseModel(cov), kind);
}

FactorPtr makeSurfaceContact(const VariableKey& ownerPose, const VariableKey& contact, Shape2D shape,
                             NoiseModel noise) {
  const FactorKind kind =
      ownerPose.role == VariableRole::ObjectPose ? FactorKind::ObjectContact : FactorKind::EEContact;
  return std::make_shared<SurfaceContactFactor>(kind, ownerPose, contact, std::move(shape),
                                                std::move(noise));
}

FactorPtr makeObjectEeContact(const VariableKey& objectPose, const VariableKey& eePose, Shape2D objShape,
                              Shape2D eeShape, NoiseModel noise) {
  return std::make_shared<ObjectEeFactor>(FactorKind::ObjectEEContact, objectPose, eePose,
                                          std::move(objShape), std::move(eeShape), std::move(noise));
}

FactorPtr makeIntersection(const VariableKey& objectPose, const VariableKey& eePose, Shape2D objShape,
                           Shape2D eeShape, NoiseModel noise) {
  return std::make_shared<ObjectEeFactor>(FactorKind::Intersection, objectPose, eePose,
                                          std::move(objShape), std::move(eeShape), std::move(noise));
}

FactorPtr makeConstVelocity(const VariableKey& a, const VariableKey& b, const VariableKey& c, double dt1,
                            double dt2, NoiseModel noise) {
  return std::make_shared<ConstVelocityFactor>(a, b, c, dt1, dt2, std::move(noise));
}

FactorPtr makeQuasiStatic(const VariableKey& xPrev, const VariableKey& xCur, const VariableKey& contact,
                          double c, double dt, NoiseModel noise) {
  return std::make_shared<QuasiStaticFactor>(xPrev, xCur, contact, c, dt, std::move(noise));
}

FactorPtr makeLinearizedPrior(std::vector<VariableKey> keys, std::vector<Value> linearizationPoint,
                              Eigen::MatrixXd sqrtInformation, Eigen::VectorXd offset) {
  return std::make_shared<LinearizedPriorFactor>(std::move(keys), std::move(linearizationPoint),
                                                 std::move(sqrtInformation), std::move(offset));
}

}  // namespace pushest
