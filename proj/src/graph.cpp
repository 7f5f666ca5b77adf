#include "pushest/graph.hpp"

#include <algorithm>
#include <cctype>

namespace pushest {

std::string toString(GraphModel model) {
  switch (model) {
    case GraphModel::CP: return "CP";
    case GraphModel::SDF: return "SDF";
    case GraphModel::QS: return "QS";
  }
  return "?";
}

GraphModel parseGraphModel(const std::string& name) {
  std::string upper = name;
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  if (upper == "CP") return GraphModel::CP;
  if (upper == "SDF") return GraphModel::SDF;
  if (upper == "QS") return GraphModel::QS;
  throw std::invalid_argument("unknown graph model '" + name + "' (expected CP, SDF or QS)");
}

MeasurementSigmas resolveMeasurementSigmas(const MeasuredTrajectory& traj, const GraphConfig& config) {
  auto pick = [&](const std::optional<double>& override, NoiseChannel channel, double fallback) {
    if (override) {
      if (!(*override > 0.0)) throw std::invalid_argument("measurement sigma must be positive");
      return *override;
    }
    if (traj.noise) {
      const double s = traj.noise->effectiveStd(channel);
      if (s > 0.0) return s;
    }
    return fallback;
  };
  MeasurementSigmas s;
  s.objectTrans = pick(config.objectTransSigma, NoiseChannel::ObjectTranslation, config.fallbackTransSigma);
  s.objectRot = pick(config.objectRotSigma, NoiseChannel::ObjectRotation, config.fallbackRotSigma);
  s.eeTrans = pick(config.eeTransSigma, NoiseChannel::EETranslation, config.fallbackTransSigma);
  s.eeRot = pick(config.eeRotSigma, NoiseChannel::EERotation, config.fallbackRotSigma);
  s.contact = pick(config.contactSigma, NoiseChannel::Contact, config.fallbackTransSigma);
  s.force = pick(config.forceSigma, NoiseChannel::Force, config.fallbackForceSigma);
  return s;
}

std::size_t FactorGraph::count(FactorKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(factors_.begin(), factors_.end(), [&](const FactorPtr& f) { return f->kind() == kind; }));
}

double FactorGraph::cost(const Values& values) const {
  double total = 0.0;
  for (const auto& f : factors_) total += f->cost(values);
  return total;
}

void FactorGraph::checkKeys(const Values& values) const {
  for (const auto& f : factors_) {
    for (const auto& k : f->keys()) {
      if (!values.contains(k)) {
        throw GraphError(toString(f->kind()) + " factor references missing variable " + toString(k));
      }
    }
  }
}

StepFactorGenerator::StepFactorGenerator(GraphModel model, const MeasuredTrajectory& traj, GraphConfig config)
    : model_(model), traj_(traj), config_(std::move(config)) {
  if (traj_.size() < 2) throw EmptyTrajectory("trajectory needs at least two timesteps");
  if (!traj_.objectShape || !traj_.eeShape) throw MissingShapeConfig("object and end-effector shapes are required");
  objectShape_ = traj_.objectShape;
  eeShape_ = traj_.eeShape;
  if (model_ == GraphModel::QS) {
    if (!traj_.params) throw MissingShapeConfig("the QS model needs limit-surface parameters");
    c_ = traj_.params->c;
  }
  sigmas_ = resolveMeasurementSigmas(traj_, config_);

  std::optional<PlanarPose> x0, e0;
  std::optional<Vec2> w0, f0;
  for (std::size_t i = 0; i < traj_.size(); ++i) {
    if (!x0) x0 = traj_.objectMeasurement(i);
    if (!e0) e0 = traj_.eeMeasurement(i);
    if (!w0) w0 = traj_.steps[i].w;
    if (!f0 && traj_.steps[i].alpha) f0 = Vec2(traj_.steps[i].alpha->head<2>());
  }
  anchors_.insert(objectKey(0), x0.value_or(PlanarPose()));
  anchors_.insert(eeKey(0), e0.value_or(PlanarPose()));
  const Vec2 p0 = w0 ? *w0
                     : closestSurfacePoint(*eeShape_, anchors_.pose(eeKey(0)),
                                           anchors_.pose(objectKey(0)).translation());
  anchors_.insert(contactKey(0), ContactForceState{p0, f0.value_or(Vec2::Zero())});
}

NoiseModel StepFactorGenerator::objectNoise() const {
  return NoiseModel::fromSigmas(Vec3(sigmas_.objectTrans, sigmas_.objectTrans, sigmas_.objectRot));
}

NoiseModel StepFactorGenerator::eeNoise() const {
  return NoiseModel::fromSigmas(Vec3(sigmas_.eeTrans, sigmas_.eeTrans, sigmas_.eeRot));
}

NoiseModel StepFactorGenerator::contactForceNoise() const {
  return NoiseModel::fromSigmas(Vec4(sigmas_.contact, sigmas_.contact, sigmas_.force, sigmas_.force));
}

std::vector<FactorPtr> StepFactorGenerator::factorsFor(int t) const {
  if (t < 0 || static_cast<std::size_t>(t) >= traj_.size()) throw std::out_of_range("timestep out of range");
  const MeasuredStep& s = traj_.steps[t];
  std::vector<FactorPtr> out;
  const double inflate2 = config_.gaugeInflation * config_.gaugeInflation;

  if (t == 0) {
    out.push_back(makePoseMeasurement(objectKey(0), anchors_.pose(objectKey(0)), objectNoise().scaled(inflate2),
                                      FactorKind::Prior));
    out.push_back(makePoseMeasurement(eeKey(0), anchors_.pose(eeKey(0)), eeNoise().scaled(inflate2),
                                      FactorKind::Prior));
    out.push_back(makeContactForceMeasurement(contactKey(0), anchors_.contactForce(contactKey(0)), true, true,
                                              contactForceNoise().scaled(inflate2), FactorKind::Prior));
  }

  if (auto y = traj_.objectMeasurement(t)) out.push_back(makePoseMeasurement(objectKey(t), *y, objectNoise()));
  if (auto z = traj_.eeMeasurement(t)) out.push_back(makePoseMeasurement(eeKey(t), *z, eeNoise()));
  if (s.w || s.alpha) {
    const ContactForceState meas{s.w.value_or(Vec2::Zero()),
                                 s.alpha ? Vec2(s.alpha->head<2>()) : Vec2::Zero()};
    out.push_back(makeContactForceMeasurement(contactKey(t), meas, s.w.has_value(), s.alpha.has_value(),
                                              contactForceNoise()));
  }
  const bool weakPoint = !s.w && !s.inContact;
  const bool weakForce = !s.alpha;
  if (weakPoint || weakForce) {
    out.push_back(makeContactForceMeasurement(contactKey(t), ContactForceState{}, weakPoint, weakForce,
                                              NoiseModel::isotropic(4, config_.weakPriorSigma), FactorKind::Prior));
  }

  if (s.inContact) {
    const NoiseModel cNoise = NoiseModel::isotropic(2, config_.contactFactorSigma);
    out.push_back(makeSurfaceContact(objectKey(t), contactKey(t), *objectShape_, cNoise));
    out.push_back(makeSurfaceContact(eeKey(t), contactKey(t), *eeShape_, cNoise));
    out.push_back(makeObjectEeContact(objectKey(t), eeKey(t), *objectShape_, *eeShape_, cNoise));
  }

  if (model_ != GraphModel::CP) {
    out.push_back(makeIntersection(objectKey(t), eeKey(t), *objectShape_, *eeShape_,
                                   NoiseModel::isotropic(2, config_.intersectionSigma)));
  }

  if (t >= 2) {
    const double dt1 = traj_.steps[t - 1].t - traj_.steps[t - 2].t;
    const double dt2 = s.t - traj_.steps[t - 1].t;
    const Vec3 var = config_.velocitySigma.cwiseAbs2() * (0.5 * (dt1 + dt2));
    const NoiseModel vNoise(Eigen::MatrixXd(var.asDiagonal()));
    out.push_back(makeConstVelocity(objectKey(t - 2), objectKey(t - 1), objectKey(t), dt1, dt2, vNoise));
    out.push_back(makeConstVelocity(eeKey(t - 2), eeKey(t - 1), eeKey(t), dt1, dt2, vNoise));
  }

  if (model_ == GraphModel::QS && t >= 1 && s.inContact) {
    const double dt = s.t - traj_.steps[t - 1].t;
    out.push_back(makeQuasiStatic(objectKey(t - 1), objectKey(t), contactKey(t), c_, dt,
                                  NoiseModel::isotropic(2, config_.dynamicsSigma)));
  }
  return out;
}

namespace {

PlanarPose extrapolate(const Values& v, const VariableKey& prev, const VariableKey& prev2, double ratio) {
  const PlanarPose& a = v.pose(prev2);
  const PlanarPose& b = v.pose(prev);
  return b.retract(ratio * b.localCoordinates(a));
}

}  // namespace

void StepFactorGenerator::initialize(int t, Values& values) const {
  const MeasuredStep& s = traj_.steps.at(static_cast<std::size_t>(t));
  auto initPose = [&](std::optional<PlanarPose> meas, VariableKey (*key)(int)) {
    if (meas) {
      values.insert(key(t), *meas);
    } else if (t == 0 || !values.contains(key(t - 1))) {
      values.insert(key(t), anchors_.pose(key(0)));
    } else if (t == 1 || !values.contains(key(t - 2))) {
      values.insert(key(t), values.pose(key(t - 1)));
    } else {
      const double ratio = (s.t - traj_.steps[t - 1].t) / (traj_.steps[t - 1].t - traj_.steps[t - 2].t);
      values.insert(key(t), extrapolate(values, key(t - 1), key(t - 2), ratio));
    }
  };
  initPose(traj_.eeMeasurement(t), &eeKey);
  const auto y = traj_.objectMeasurement(t);
  if (!y && s.inContact && t > 0 && traj_.steps[t - 1].inContact && values.contains(objectKey(t - 1)) &&
      values.contains(eeKey(t - 1))) {
    // An occluded object in contact moves with the pusher: keep the previous offset to it.
    const PlanarPose& prev = values.pose(objectKey(t - 1));
    const Vec2 offset = prev.translation() - values.pose(eeKey(t - 1)).translation();
    const Vec2 trans = values.pose(eeKey(t)).translation() + offset;
    values.insert(objectKey(t), PlanarPose(trans.x(), trans.y(), prev.theta()));
  } else {
    initPose(y, &objectKey);
  }

  ContactForceState pf;
  if (s.w) {
    pf.p = *s.w;
  } else if (s.inContact) {
    pf.p = closestSurfacePoint(*eeShape_, values.pose(eeKey(t)), values.pose(objectKey(t)).translation());
  } else if (t > 0 && values.contains(contactKey(t - 1))) {
    pf.p = values.contactForce(contactKey(t - 1)).p;
  }
  if (s.alpha) {
    pf.f = s.alpha->head<2>();
  } else if (t > 0 && values.contains(contactKey(t - 1))) {
    pf.f = values.contactForce(contactKey(t - 1)).f;
  } else {
    pf.f = anchors_.contactForce(contactKey(0)).f;
  }
  values.insert(contactKey(t), pf);
}

FactorGraph buildGraph(GraphModel model, const MeasuredTrajectory& traj, const GraphConfig& config) {
  StepFactorGenerator gen(model, traj, config);
  FactorGraph graph;
  for (int t = 0; t < static_cast<int>(traj.size()); ++t) {
    gen.initialize(t, graph.values());
    graph.add(gen.factorsFor(t));
  }
  return graph;
}

}  // namespace pushest
