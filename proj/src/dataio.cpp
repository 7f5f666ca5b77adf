#include "pushest/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace pushest {

using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

const char* channelName(int i) {
  static const char* names[kNoiseChannels] = {"object_translation", "object_rotation", "ee_translation",
                                              "ee_rotation",        "contact",         "force"};
  return names[i];
}

json vec2Json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec2 vec2FromJson(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ParseError("expected a 2-element array");
  return {j[0].get<double>(), j[1].get<double>()};
}

Vec3 vec3FromJson(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json poseJson(const PlanarPose& p) { return {{"x", p.x()}, {"y", p.y()}, {"theta", p.theta()}}; }

PlanarPose planarFromJson(const json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("theta").get<double>()};
}

json poseMeasurementJson(const PoseMeasurement& m) {
  if (const auto* p = std::get_if<PlanarPose>(&m)) return poseJson(*p);
  const auto& p3 = std::get<Pose3>(m);
  const auto& q = p3.rotation;
  return {{"t", json::array({p3.translation.x(), p3.translation.y(), p3.translation.z()})},
          {"q", json::array({q.w(), q.x(), q.y(), q.z()})}};
}

PoseMeasurement poseMeasurementFromJson(const json& j) {
  if (!j.is_object()) throw ParseError("pose must be an object");
  if (j.contains("theta")) return planarFromJson(j);
  if (j.contains("t") && j.contains("q")) {
    const json& q = j.at("q");
    if (!q.is_array() || q.size() != 4) throw ParseError("quaternion must have 4 entries [w, x, y, z]");
    const Eigen::Quaterniond quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                  q[3].get<double>());
    if (quat.norm() < 1e-12) throw ParseError("zero quaternion");
    return Pose3(vec3FromJson(j.at("t")), quat);
  }
  throw ParseError("pose must be {x, y, theta} or {t, q}");
}

json paramsJson(const PushParams& p) {
  return {{"mu_s", p.muS},   {"mass", p.mass}, {"gravity", p.gravity}, {"f_max", p.fMax},
          {"tau_max", p.tauMax}, {"c", p.c},   {"pressure", "uniform"}};
}

PushParams paramsFromJson(const json& j, const std::optional<Shape2D>& objectShape) {
  PushParams p;
  p.muS = j.value("mu_s", p.muS);
  p.mass = j.value("mass", p.mass);
  p.gravity = j.value("gravity", p.gravity);
  if (j.contains("pressure") && j.at("pressure").get<std::string>() != "uniform") {
    throw ParseError("unsupported pressure model '" + j.at("pressure").get<std::string>() + "'");
  }
  if (j.contains("c")) {
    p.fMax = j.value("f_max", p.muS * p.mass * p.gravity);
    p.c = j.at("c").get<double>();
    p.tauMax = j.value("tau_max", p.fMax * p.c);
  } else if (objectShape) {
    p = limitSurfaceConstants(*objectShape, p.muS, p.mass, p.gravity);
  } else {
    throw ParseError("params need 'c' or an object shape to derive it");
  }
  if (!(p.c > 0.0)) throw ParseError("params.c must be positive");
  return p;
}

json truthJson(const GroundTruthStep& s) {
  return {{"x", poseJson(s.object)}, {"e", poseJson(s.ee)}, {"p", vec2Json(s.contact)}, {"f", vec2Json(s.force)}};
}

GroundTruthStep truthFromJson(const json& j, double t) {
  GroundTruthStep s;
  s.t = t;
  s.object = planarFromJson(j.at("x"));
  s.ee = planarFromJson(j.at("e"));
  s.contact = vec2FromJson(j.at("p"));
  s.force = vec2FromJson(j.at("f"));
  return s;
}

json planeJson(const Plane3& p) {
  auto v = [](const Vec3& x) { return json::array({x.x(), x.y(), x.z()}); };
  return {{"origin", v(p.origin())}, {"normal", v(p.normal())}, {"x_axis", v(p.xAxis())}};
}

Plane3 planeFromJson(const json& j) {
  try {
    return {vec3FromJson(j.at("origin")), vec3FromJson(j.at("normal")), vec3FromJson(j.at("x_axis"))};
  } catch (const GeometryError& e) {
    throw ParseError(std::string("invalid plane: ") + e.what());
  }
}

}  // namespace

std::string toString(NoiseChannel channel) { return channelName(static_cast<int>(channel)); }

double NoiseSpec::effectiveStd(NoiseChannel c) const {
  const ChannelNoise& ch = channel(c);
  if (!ch.enabled) return 0.0;
  if (kind == NoiseKind::Gaussian) return ch.sigma;
  return std::sqrt(ch.mode * ch.mode + ch.halfWidth * ch.halfWidth / 6.0);
}

NoiseSpec NoiseSpec::gaussian(double transSigma, double rotSigma, double contactSigma, double forceSigma,
                              std::uint64_t seed) {
  NoiseSpec s;
  s.kind = NoiseKind::Gaussian;
  s.seed = seed;
  const double sig[kNoiseChannels] = {transSigma, rotSigma, transSigma, rotSigma, contactSigma, forceSigma};
  for (int i = 0; i < kNoiseChannels; ++i) {
    if (sig[i] < 0.0) throw std::invalid_argument("noise sigma must be non-negative");
    s.channels[i].enabled = true;
    s.channels[i].sigma = sig[i];
  }
  return s;
}

NoiseSpec NoiseSpec::bimodalContactForce(double contactMode, double contactHalfWidth, double forceMode,
                                         double forceHalfWidth, std::uint64_t seed) {
  if (!(contactHalfWidth > 0.0) || !(forceHalfWidth > 0.0)) {
    throw std::invalid_argument("bimodal half-width must be positive");
  }
  NoiseSpec s;
  s.kind = NoiseKind::BimodalTriangular;
  s.seed = seed;
  s.channel(NoiseChannel::Contact) = {true, 0.0, contactMode, contactHalfWidth};
  s.channel(NoiseChannel::Force) = {true, 0.0, forceMode, forceHalfWidth};
  return s;
}

std::optional<PlanarPose> MeasuredTrajectory::objectMeasurement(std::size_t i) const {
  const auto& y = steps.at(i).y;
  if (!y) return std::nullopt;
  if (const auto* p = std::get_if<PlanarPose>(&*y)) return *p;
  return projectToPlane(std::get<Pose3>(*y), plane);
}

std::optional<PlanarPose> MeasuredTrajectory::eeMeasurement(std::size_t i) const {
  const auto& z = steps.at(i).z;
  if (!z) return std::nullopt;
  if (const auto* p = std::get_if<PlanarPose>(&*z)) return *p;
  return projectToPlane(std::get<Pose3>(*z), plane);
}

bool MeasuredTrajectory::hasGroundTruth() const {
  if (steps.empty()) return false;
  for (const auto& s : steps) {
    if (!s.truth) return false;
  }
  return true;
}

std::vector<GroundTruthStep> MeasuredTrajectory::groundTruth() const {
  if (!hasGroundTruth()) throw DataError("trajectory has no complete ground truth");
  std::vector<GroundTruthStep> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(*s.truth);
  return out;
}

void validate(const MeasuredTrajectory& traj) {
  bool any = false;
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const auto& s = traj.steps[i];
    if (!std::isfinite(s.t)) throw ParseError("non-finite timestamp at step " + std::to_string(i));
    if (i > 0 && !(s.t > traj.steps[i - 1].t)) {
      throw NonMonotonicTimestamps("timestamp at step " + std::to_string(i) + " is not after its predecessor");
    }
    if (s.alpha && (s.alpha->size() < 2 || s.alpha->size() > 3)) {
      throw ParseError("alpha must have 2 or 3 components at step " + std::to_string(i));
    }
    any = any || s.y || s.z || s.w || s.alpha;
  }
  if (!any) throw DataError("trajectory has no measurements");
}

MeasuredTrajectory measuredFromGroundTruth(const GroundTruthTrajectory& gt, const Plane3& plane) {
  MeasuredTrajectory out;
  out.plane = plane;
  out.objectShape = gt.scene.object;
  out.eeShape = gt.scene.ee;
  out.params = gt.scene.params;
  out.steps.reserve(gt.steps.size());
  for (const auto& g : gt.steps) {
    MeasuredStep s;
    s.t = g.t;
    s.y = g.object;
    s.z = g.ee;
    s.w = g.contact;
    s.alpha = Eigen::VectorXd(g.force);
    s.truth = g;
    out.steps.push_back(std::move(s));
  }
  return out;
}

json toJson(const Shape2D& shape) {
  if (shape.isDisc()) return {{"kind", "disc"}, {"radius", shape.asDisc().radius}};
  json verts = json::array();
  for (const Vec2& v : shape.asPolygon().vertices) verts.push_back(vec2Json(v));
  return {{"kind", "polygon"}, {"vertices", verts}};
}

Shape2D shapeFromJson(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "disc") return Shape2D::disc(j.at("radius").get<double>());
    if (kind == "polygon") {
      std::vector<Vec2> verts;
      for (const auto& v : j.at("vertices")) verts.push_back(vec2FromJson(v));
      return Shape2D::polygon(std::move(verts));
    }
    throw ParseError("unknown shape kind '" + kind + "'");
  } catch (const GeometryError& e) {
    throw ParseError(std::string("invalid shape: ") + e.what());
  }
}

json toJson(const NoiseSpec& spec) {
  json channels = json::object();
  for (int i = 0; i < kNoiseChannels; ++i) {
    const ChannelNoise& c = spec.channels[i];
    if (!c.enabled) continue;
    if (spec.kind == NoiseKind::Gaussian) {
      channels[channelName(i)] = {{"sigma", c.sigma}};
    } else {
      channels[channelName(i)] = {{"mode", c.mode}, {"half_width", c.halfWidth}};
    }
  }
  return {{"kind", spec.kind == NoiseKind::Gaussian ? "gaussian" : "bimodal_triangular"},
          {"seed", spec.seed},
          {"channels", channels}};
}

NoiseSpec noiseSpecFromJson(const json& j) {
  NoiseSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") {
    spec.kind = NoiseKind::Gaussian;
  } else if (kind == "bimodal_triangular") {
    spec.kind = NoiseKind::BimodalTriangular;
  } else {
    throw ParseError("unknown noise kind '" + kind + "'");
  }
  spec.seed = j.value("seed", std::uint64_t{0});
  const json& channels = j.at("channels");
  for (int i = 0; i < kNoiseChannels; ++i) {
    if (!channels.contains(channelName(i))) continue;
    const json& c = channels.at(channelName(i));
    ChannelNoise& ch = spec.channels[i];
    ch.enabled = true;
    ch.sigma = c.value("sigma", 0.0);
    ch.mode = c.value("mode", 0.0);
    ch.halfWidth = c.value("half_width", 0.0);
    if (ch.sigma < 0.0 || (spec.kind == NoiseKind::BimodalTriangular && !(ch.halfWidth > 0.0))) {
      throw ParseError(std::string("invalid noise parameters for channel ") + channelName(i));
    }
  }
  return spec;
}

json toJson(const MeasuredTrajectory& traj) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["units"] = {{"length", "m"}, {"angle", "rad"}, {"force", "N"}, {"time", "s"}, {"mass", "kg"}};
  j["plane"] = planeJson(traj.plane);
  json shapes = json::object();
  if (traj.objectShape) shapes["object"] = toJson(*traj.objectShape);
  if (traj.eeShape) shapes["ee"] = toJson(*traj.eeShape);
  j["shapes"] = shapes;
  if (traj.params) j["params"] = paramsJson(*traj.params);
  if (traj.noise) j["noise"] = toJson(*traj.noise);
  if (!traj.provenance.empty()) j["config"] = traj.provenance;
  json steps = json::array();
  for (const auto& s : traj.steps) {
    json js;
    js["t"] = s.t;
    if (s.y) js["y"] = poseMeasurementJson(*s.y);
    if (s.z) js["z"] = poseMeasurementJson(*s.z);
    if (s.w) js["w"] = vec2Json(*s.w);
    if (s.alpha) js["alpha"] = std::vector<double>(s.alpha->data(), s.alpha->data() + s.alpha->size());
    if (!s.inContact) js["contact"] = false;
    if (s.truth) js["truth"] = truthJson(*s.truth);
    steps.push_back(std::move(js));
  }
  j["steps"] = std::move(steps);
  return j;
}

MeasuredTrajectory fromJson(const json& j) {
  if (!j.is_object() || !j.contains("schema_version")) throw ParseError("missing schema_version");
  if (!j.at("schema_version").is_number_integer() || j.at("schema_version").get<int>() != kSchemaVersion) {
    throw SchemaVersionError("unsupported schema_version " + j.at("schema_version").dump());
  }
  MeasuredTrajectory traj;
  try {
    if (j.contains("plane")) traj.plane = planeFromJson(j.at("plane"));
    if (j.contains("shapes")) {
      const json& shapes = j.at("shapes");
      if (shapes.contains("object")) traj.objectShape = shapeFromJson(shapes.at("object"));
      if (shapes.contains("ee")) traj.eeShape = shapeFromJson(shapes.at("ee"));
    }
    if (j.contains("params")) traj.params = paramsFromJson(j.at("params"), traj.objectShape);
    if (j.contains("noise")) traj.noise = noiseSpecFromJson(j.at("noise"));
    if (j.contains("config")) traj.provenance = j.at("config");
    for (const json& js : j.at("steps")) {
      MeasuredStep s;
      s.t = js.at("t").get<double>();
      if (js.contains("y") && !js.at("y").is_null()) s.y = poseMeasurementFromJson(js.at("y"));
      if (js.contains("z") && !js.at("z").is_null()) s.z = poseMeasurementFromJson(js.at("z"));
      if (js.contains("w") && !js.at("w").is_null()) s.w = vec2FromJson(js.at("w"));
      if (js.contains("alpha") && !js.at("alpha").is_null()) {
        const auto a = js.at("alpha").get<std::vector<double>>();
        s.alpha = Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
      }
      s.inContact = js.value("contact", true);
      if (js.contains("truth")) s.truth = truthFromJson(js.at("truth"), s.t);
      traj.steps.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed trajectory: ") + e.what());
  }
  validate(traj);
  return traj;
}

std::string dumpTrajectory(const MeasuredTrajectory& traj) { return toJson(traj).dump(1) + "\n"; }

void saveTrajectory(const MeasuredTrajectory& traj, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << dumpTrajectory(traj);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

MeasuredTrajectory loadTrajectory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return fromJson(j);
}

namespace {

struct StampedRow {
  double t;
  std::vector<double> v;
};

std::vector<StampedRow> readRows(const json& log, const char* name, std::size_t minSize) {
  std::vector<StampedRow> rows;
  if (!log.contains(name)) return rows;
  for (const json& r : log.at(name)) {
    auto v = r.get<std::vector<double>>();
    if (v.size() < minSize) throw ParseError(std::string(name) + " row too short");
    rows.push_back({v[0], std::vector<double>(v.begin() + 1, v.end())});
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].t > rows[i - 1].t)) throw NonMonotonicTimestamps(std::string(name) + " timestamps not increasing");
  }
  return rows;
}

PoseMeasurement rowPose(const std::vector<double>& v, const char* name) {
  if (v.size() == 3) return PlanarPose(v[0], v[1], v[2]);
  if (v.size() == 7) {
    return Pose3(Vec3(v[0], v[1], v[2]), Eigen::Quaterniond(v[3], v[4], v[5], v[6]));
  }
  throw ParseError(std::string(name) + " rows must be [t, x, y, yaw] or [t, x, y, z, qw, qx, qy, qz]");
}

PlanarPose planarOf(const PoseMeasurement& m, const Plane3& plane) {
  if (const auto* p = std::get_if<PlanarPose>(&m)) return *p;
  return projectToPlane(std::get<Pose3>(m), plane);
}

/// Index of the row nearest to t within `tol`, if any.
std::optional<std::size_t> nearestRow(const std::vector<StampedRow>& rows, double t, double tol) {
  auto it = std::lower_bound(rows.begin(), rows.end(), t, [](const StampedRow& r, double x) { return r.t < x; });
  std::optional<std::size_t> best;
  double bestGap = tol;
  for (auto cand : {it, it == rows.begin() ? rows.end() : it - 1}) {
    if (cand == rows.end()) continue;
    const double gap = std::abs(cand->t - t);
    if (gap <= bestGap) {
      bestGap = gap;
      best = static_cast<std::size_t>(cand - rows.begin());
    }
  }
  return best;
}

}  // namespace

MeasuredTrajectory importMitLog(const json& log, const Shape2D& objectShape, const Shape2D& eeShape,
                                const PushParams& params, const Plane3& plane) {
  MeasuredTrajectory traj;
  traj.plane = plane;
  traj.objectShape = objectShape;
  traj.eeShape = eeShape;
  traj.params = params;
  try {
    const auto tip = readRows(log, "tip_pose", 4);
    const auto obj = readRows(log, "object_pose", 4);
    const auto ft = readRows(log, "ft_wrench", 3);
    if (tip.empty()) throw ParseError("MIT log has no tip_pose rows");
    for (std::size_t i = 0; i < tip.size(); ++i) {
      const double period = tip.size() > 1 ? (i + 1 < tip.size() ? tip[i + 1].t - tip[i].t : tip[i].t - tip[i - 1].t)
                                           : std::numeric_limits<double>::infinity();
      const double tol = 0.5 * period;
      MeasuredStep s;
      s.t = tip[i].t;
      s.z = planarOf(rowPose(tip[i].v, "tip_pose"), plane);
      if (auto k = nearestRow(obj, s.t, tol)) {
        s.y = planarOf(rowPose(obj[*k].v, "object_pose"), plane);
      }
      if (auto k = nearestRow(ft, s.t, tol)) {
        const auto& v = ft[*k].v;
        Eigen::VectorXd alpha(2);
        if (v.size() >= 3) {
          const Vec3 f(v[0], v[1], v[2]);
          alpha << f.dot(plane.xAxis()), f.dot(plane.yAxis());
        } else {
          alpha << v[0], v[1];
        }
        s.alpha = alpha;
      }
      traj.steps.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed MIT log: ") + e.what());
  }
  validate(traj);
  return traj;
}

namespace {

class NoiseSampler {
 public:
  explicit NoiseSampler(const NoiseSpec& spec) : spec_(spec), rng_(spec.seed) {}

  /// Always consumes the same number of draws so that the noise of step i does not depend
  /// on which measurements are present.
  double draw(NoiseChannel c) {
    const ChannelNoise& ch = spec_.channel(c);
    double v;
    if (spec_.kind == NoiseKind::Gaussian) {
      v = ch.sigma * normal_(rng_);
    } else {
      v = sampleBimodalTriangular(rng_, ch.mode, ch.halfWidth);
    }
    return ch.enabled ? v : 0.0;
  }

  Vec2 draw2(NoiseChannel c) {
    const double a = draw(c);
    const double b = draw(c);
    return {a, b};
  }

 private:
  const NoiseSpec& spec_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace

MeasuredTrajectory injectNoise(const MeasuredTrajectory& traj, const NoiseSpec& spec) {
  MeasuredTrajectory out = traj;
  NoiseSampler sampler(spec);
  for (std::size_t i = 0; i < out.steps.size(); ++i) {
    MeasuredStep& s = out.steps[i];
    const Vec2 dy = sampler.draw2(NoiseChannel::ObjectTranslation);
    const double dyr = sampler.draw(NoiseChannel::ObjectRotation);
    const Vec2 dz = sampler.draw2(NoiseChannel::EETranslation);
    const double dzr = sampler.draw(NoiseChannel::EERotation);
    const Vec2 dw = sampler.draw2(NoiseChannel::Contact);
    const Vec2 da = sampler.draw2(NoiseChannel::Force);
    if (s.y) {
      const PlanarPose p = *traj.objectMeasurement(i);
      s.y = PlanarPose(p.x() + dy.x(), p.y() + dy.y(), p.theta() + dyr);
    }
    if (s.z) {
      const PlanarPose p = *traj.eeMeasurement(i);
      s.z = PlanarPose(p.x() + dz.x(), p.y() + dz.y(), p.theta() + dzr);
    }
    if (s.w) *s.w += dw;
    if (s.alpha) s.alpha->head<2>() += da;
  }
  out.noise = spec;
  return out;
}

MeasuredTrajectory applyOcclusion(const MeasuredTrajectory& traj, double begin, double end,
                                  const std::vector<OcclusionChannel>& channels) {
  if (!(0.0 <= begin && begin <= end && end <= 1.0)) {
    throw std::invalid_argument("occlusion window must satisfy 0 <= begin <= end <= 1");
  }
  MeasuredTrajectory out = traj;
  const double n = static_cast<double>(traj.steps.size());
  const auto lo = static_cast<std::size_t>(std::lround(begin * n));
  const auto hi = static_cast<std::size_t>(std::lround(end * n));
  for (std::size_t i = lo; i < hi && i < out.steps.size(); ++i) {
    for (OcclusionChannel c : channels) {
      switch (c) {
        case OcclusionChannel::Object: out.steps[i].y.reset(); break;
        case OcclusionChannel::EE: out.steps[i].z.reset(); break;
        case OcclusionChannel::Contact: out.steps[i].w.reset(); break;
        case OcclusionChannel::Force: out.steps[i].alpha.reset(); break;
      }
    }
  }
  return out;
}

std::vector<StateSample> measurementSamples(const MeasuredTrajectory& traj) {
  std::vector<StateSample> out(traj.steps.size());
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const MeasuredStep& s = traj.steps[i];
    out[i].t = s.t;
    out[i].object = traj.objectMeasurement(i);
    out[i].ee = traj.eeMeasurement(i);
    out[i].contact = s.w;
    if (s.alpha) out[i].force = Vec2(s.alpha->head<2>());
  }
  return out;
}

ChannelStats summarize(const std::vector<double>& errors) {
  ChannelStats s;
  s.count = errors.size();
  if (errors.empty()) return s;
  double sum = 0.0;
  double sumSq = 0.0;
  for (double e : errors) {
    sum += std::abs(e);
    sumSq += e * e;
  }
  const double n = static_cast<double>(errors.size());
  s.mae = sum / n;
  s.rmse = std::sqrt(sumSq / n);
  double var = 0.0;
  for (double e : errors) var += (std::abs(e) - s.mae) * (std::abs(e) - s.mae);
  s.sigma = std::sqrt(var / n);
  return s;
}

Metrics computeMetrics(const std::vector<StateSample>& estimate, const std::vector<GroundTruthStep>& truth) {
  if (estimate.size() != truth.size()) {
    throw LengthMismatch("estimate has " + std::to_string(estimate.size()) + " steps, ground truth " +
                         std::to_string(truth.size()));
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (std::abs(estimate[i].t - truth[i].t) > 1e-9) throw LengthMismatch("timestamps differ at step " + std::to_string(i));
  }
  std::vector<double> objT, objR, eeT, eeR, contact, fMag, fDir;
  const std::size_t n = truth.size();
  for (std::size_t i = 0; i < n; ++i) {
    const GroundTruthStep& g = truth[i];
    const StateSample& e = estimate[i];
    bool moving = false;
    if (n > 1) {
      const std::size_t a = i == 0 ? 0 : i - 1;
      const std::size_t b = i == 0 ? 1 : i;
      const double speed = (truth[b].object.translation() - truth[a].object.translation()).norm() /
                           (truth[b].t - truth[a].t);
      moving = speed > kInMotionSpeed;
    }
    if (e.object && moving) {
      objT.push_back(100.0 * (e.object->translation() - g.object.translation()).norm());
      objR.push_back(std::abs(angleDiff(e.object->theta(), g.object.theta())));
    }
    if (e.ee) {
      eeT.push_back(100.0 * (e.ee->translation() - g.ee.translation()).norm());
      eeR.push_back(std::abs(angleDiff(e.ee->theta(), g.ee.theta())));
    }
    if (e.contact) contact.push_back(100.0 * (*e.contact - g.contact).norm());
    if (e.force) {
      fMag.push_back(std::abs(e.force->norm() - g.force.norm()));
      if (g.force.norm() > 1e-9) {
        const double ang = e.force->norm() > 1e-12
                               ? std::atan2(std::abs(cross2(*e.force, g.force)), e.force->dot(g.force))
                               : 0.5 * kPi;
        fDir.push_back(ang * 180.0 / kPi);
      }
    }
  }
  return {summarize(objT), summarize(objR), summarize(eeT), summarize(eeR),
          summarize(contact), summarize(fMag), summarize(fDir)};
}

Ellipse2Sigma twoSigmaEllipse(const Mat2& covariance) {
  const Mat2 sym = 0.5 * (covariance + covariance.transpose());
  Eigen::SelfAdjointEigenSolver<Mat2> eig(sym);
  const Eigen::Vector2d vals = eig.eigenvalues().cwiseMax(0.0);
  Vec2 axis = eig.eigenvectors().col(1);
  double angle = std::atan2(axis.y(), axis.x());
  if (angle <= -0.5 * kPi) angle += kPi;
  if (angle > 0.5 * kPi) angle -= kPi;
  return {2.0 * std::sqrt(vals(1)), 2.0 * std::sqrt(vals(0)), angle};
}

std::vector<std::string> resultColumns() {
  std::vector<std::string> cols = {"t",   "x_x", "x_y", "x_theta", "e_x", "e_y",
                                   "e_theta", "p_x", "p_y", "f_x",     "f_y"};
  for (const char* v : {"x", "e", "p", "f"}) {
    const std::string s(v);
    cols.push_back(s + "_ell_major");
    cols.push_back(s + "_ell_minor");
    cols.push_back(s + "_ell_angle");
    if (s == "x" || s == "e") cols.push_back(s + "_theta_2sigma");
  }
  return cols;
}

std::string formatDouble(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string resultsCsv(const std::vector<StateSample>& estimate,
                       const std::optional<std::vector<StateCovariance>>& covariances, const json& provenance) {
  if (covariances && covariances->size() != estimate.size()) {
    throw LengthMismatch("covariance count does not match estimate length");
  }
  std::ostringstream out;
  out << "# pushest results v1\n";
  out << "# units: m, rad, N; ellipses are 2-sigma semi-axes of the 2x2 marginal, angle in rad\n";
  if (!provenance.is_null() && !provenance.empty()) out << "# config: " << provenance.dump() << "\n";
  const auto cols = resultColumns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const StateSample& s = estimate[i];
    std::vector<double> row = {s.t};
    auto pose = [&](const std::optional<PlanarPose>& p) {
      row.push_back(p ? p->x() : nan);
      row.push_back(p ? p->y() : nan);
      row.push_back(p ? p->theta() : nan);
    };
    auto vec = [&](const std::optional<Vec2>& v) {
      row.push_back(v ? v->x() : nan);
      row.push_back(v ? v->y() : nan);
    };
    pose(s.object);
    pose(s.ee);
    vec(s.contact);
    vec(s.force);
    auto ellipse = [&](const std::optional<Mat2>& c) {
      if (!c) {
        row.insert(row.end(), {nan, nan, nan});
        return;
      }
      const Ellipse2Sigma e = twoSigmaEllipse(*c);
      row.insert(row.end(), {e.major, e.minor, e.angle});
    };
    if (covariances) {
      const StateCovariance& c = (*covariances)[i];
      ellipse(Mat2(c.object.topLeftCorner<2, 2>()));
      row.push_back(2.0 * std::sqrt(std::max(0.0, c.object(2, 2))));
      ellipse(Mat2(c.ee.topLeftCorner<2, 2>()));
      row.push_back(2.0 * std::sqrt(std::max(0.0, c.ee(2, 2))));
      ellipse(Mat2(c.contactForce.topLeftCorner<2, 2>()));
      ellipse(Mat2(c.contactForce.bottomRightCorner<2, 2>()));
    } else {
      row.resize(cols.size(), nan);
    }
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << formatDouble(row[k]);
    out << "\n";
  }
  return out.str();
}

void exportResults(const std::vector<StateSample>& estimate,
                   const std::optional<std::vector<StateCovariance>>& covariances,
                   const std::filesystem::path& path, const json& provenance) {
  const std::string text = resultsCsv(estimate, covariances, provenance);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

ResultsTable readResults(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  ResultsTable table;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> parts;
    std::stringstream ss(l);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(item);
    return parts;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.headerLines.push_back(line);
      continue;
    }
    if (table.columns.empty()) {
      table.columns = split(line);
      continue;
    }
    const auto parts = split(line);
    if (parts.size() != table.columns.size()) throw ParseError("row has wrong column count");
    std::vector<double> row;
    for (const auto& p : parts) {
      char* endp = nullptr;
      const double v = std::strtod(p.c_str(), &endp);
      if (endp == p.c_str()) throw ParseError("bad number '" + p + "'");
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.columns.empty()) throw ParseError("results file has no column header");
  return table;
}

}  // namespace pushest
