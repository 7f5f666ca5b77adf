#include "pushest/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace pushest {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kEdgeSubdivisions = 32;

const Mat2& rot90() {
  static const Mat2 j = (Mat2() << 0.0, -1.0, 1.0, 0.0).finished();
  return j;
}

// Closest boundary point in the body frame.
struct BodyProjection {
  Vec2 point;
  double signedDistance;
  Mat2 jacobian;  // d point / d query
  Vec2 edgeNormal;  // outward normal of the supporting edge (or radial direction)
};

BodyProjection projectDisc(const Disc& disc, const Vec2& q) {
  const double n = q.norm();
  if (n < 1e-15) {
    return {Vec2(disc.radius, 0.0), -disc.radius, Mat2::Zero(), Vec2::UnitX()};
  }
  const Vec2 dir = q / n;
  const Mat2 jac = disc.radius / n * (Mat2::Identity() - dir * dir.transpose());
  return {disc.radius * dir, n - disc.radius, jac, dir};
}

BodyProjection projectPolygon(const ConvexPolygon& poly, const Vec2& q) {
  const auto& v = poly.vertices;
  const std::size_t n = v.size();
  double best = std::numeric_limits<double>::infinity();
  BodyProjection out{Vec2::Zero(), 0.0, Mat2::Zero(), Vec2::UnitX()};
  bool inside = true;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % n];
    const Vec2 edge = b - a;
    const double len = edge.norm();
    const Vec2 u = edge / len;
    if (cross2(u, q - a) < 0.0) inside = false;
    const double s = (q - a).dot(u);
    Vec2 candidate;
    Mat2 jac = Mat2::Zero();
    if (s <= 0.0) {
      candidate = a;
    } else if (s >= len) {
      candidate = b;
    } else {
      candidate = a + s * u;
      jac = u * u.transpose();
    }
    const double d2 = (q - candidate).squaredNorm();
    if (d2 < best) {
      best = d2;
      out.point = candidate;
      out.jacobian = jac;
      out.edgeNormal = Vec2(u.y(), -u.x());
    }
  }
  const double dist = std::sqrt(best);
  out.signedDistance = inside ? -dist : dist;
  return out;
}

BodyProjection projectBody(const Shape2D& shape, const Vec2& q) {
  return shape.isDisc() ? projectDisc(shape.asDisc(), q) : projectPolygon(shape.asPolygon(), q);
}

std::vector<Vec2> boundarySamples(const ConvexPolygon& poly) {
  std::vector<Vec2> samples;
  const auto& v = poly.vertices;
  samples.reserve(v.size() * kEdgeSubdivisions);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % v.size()];
    for (int k = 0; k < kEdgeSubdivisions; ++k) {
      samples.push_back(a + (b - a) * (static_cast<double>(k) / kEdgeSubdivisions));
    }
  }
  return samples;
}

std::vector<Vec2> worldVertices(const ConvexPolygon& poly, const PlanarPose& pose) {
  std::vector<Vec2> out;
  out.reserve(poly.vertices.size());
  for (const auto& v : poly.vertices) out.push_back(pose.transformFrom(v));
  return out;
}

// True if some edge normal of `a` separates the two vertex sets (touching counts).
bool hasSeparatingAxis(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec2 edge = a[(i + 1) % a.size()] - a[i];
    const Vec2 axis(edge.y(), -edge.x());
    double maxA = -std::numeric_limits<double>::infinity();
    double minB = std::numeric_limits<double>::infinity();
    for (const auto& p : a) maxA = std::max(maxA, axis.dot(p));
    for (const auto& p : b) minB = std::min(minB, axis.dot(p));
    if (minB >= maxA) return true;
  }
  return false;
}

}  // namespace

double wrapAngle(double angle) {
  double r = std::remainder(angle, kTwoPi);
  if (r <= -std::numbers::pi) r += kTwoPi;
  return r;
}

Mat2 PlanarPose::rotation() const {
  const double c = std::cos(theta_);
  const double s = std::sin(theta_);
  return (Mat2() << c, -s, s, c).finished();
}

PlanarPose PlanarPose::compose(const PlanarPose& other) const {
  const Vec2 t = translation() + rotation() * other.translation();
  return {t.x(), t.y(), theta_ + other.theta_};
}

PlanarPose PlanarPose::inverse() const {
  const Vec2 t = -(rotation().transpose() * translation());
  return {t.x(), t.y(), -theta_};
}

Vec2 PlanarPose::transformFrom(const Vec2& body) const { return rotation() * body + translation(); }

Vec2 PlanarPose::transformTo(const Vec2& world) const {
  return rotation().transpose() * (world - translation());
}

PlanarPose se2Compose(const PlanarPose& a, const PlanarPose& b) { return a.compose(b); }

Pose3::Pose3(const Vec3& t, const Eigen::Quaterniond& q) : translation(t), rotation(q.normalized()) {}

Plane3::Plane3(const Vec3& origin, const Vec3& normal, const Vec3& xAxis) : origin_(origin) {
  const double nn = normal.norm();
  if (nn < 1e-12) throw GeometryError("plane normal has zero length");
  normal_ = normal / nn;
  const Vec3 inPlane = xAxis - xAxis.dot(normal_) * normal_;
  if (inPlane.norm() < 1e-9) throw GeometryError("plane x-axis is parallel to the normal");
  xAxis_ = inPlane.normalized();
}

PlanarPose projectToPlane(const Pose3& pose, const Plane3& plane) {
  const Vec3 d = pose.translation - plane.origin();
  const Vec3 yAxis = plane.yAxis();
  const Vec3 bodyX = pose.rotation * Vec3::UnitX();
  const Vec3 projected = bodyX - bodyX.dot(plane.normal()) * plane.normal();
  // |projected| = sin(angle between the body x-axis and the normal).
  if (projected.norm() < std::sin(1e-6)) {
    throw DegenerateProjection("body x-axis is aligned with the plane normal; yaw is undefined");
  }
  return {d.dot(plane.xAxis()), d.dot(yAxis),
          std::atan2(projected.dot(yAxis), projected.dot(plane.xAxis()))};
}

Pose3 embedInPlane(const PlanarPose& pose, const Plane3& plane) {
  Eigen::Matrix3d frame;
  frame.col(0) = plane.xAxis();
  frame.col(1) = plane.yAxis();
  frame.col(2) = plane.normal();
  const Vec3 t = plane.origin() + pose.x() * plane.xAxis() + pose.y() * plane.yAxis();
  const Eigen::Matrix3d r = frame * Eigen::AngleAxisd(pose.theta(), Vec3::UnitZ()).toRotationMatrix();
  return {t, Eigen::Quaterniond(r)};
}

Shape2D Shape2D::disc(double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw GeometryError("disc radius must be positive");
  return Shape2D(Disc{radius});
}

Shape2D Shape2D::polygon(std::vector<Vec2> vertices) {
  const std::size_t n = vertices.size();
  if (n < 3) throw GeometryError("polygon needs at least 3 vertices");
  double area2 = 0.0;
  Vec2 weighted = Vec2::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[(i + 1) % n];
    const double c = cross2(a, b);
    area2 += c;
    weighted += c * (a + b);
  }
  if (!(area2 > 0.0)) throw GeometryError("polygon must be counter-clockwise with positive area");
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e0 = vertices[(i + 1) % n] - vertices[i];
    const Vec2 e1 = vertices[(i + 2) % n] - vertices[(i + 1) % n];
    if (e0.norm() < 1e-12) throw GeometryError("polygon has a repeated vertex");
    if (cross2(e0, e1) <= 0.0) throw GeometryError("polygon is not strictly convex");
  }
  const Vec2 centroid = weighted / (3.0 * area2);
  double scale = 0.0;
  for (const auto& v : vertices) scale = std::max(scale, v.norm());
  // Already-centred input is kept bit-exact so stored shapes round-trip.
  if (centroid.norm() > 1e-12 * scale) {
    for (auto& v : vertices) v -= centroid;
  }
  return Shape2D(ConvexPolygon{std::move(vertices)});
}

Shape2D Shape2D::box(double width, double height) {
  if (!(width > 0.0) || !(height > 0.0)) throw GeometryError("box extents must be positive");
  const double hx = width / 2.0;
  const double hy = height / 2.0;
  return polygon({{-hx, -hy}, {hx, -hy}, {hx, hy}, {-hx, hy}});
}

Shape2D Shape2D::ellipse(double semiAxisX, double semiAxisY, int segments) {
  if (!(semiAxisX > 0.0) || !(semiAxisY > 0.0)) throw GeometryError("ellipse axes must be positive");
  if (segments < 3) throw GeometryError("ellipse needs at least 3 segments");
  std::vector<Vec2> v;
  v.reserve(segments);
  for (int k = 0; k < segments; ++k) {
    const double phi = kTwoPi * k / segments;
    v.emplace_back(semiAxisX * std::cos(phi), semiAxisY * std::sin(phi));
  }
  return polygon(std::move(v));
}

double Shape2D::area() const {
  if (isDisc()) return std::numbers::pi * asDisc().radius * asDisc().radius;
  const auto& v = asPolygon().vertices;
  double a = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) a += cross2(v[i], v[(i + 1) % v.size()]);
  return 0.5 * a;
}

double Shape2D::boundingRadius() const {
  if (isDisc()) return asDisc().radius;
  double r = 0.0;
  for (const auto& v : asPolygon().vertices) r = std::max(r, v.norm());
  return r;
}

Shape2D Shape2D::scaled(double factor) const {
  if (isDisc()) return disc(asDisc().radius * factor);
  auto v = asPolygon().vertices;
  for (auto& p : v) p *= factor;
  return polygon(std::move(v));
}

SurfaceProjection projectOntoSurface(const Shape2D& shape, const PlanarPose& pose,
                                     const Vec2& query) {
  const Mat2 r = pose.rotation();
  const Vec2 qBody = r.transpose() * (query - pose.translation());
  const BodyProjection b = projectBody(shape, qBody);

  SurfaceProjection out;
  out.point = r * b.point + pose.translation();
  out.signedDistance = b.signedDistance;
  out.dPoint_dQuery = r * b.jacobian * r.transpose();
  out.dPoint_dPose.leftCols<2>() = Mat2::Identity() - out.dPoint_dQuery;
  out.dPoint_dPose.col(2) = r * (rot90() * b.point - b.jacobian * rot90() * qBody);
  return out;
}

Vec2 closestSurfacePoint(const Shape2D& shape, const PlanarPose& pose, const Vec2& query) {
  return pose.transformFrom(projectBody(shape, pose.transformTo(query)).point);
}

double signedDistance(const Shape2D& shape, const PlanarPose& pose, const Vec2& query) {
  return projectBody(shape, pose.transformTo(query)).signedDistance;
}

Vec2 outwardNormal(const Shape2D& shape, const PlanarPose& pose, const Vec2& query) {
  const Vec2 qBody = pose.transformTo(query);
  const BodyProjection b = projectBody(shape, qBody);
  const Vec2 d = qBody - b.point;
  const double n = d.norm();
  Vec2 normal = b.edgeNormal;
  if (n > 1e-12) normal = (b.signedDistance >= 0.0 ? 1.0 : -1.0) * d / n;
  return pose.rotation() * normal;
}

bool shapesOverlap(const Shape2D& a, const PlanarPose& poseA, const Shape2D& b,
                   const PlanarPose& poseB) {
  if (a.isDisc() && b.isDisc()) {
    return (poseA.translation() - poseB.translation()).norm() <
           a.asDisc().radius + b.asDisc().radius;
  }
  if (b.isDisc()) return signedDistance(a, poseA, poseB.translation()) < b.asDisc().radius;
  if (a.isDisc()) return signedDistance(b, poseB, poseA.translation()) < a.asDisc().radius;
  const auto va = worldVertices(a.asPolygon(), poseA);
  const auto vb = worldVertices(b.asPolygon(), poseB);
  return !hasSeparatingAxis(va, vb) && !hasSeparatingAxis(vb, va);
}

DeepestPoint deepestPoint(const Shape2D& objShape, const PlanarPose& objPose,
                          const Shape2D& eeShape, const PlanarPose& eePose) {
  DeepestPoint out;
  if (eeShape.isDisc()) {
    const double radius = eeShape.asDisc().radius;
    const Vec2 c = eePose.translation();
    const SurfaceProjection center = projectOntoSurface(objShape, objPose, c);
    const Vec2 d = c - center.point;
    const double dn = d.norm();
    Vec2 normal;
    Mat2 dNormal_dD = Mat2::Zero();
    if (dn > 1e-12) {
      const double s = center.signedDistance >= 0.0 ? 1.0 : -1.0;
      const Vec2 dir = d / dn;
      normal = s * dir;
      dNormal_dD = s / dn * (Mat2::Identity() - dir * dir.transpose());
    } else {
      normal = outwardNormal(objShape, objPose, c);
    }
    out.delta = c - radius * normal;
    out.dDelta_dEe.leftCols<2>() =
        Mat2::Identity() - radius * dNormal_dD * (Mat2::Identity() - center.dPoint_dQuery);
    out.dDelta_dObject = radius * dNormal_dD * center.dPoint_dPose;
  } else {
    Vec2 bestBody = Vec2::Zero();
    double best = std::numeric_limits<double>::infinity();
    const auto consider = [&](const Vec2& body) {
      const double sd = signedDistance(objShape, objPose, eePose.transformFrom(body));
      if (sd < best) {
        best = sd;
        bestBody = body;
      }
    };
    for (const auto& s : boundarySamples(eeShape.asPolygon())) consider(s);
    // Object vertices inside the end-effector, projected onto its boundary, catch thin
    // overlaps that fall between edge samples.
    if (!objShape.isDisc()) {
      for (const auto& v : objShape.asPolygon().vertices) {
        const Vec2 inEe = eePose.transformTo(objPose.transformFrom(v));
        const BodyProjection p = projectBody(eeShape, inEe);
        if (p.signedDistance < 0.0) consider(p.point);
      }
    }
    out.delta = eePose.transformFrom(bestBody);
    out.dDelta_dEe.leftCols<2>() = Mat2::Identity();
    out.dDelta_dEe.col(2) = eePose.rotation() * rot90() * bestBody;
  }
  const SurfaceProjection proj = projectOntoSurface(objShape, objPose, out.delta);
  out.projection = proj.point;
  out.signedDistance = proj.signedDistance;
  out.dProjection_dObject = proj.dPoint_dPose + proj.dPoint_dQuery * out.dDelta_dObject;
  out.dProjection_dEe = proj.dPoint_dQuery * out.dDelta_dEe;
  return out;
}

std::optional<Penetration> deepestPenetration(const Shape2D& objShape, const PlanarPose& objPose,
                                              const Shape2D& eeShape, const PlanarPose& eePose) {
  if (!shapesOverlap(objShape, objPose, eeShape, eePose)) return std::nullopt;
  const DeepestPoint d = deepestPoint(objShape, objPose, eeShape, eePose);
  return Penetration{d.delta, d.projection};
}

}  // namespace pushest
