#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace pushest {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateProjection : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

/// Wraps an angle to (-pi, pi].
double wrapAngle(double angle);

/// Shortest signed arc from `from` to `to`, in (-pi, pi].
inline double angleDiff(double to, double from) { return wrapAngle(to - from); }

/// 90 degree counter-clockwise rotation, i.e. the planar cross-product operator.
inline Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }
inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// SE(2) element. The heading is wrapped on every construction.
class PlanarPose {
 public:
  PlanarPose() = default;
  PlanarPose(double x, double y, double theta) : x_(x), y_(y), theta_(wrapAngle(theta)) {}

  static PlanarPose identity() { return {}; }
  static PlanarPose fromVector(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

  double x() const { return x_; }
  double y() const { return y_; }
  double theta() const { return theta_; }
  Vec2 translation() const { return {x_, y_}; }
  Vec3 vector() const { return {x_, y_, theta_}; }
  Mat2 rotation() const;

  PlanarPose compose(const PlanarPose& other) const;
  PlanarPose inverse() const;

  /// Body-frame point to world frame.
  Vec2 transformFrom(const Vec2& body) const;
  /// World-frame point to body frame.
  Vec2 transformTo(const Vec2& world) const;

  /// Additive update on (x, y, theta); theta re-wrapped.
  PlanarPose retract(const Vec3& delta) const {
    return {x_ + delta.x(), y_ + delta.y(), theta_ + delta.z()};
  }
  /// Component-wise difference this - other, theta via shortest arc.
  Vec3 localCoordinates(const PlanarPose& other) const {
    return {x_ - other.x_, y_ - other.y_, angleDiff(theta_, other.theta_)};
  }

 private:
  double x_ = 0.0;
  double y_ = 0.0;
  double theta_ = 0.0;
};

inline PlanarPose operator*(const PlanarPose& a, const PlanarPose& b) { return a.compose(b); }

PlanarPose se2Compose(const PlanarPose& a, const PlanarPose& b);

struct Pose3 {
  Vec3 translation = Vec3::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  Pose3() = default;
  /// Normalizes the quaternion.
  Pose3(const Vec3& t, const Eigen::Quaterniond& q);
};

/// Pushing plane: origin, unit normal and unit in-plane x-axis.
class Plane3 {
 public:
  Plane3() = default;
  /// Orthonormalizes `xAxis` against `normal`; throws GeometryError if they are parallel.
  Plane3(const Vec3& origin, const Vec3& normal, const Vec3& xAxis);

  static Plane3 xyPlane() { return {}; }

  const Vec3& origin() const { return origin_; }
  const Vec3& normal() const { return normal_; }
  const Vec3& xAxis() const { return xAxis_; }
  Vec3 yAxis() const { return normal_.cross(xAxis_); }

 private:
  Vec3 origin_ = Vec3::Zero();
  Vec3 normal_ = Vec3::UnitZ();
  Vec3 xAxis_ = Vec3::UnitX();
};

/// Projects a 3-D pose into plane coordinates. The heading is the yaw of the body
/// x-axis projected into the plane; throws DegenerateProjection when that axis is
/// within 1e-6 rad of the plane normal.
PlanarPose projectToPlane(const Pose3& pose, const Plane3& plane);

/// Inverse of projectToPlane for poses lying in the plane with in-plane rotation.
Pose3 embedInPlane(const PlanarPose& pose, const Plane3& plane);

struct Disc {
  double radius = 0.0;
};

/// Convex counter-clockwise polygon whose area centroid is the body origin.
struct ConvexPolygon {
  std::vector<Vec2> vertices;
};

/// Body-frame surface geometry of an object or end-effector.
class Shape2D {
 public:
  static Shape2D disc(double radius);
  /// Validates convexity and orientation, then recenters on the area centroid.
  static Shape2D polygon(std::vector<Vec2> vertices);
  static Shape2D box(double width, double height);
  /// Ellipse approximated by a regular 64-gon in parameter space.
  static Shape2D ellipse(double semiAxisX, double semiAxisY, int segments = 64);

  bool isDisc() const { return std::holds_alternative<Disc>(geometry_); }
  const Disc& asDisc() const { return std::get<Disc>(geometry_); }
  const ConvexPolygon& asPolygon() const { return std::get<ConvexPolygon>(geometry_); }

  double area() const;
  /// Radius of the smallest origin-centred circle containing the shape.
  double boundingRadius() const;
  Shape2D scaled(double factor) const;

 private:
  explicit Shape2D(std::variant<Disc, ConvexPolygon> g) : geometry_(std::move(g)) {}
  std::variant<Disc, ConvexPolygon> geometry_;
};

/// Closest boundary point with derivatives in world coordinates.
struct SurfaceProjection {
  Vec2 point;
  double signedDistance = 0.0;
  Mat2 dPoint_dQuery = Mat2::Zero();
  Mat23 dPoint_dPose = Mat23::Zero();
};

/// G(shape(pose), q): closest point on the boundary to q (inside or outside) with
/// derivatives w.r.t. q and the (x, y, theta) pose coordinates.
SurfaceProjection projectOntoSurface(const Shape2D& shape, const PlanarPose& pose,
                                     const Vec2& query);

Vec2 closestSurfacePoint(const Shape2D& shape, const PlanarPose& pose, const Vec2& query);

/// Negative inside, positive outside, zero on the boundary.
double signedDistance(const Shape2D& shape, const PlanarPose& pose, const Vec2& query);

/// Outward unit normal at the boundary point nearest to `query`.
Vec2 outwardNormal(const Shape2D& shape, const PlanarPose& pose, const Vec2& query);

/// Exact open-set overlap test; touching boundaries do not count as overlap.
bool shapesOverlap(const Shape2D& a, const PlanarPose& poseA, const Shape2D& b,
                   const PlanarPose& poseB);

/// End-effector boundary point of minimum signed distance to the object together with
/// its projection onto the object surface and derivatives w.r.t. both poses.
struct DeepestPoint {
  Vec2 delta;
  Vec2 projection;
  double signedDistance = 0.0;
  Mat23 dDelta_dObject = Mat23::Zero();
  Mat23 dDelta_dEe = Mat23::Zero();
  Mat23 dProjection_dObject = Mat23::Zero();
  Mat23 dProjection_dEe = Mat23::Zero();
};

/// Disc end-effectors use the analytic deepest point; polygons search their vertices
/// plus 32 subdivisions per edge.
DeepestPoint deepestPoint(const Shape2D& objShape, const PlanarPose& objPose,
                          const Shape2D& eeShape, const PlanarPose& eePose);

struct Penetration {
  Vec2 delta;
  Vec2 gDelta;
};

/// Empty iff the shapes do not overlap (tangency counts as no overlap).
std::optional<Penetration> deepestPenetration(const Shape2D& objShape, const PlanarPose& objPose,
                                              const Shape2D& eeShape, const PlanarPose& eePose);

}  // namespace pushest
