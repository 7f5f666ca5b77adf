#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pushest/geometry.hpp"

using namespace pushest;

namespace {

/// Dense sampling of a polygon boundary in world coordinates.
std::vector<Vec2> sampleBoundary(const Shape2D& shape, const PlanarPose& pose, int perEdge) {
  std::vector<Vec2> out;
  if (shape.isDisc()) {
    const int n = perEdge * 4;
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * M_PI * i / n;
      out.push_back(pose.transformFrom(shape.asDisc().radius * Vec2(std::cos(a), std::sin(a))));
    }
    return out;
  }
  const auto& v = shape.asPolygon().vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % v.size()];
    for (int k = 0; k < perEdge; ++k) out.push_back(pose.transformFrom(a + (b - a) * (double(k) / perEdge)));
  }
  return out;
}

Vec2 sampledClosest(const std::vector<Vec2>& boundary, const Vec2& q) {
  Vec2 best = boundary.front();
  for (const auto& b : boundary) {
    if ((b - q).norm() < (best - q).norm()) best = b;
  }
  return best;
}

/// Winding-free inside test for convex CCW polygons.
bool insideConvex(const Shape2D& shape, const PlanarPose& pose, const Vec2& q) {
  const Vec2 local = pose.transformTo(q);
  if (shape.isDisc()) return local.norm() < shape.asDisc().radius;
  const auto& v = shape.asPolygon().vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (cross2(v[(i + 1) % v.size()] - v[i], local - v[i]) <= 0.0) return false;
  }
  return true;
}

}  // namespace

TEST(PlanarPose, WrapsThetaToHalfOpenInterval) {
  EXPECT_NEAR(PlanarPose(0, 0, 3 * M_PI).theta(), M_PI, 1e-12);
  EXPECT_NEAR(PlanarPose(0, 0, -M_PI).theta(), M_PI, 1e-12);
  EXPECT_NEAR(PlanarPose(0, 0, 7.0).theta(), 7.0 - 2 * M_PI, 1e-12);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int i = 0; i < 1000; ++i) {
    const double t = PlanarPose(0, 0, u(rng)).theta();
    EXPECT_GT(t, -M_PI);
    EXPECT_LE(t, M_PI);
  }
}

TEST(PlanarPose, ComposeExamples) {
  const PlanarPose a(1, 2, 0.3);
  const PlanarPose r = se2Compose(PlanarPose::identity(), a);
  EXPECT_NEAR(r.x(), 1, 1e-15);
  EXPECT_NEAR(r.y(), 2, 1e-15);
  EXPECT_NEAR(r.theta(), 0.3, 1e-15);

  const PlanarPose c = PlanarPose(1, 0, M_PI / 2) * PlanarPose(1, 0, 0);
  EXPECT_NEAR(c.x(), 1, 1e-12);
  EXPECT_NEAR(c.y(), 1, 1e-12);
  EXPECT_NEAR(c.theta(), M_PI / 2, 1e-12);
}

TEST(PlanarPose, GroupAxiomsOnRandomPoses) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 500; ++i) {
    const PlanarPose a(u(rng), u(rng), u(rng));
    const PlanarPose b(u(rng), u(rng), u(rng));
    const PlanarPose c(u(rng), u(rng), u(rng));
    const Vec3 e = (a * a.inverse()).vector();
    EXPECT_LT(e.cwiseAbs().maxCoeff(), 1e-12);
    const Vec3 left = (PlanarPose::identity() * a).localCoordinates(a);
    EXPECT_LT(left.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(((a * b) * c).localCoordinates(a * (b * c)).cwiseAbs().maxCoeff(), 1e-12);
    const Vec2 p(u(rng), u(rng));
    EXPECT_LT((a.transformTo(a.transformFrom(p)) - p).norm(), 1e-12);
  }
}

TEST(PlanarPose, LocalCoordinatesUseShortestArc) {
  const Vec3 d = PlanarPose(0, 0, 3.1).localCoordinates(PlanarPose(0, 0, -3.1));
  EXPECT_NEAR(d.z(), 6.2 - 2 * M_PI, 1e-12);
}

TEST(Pose3, NormalizesQuaternion) {
  const Pose3 p(Vec3(1, 2, 3), Eigen::Quaterniond(2.0, 0.0, 0.0, 2.0));
  EXPECT_NEAR(p.rotation.norm(), 1.0, 1e-12);
}

TEST(Plane3, OrthonormalizesAxes) {
  const Plane3 plane(Vec3(0, 0, 1), Vec3(0, 0, 2), Vec3(1, 0, 0.5));
  EXPECT_NEAR(plane.normal().norm(), 1.0, 1e-12);
  EXPECT_NEAR(plane.xAxis().norm(), 1.0, 1e-12);
  EXPECT_NEAR(plane.normal().dot(plane.xAxis()), 0.0, 1e-12);
  EXPECT_THROW(Plane3(Vec3::Zero(), Vec3::UnitZ(), Vec3::UnitZ()), GeometryError);
}

TEST(ProjectToPlane, AxisAlignedExamples) {
  const Pose3 p(Vec3(1, 2, 5), Eigen::Quaterniond(Eigen::AngleAxisd(0.4, Vec3::UnitZ())));
  const PlanarPose q = projectToPlane(p, Plane3::xyPlane());
  EXPECT_NEAR(q.x(), 1, 1e-12);
  EXPECT_NEAR(q.y(), 2, 1e-12);
  EXPECT_NEAR(q.theta(), 0.4, 1e-12);

  const PlanarPose o = projectToPlane(Pose3(), Plane3::xyPlane());
  EXPECT_NEAR(o.vector().norm(), 0.0, 1e-15);
}

TEST(ProjectToPlane, TiltedRotationMatchesProjectedAxis) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  const Plane3 plane(Vec3(0.1, -0.2, 0.3), Vec3(0.1, 0.2, 1.0), Vec3(1, 0, 0));
  for (int i = 0; i < 200; ++i) {
    const Eigen::Quaterniond q = Eigen::Quaterniond(u(rng), u(rng), u(rng), u(rng)).normalized();
    const Vec3 t(u(rng), u(rng), u(rng));
    const Vec3 axis = q * Vec3::UnitX();
    if (std::abs(axis.dot(plane.normal())) > 0.99) continue;
    const PlanarPose pp = projectToPlane(Pose3(t, q), plane);
    // Oracle: express the offset and the rotated x-axis in plane coordinates directly.
    const Vec3 rel = t - plane.origin();
    EXPECT_NEAR(pp.x(), rel.dot(plane.xAxis()), 1e-12);
    EXPECT_NEAR(pp.y(), rel.dot(plane.yAxis()), 1e-12);
    EXPECT_NEAR(angleDiff(pp.theta(), std::atan2(axis.dot(plane.yAxis()), axis.dot(plane.xAxis()))), 0.0, 1e-12);
  }
}

TEST(ProjectToPlane, DegenerateWhenBodyAxisAlongNormal) {
  const Pose3 p(Vec3::Zero(), Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitY())));
  EXPECT_THROW(projectToPlane(p, Plane3::xyPlane()), DegenerateProjection);
}

TEST(ProjectToPlane, EmbedThenProjectIsIdentity) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3, 3);
  const Plane3 plane(Vec3(1, 2, 3), Vec3(0.3, -0.1, 1.0), Vec3(0, 1, 0));
  for (int i = 0; i < 200; ++i) {
    const PlanarPose a(u(rng), u(rng), u(rng));
    const PlanarPose b = projectToPlane(embedInPlane(a, plane), plane);
    EXPECT_LT(b.localCoordinates(a).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Shape2D, PolygonValidationAndCentroid) {
  EXPECT_THROW(Shape2D::disc(0.0), GeometryError);
  EXPECT_THROW(Shape2D::polygon({{0, 0}, {0, 1}, {1, 0}}), GeometryError);           // clockwise
  EXPECT_THROW(Shape2D::polygon({{0, 0}, {2, 0}, {1, 0.2}, {2, 2}, {0, 2}}), GeometryError);  // non-convex
  const Shape2D tri = Shape2D::polygon({{0, 0}, {3, 0}, {0, 3}});
  Vec2 sum = Vec2::Zero();
  for (const auto& v : tri.asPolygon().vertices) sum += v;
  EXPECT_LT((sum / 3.0).norm(), 1e-12);  // triangle area centroid = vertex mean
  EXPECT_NEAR(tri.area(), 4.5, 1e-12);
  EXPECT_NEAR(Shape2D::box(0.1, 0.2).area(), 0.02, 1e-15);
  EXPECT_NEAR(Shape2D::disc(2.0).boundingRadius(), 2.0, 1e-15);
}

TEST(Shape2D, EllipseIsA64GonInscribedInTheEllipse) {
  const Shape2D e = Shape2D::ellipse(0.06, 0.04);
  ASSERT_EQ(e.asPolygon().vertices.size(), 64u);
  for (const auto& v : e.asPolygon().vertices) {
    EXPECT_NEAR(std::pow(v.x() / 0.06, 2) + std::pow(v.y() / 0.04, 2), 1.0, 1e-12);
  }
}

TEST(ClosestSurfacePoint, Examples) {
  const Shape2D disc = Shape2D::disc(1.0);
  const Shape2D square = Shape2D::box(2.0, 2.0);
  EXPECT_LT((closestSurfacePoint(disc, {}, Vec2(2, 0)) - Vec2(1, 0)).norm(), 1e-12);
  EXPECT_LT((closestSurfacePoint(square, {}, Vec2(2, 2)) - Vec2(1, 1)).norm(), 1e-12);
  EXPECT_LT((closestSurfacePoint(square, {}, Vec2(0.2, 0.1)) - Vec2(1.0, 0.1)).norm(), 1e-12);
}

TEST(ClosestSurfacePoint, MatchesDenseSamplingOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  const std::vector<Shape2D> shapes = {Shape2D::box(2.0, 1.0), Shape2D::disc(0.7),
                                       Shape2D::polygon({{0, 0}, {1.5, 0.2}, {0.5, 1.2}})};
  for (const auto& shape : shapes) {
    const PlanarPose pose(0.3, -0.2, 0.7);
    const auto boundary = sampleBoundary(shape, pose, 25000);  // 1e5 samples for the square
    for (int i = 0; i < 50; ++i) {
      const Vec2 q = pose.translation() + 1.5 * Vec2(u(rng), u(rng));
      const Vec2 g = closestSurfacePoint(shape, pose, q);
      const Vec2 o = sampledClosest(boundary, q);
      EXPECT_NEAR((g - q).norm(), (o - q).norm(), 1e-4);
      const double sd = signedDistance(shape, pose, q);
      EXPECT_NEAR(std::abs(sd), (g - q).norm(), 1e-12);
      EXPECT_EQ(sd < 0, insideConvex(shape, pose, q));
    }
  }
}

TEST(SignedDistance, DiscExamples) {
  EXPECT_NEAR(signedDistance(Shape2D::disc(1.0), {}, Vec2(2, 0)), 1.0, 1e-15);
  EXPECT_NEAR(signedDistance(Shape2D::disc(1.0), {}, Vec2(0, 0)), -1.0, 1e-15);
}

TEST(SignedDistance, ProjectionLiesOnBoundaryAndIsLipschitz) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  const Shape2D shape = Shape2D::ellipse(0.6, 0.3);
  const PlanarPose pose(0.1, 0.2, -0.4);
  for (int i = 0; i < 300; ++i) {
    const Vec2 q = Vec2(u(rng), u(rng));
    EXPECT_LT(std::abs(signedDistance(shape, pose, closestSurfacePoint(shape, pose, q))), 1e-9);
    const Vec2 dir = Vec2(u(rng), u(rng)).normalized();
    const double h = 1e-3;
    double prev = signedDistance(shape, pose, q);
    for (int k = 1; k <= 20; ++k) {
      const double cur = signedDistance(shape, pose, q + k * h * dir);
      EXPECT_LE(std::abs(cur - prev), h * (1.0 + 1e-9));
      prev = cur;
    }
  }
}

TEST(SurfaceProjection, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  const Shape2D shape = Shape2D::box(1.0, 0.6);
  for (int i = 0; i < 100; ++i) {
    const PlanarPose pose(u(rng), u(rng), 3 * u(rng));
    const Vec2 q = pose.translation() + Vec2(u(rng), u(rng));
    const SurfaceProjection s = projectOntoSurface(shape, pose, q);
    const double h = 1e-7;
    for (int k = 0; k < 2; ++k) {
      Vec2 dq = Vec2::Zero();
      dq(k) = h;
      const Vec2 fd = (closestSurfacePoint(shape, pose, q + dq) - closestSurfacePoint(shape, pose, q - dq)) / (2 * h);
      EXPECT_LT((fd - s.dPoint_dQuery.col(k)).norm(), 1e-5);
    }
    for (int k = 0; k < 3; ++k) {
      Vec3 d = Vec3::Zero();
      d(k) = h;
      const Vec2 fd =
          (closestSurfacePoint(shape, pose.retract(d), q) - closestSurfacePoint(shape, pose.retract(-d), q)) / (2 * h);
      EXPECT_LT((fd - s.dPoint_dPose.col(k)).norm(), 1e-5);
    }
  }
}

TEST(DeepestPenetration, Examples) {
  const Shape2D square = Shape2D::box(2.0, 2.0);
  const Shape2D ee = Shape2D::disc(0.5);
  EXPECT_FALSE(deepestPenetration(square, {}, ee, PlanarPose(2.0, 0, 0)));
  const auto pen = deepestPenetration(square, {}, ee, PlanarPose(1.25, 0, 0));
  ASSERT_TRUE(pen);
  EXPECT_LT((pen->delta - Vec2(0.75, 0)).norm(), 1e-12);
  EXPECT_LT((pen->gDelta - Vec2(1.0, 0)).norm(), 1e-12);
  EXPECT_FALSE(deepestPenetration(square, {}, ee, PlanarPose(1.5, 0, 0)));  // tangency
}

TEST(DeepestPenetration, MatchesBoundarySamplingOracle) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  const Shape2D obj = Shape2D::box(1.0, 0.8);
  const std::vector<Shape2D> ees = {Shape2D::disc(0.1), Shape2D::box(0.1, 0.06)};
  for (const auto& ee : ees) {
    int hits = 0;
    // End-effectors straddle the right face away from the corners.
    for (int i = 0; i < 200 && hits < 40; ++i) {
      const PlanarPose ep(0.5 + 0.05 * u(rng), 0.05 * u(rng), 3 * u(rng));
      const auto pen = deepestPenetration(obj, {}, ee, ep);
      if (!pen) continue;
      ++hits;
      double oracle = 1e9;
      for (const auto& b : sampleBoundary(ee, ep, 4000)) oracle = std::min(oracle, signedDistance(obj, {}, b));
      // Polygon end-effectors are searched on a coarser grid; tolerance covers its error.
      EXPECT_NEAR(signedDistance(obj, {}, pen->delta), oracle, ee.isDisc() ? 1e-6 : 1e-4);
      EXPECT_LT((closestSurfacePoint(obj, {}, pen->delta) - pen->gDelta).norm(), 1e-12);
    }
    EXPECT_GT(hits, 10);
  }
}

TEST(DeepestPenetration, OverlapDecisionIsSymmetric) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  const Shape2D a = Shape2D::polygon({{0, 0}, {0.8, 0.1}, {0.3, 0.7}});
  const Shape2D b = Shape2D::disc(0.25);
  const Shape2D c = Shape2D::box(0.4, 0.3);
  for (int i = 0; i < 500; ++i) {
    const PlanarPose pa(0, 0, u(rng));
    const PlanarPose pb(0.8 * u(rng), 0.8 * u(rng), 3 * u(rng));
    for (const Shape2D* other : {&b, &c}) {
      const bool ab = deepestPenetration(a, pa, *other, pb).has_value();
      const bool ba = deepestPenetration(*other, pb, a, pa).has_value();
      EXPECT_EQ(ab, ba);
      EXPECT_EQ(ab, shapesOverlap(a, pa, *other, pb));
    }
  }
}
