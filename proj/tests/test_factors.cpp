#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pushest/factors.hpp"

using namespace pushest;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(Residuals, MeasurementExamples) {
  EXPECT_LT(measurementResidual(PlanarPose(1, 2, 0.3), PlanarPose(1, 2, 0.3)).norm(), 1e-15);
  const Vec3 r = measurementResidual(PlanarPose(0, 0, 3.1), PlanarPose(0, 0, -3.1));
  EXPECT_NEAR(r.z(), 6.2 - 2 * M_PI, 1e-12);
  EXPECT_NEAR(r.z(), -0.083, 1e-3);
  const Vec4 c = measurementResidual(ContactForceState{{1, 0}, {0, 2}}, ContactForceState{{1.1, 0}, {0, 1.5}});
  EXPECT_LT((c - Vec4(-0.1, 0, 0, 0.5)).norm(), 1e-12);
}

TEST(Residuals, PriorSignConvention) {
  EXPECT_LT((priorResidual(PlanarPose(0.1, 0, 0), PlanarPose()) - Vec3(0.1, 0, 0)).norm(), 1e-15);
  EXPECT_LT(priorResidual(PlanarPose(1, 2, 3), PlanarPose(1, 2, 3)).norm(), 1e-15);
}

TEST(Residuals, ContactSurfaceExamples) {
  const Shape2D disc = Shape2D::disc(1.0);
  EXPECT_LT(contactSurfaceResidual(disc, {}, Vec2(0, 1)).norm(), 1e-12);
  EXPECT_LT((contactSurfaceResidual(disc, {}, Vec2(2, 0)) - Vec2(-1, 0)).norm(), 1e-12);
  const Shape2D square = Shape2D::box(2, 2);
  const Vec2 p(0.3, 0.5);
  EXPECT_LT((contactSurfaceResidual(square, {}, p) - (Vec2(0.3, 1.0) - p)).norm(), 1e-12);
}

TEST(Residuals, IntersectionExamples) {
  const Shape2D square = Shape2D::box(2, 2);
  const Shape2D ee = Shape2D::disc(0.5);
  EXPECT_LT(intersectionResidual(square, {}, ee, PlanarPose(2.0, 0, 0)).norm(), 1e-15);
  EXPECT_LT((intersectionResidual(square, {}, ee, PlanarPose(1.25, 0, 0)) - Vec2(0.25, 0)).norm(), 1e-12);
  EXPECT_LT(intersectionResidual(square, {}, ee, PlanarPose(1.5, 0, 0)).norm(), 1e-15);
}

TEST(Residuals, ObjectEeGapIsZeroAtTouchingContact) {
  const Shape2D square = Shape2D::box(2, 2);
  const Shape2D ee = Shape2D::disc(0.5);
  EXPECT_LT(objectEeGapResidual(square, {}, ee, PlanarPose(1.5, 0.3, 0.2)).norm(), 1e-12);
  EXPECT_LT((objectEeGapResidual(square, {}, ee, PlanarPose(1.7, 0, 0)) - Vec2(-0.2, 0)).norm(), 1e-12);
  EXPECT_LT((objectEeGapResidual(square, {}, ee, PlanarPose(1.25, 0, 0)) - Vec2(0.25, 0)).norm(), 1e-12);
}

TEST(Residuals, ConstVelocityExamples) {
  EXPECT_LT(constVelocityResidual(PlanarPose(0, 0, 0), PlanarPose(1, 0, 0), PlanarPose(2, 0, 0), 1, 1).norm(), 1e-15);
  EXPECT_LT((constVelocityResidual(PlanarPose(0, 0, 0), PlanarPose(1, 0, 0), PlanarPose(1, 0, 0), 1, 1) -
             Vec3(1, 0, 0)).norm(),
            1e-15);
  EXPECT_THROW(constVelocityResidual({}, {}, {}, 0.0, 1.0), NonPositiveTimestep);
  EXPECT_THROW(constVelocityResidual({}, {}, {}, 1.0, -1.0), NonPositiveTimestep);
}

TEST(Residuals, ConstVelocityVanishesOnInterpolatedPoses) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 100; ++i) {
    const Vec3 a(u(rng), u(rng), u(rng));
    const Vec3 vel(u(rng), u(rng), 0.5 * u(rng));
    const double dt1 = 0.5 + std::abs(u(rng)), dt2 = 0.5 + std::abs(u(rng));
    const PlanarPose p0 = PlanarPose::fromVector(a);
    const PlanarPose p1 = PlanarPose::fromVector(a + vel * dt1);
    const PlanarPose p2 = PlanarPose::fromVector(a + vel * (dt1 + dt2));
    EXPECT_LT(constVelocityResidual(p0, p1, p2, dt1, dt2).norm(), 1e-12);
  }
}

TEST(Residuals, QuasiStaticExamples) {
  // v = (1, 0), omega = 1, f = (0, 1), tau = 1, c = 1.
  const Vec2 r = quasiStaticResidual(PlanarPose(0, 0, 0), PlanarPose(1, 0, 1), {Vec2(2, 0), Vec2(0, 1)}, 1.0, 1.0);
  EXPECT_LT((r - Vec2(1, -1)).norm(), 1e-12);
  // Pure translation with the force through the centre of mass.
  const Vec2 z = quasiStaticResidual(PlanarPose(0, 0, 0.2), PlanarPose(0.01, 0, 0.2), {Vec2(-0.5, 0), Vec2(3, 0)},
                                     0.03, 0.04);
  EXPECT_LT(z.norm(), 1e-15);
}

TEST(NoiseModel, ValidatesAndWhitens) {
  EXPECT_THROW(NoiseModel(MatrixXd::Identity(2, 2) * -1.0), std::invalid_argument);
  MatrixXd asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(NoiseModel{asym}, std::invalid_argument);

  MatrixXd cov(2, 2);
  cov << 4, 1, 1, 3;
  const NoiseModel n(cov);
  const VectorXd r = Vec2(0.3, -0.7);
  EXPECT_NEAR(n.whiten(r).squaredNorm(), r.dot(cov.inverse() * r), 1e-12);
  const NoiseModel d = NoiseModel::fromSigmas(Vec3(0.5, 2.0, 0.1));
  const VectorXd x = Vec3(1, 1, 1);
  EXPECT_LT((d.whiten(x) - Vec3(2.0, 0.5, 10.0)).norm(), 1e-12);
  EXPECT_LT((d.whiten(MatrixXd(MatrixXd::Identity(3, 3))) - MatrixXd(Vec3(2.0, 0.5, 10.0).asDiagonal())).norm(),
            1e-12);
}

TEST(Values, KeyOrderIsTimestepMajor) {
  EXPECT_LT(contactKey(0), objectKey(1));
  EXPECT_LT(objectKey(3), eeKey(3));
  EXPECT_LT(eeKey(3), contactKey(3));
  Values v;
  v.insert(contactKey(1), ContactForceState{});
  v.insert(objectKey(2), PlanarPose());
  v.insert(eeKey(0), PlanarPose());
  std::vector<VariableKey> order;
  for (const auto& [k, value] : v) order.push_back(k);
  EXPECT_EQ(order, (std::vector<VariableKey>{eeKey(0), contactKey(1), objectKey(2)}));
  EXPECT_THROW(v.at(objectKey(9)), std::out_of_range);
}

TEST(Factors, MeasurementFactorHasIdentityJacobian) {
  Values v;
  v.insert(objectKey(0), PlanarPose(0.2, 0.1, 1.0));
  const auto f = makePoseMeasurement(objectKey(0), PlanarPose(0, 0, 0.5), NoiseModel::unit(3));
  std::vector<MatrixXd> j;
  f->evaluate(v, &j);
  ASSERT_EQ(j.size(), 1u);
  EXPECT_LT((j[0] - MatrixXd::Identity(3, 3)).norm(), 1e-15);
  EXPECT_EQ(f->kind(), FactorKind::MeasurementPose);
}

TEST(Factors, ConstVelocityJacobianBlocks) {
  Values v;
  v.insert(objectKey(0), PlanarPose(0, 0, 0));
  v.insert(objectKey(1), PlanarPose(1, 0.2, 0.1));
  v.insert(objectKey(2), PlanarPose(2.1, 0.3, 0.3));
  const auto f = makeConstVelocity(objectKey(0), objectKey(1), objectKey(2), 1.0, 1.0, NoiseModel::unit(3));
  std::vector<MatrixXd> j;
  f->evaluate(v, &j);
  ASSERT_EQ(j.size(), 3u);
  EXPECT_LT((j[0] + MatrixXd::Identity(3, 3)).norm(), 1e-15);
  EXPECT_LT((j[1] - 2.0 * MatrixXd::Identity(3, 3)).norm(), 1e-15);
  EXPECT_LT((j[2] + MatrixXd::Identity(3, 3)).norm(), 1e-15);
  EXPECT_THROW(makeConstVelocity(objectKey(0), objectKey(1), objectKey(2), 0.0, 1.0, NoiseModel::unit(3)),
               NonPositiveTimestep);
}

TEST(Factors, PartialContactForceMeasurementDropsRows) {
  const NoiseModel n = NoiseModel::fromSigmas(Vec4(0.1, 0.2, 0.3, 0.4));
  const auto pointOnly = makeContactForceMeasurement(contactKey(0), {Vec2(1, 1), Vec2(5, 5)}, true, false, n);
  const auto forceOnly = makeContactForceMeasurement(contactKey(0), {Vec2(1, 1), Vec2(5, 5)}, false, true, n);
  EXPECT_EQ(pointOnly->dim(), 2);
  EXPECT_EQ(forceOnly->dim(), 2);
  Values v;
  v.insert(contactKey(0), ContactForceState{Vec2(1.1, 1.0), Vec2(0, 0)});
  EXPECT_LT((pointOnly->evaluate(v) - Vec2(0.1, 0.0)).norm(), 1e-12);
  EXPECT_NEAR(pointOnly->cost(v), 1.0, 1e-12);
  EXPECT_LT((forceOnly->evaluate(v) - Vec2(-5, -5)).norm(), 1e-12);
}

TEST(Factors, LibraryNumericJacobianMatchesAnalytic) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  const Shape2D obj = Shape2D::box(0.1, 0.08);
  const Shape2D ee = Shape2D::disc(0.01);
  for (int i = 0; i < 50; ++i) {
    Values v;
    const PlanarPose x0(0.1 * u(rng), 0.1 * u(rng), u(rng));
    v.insert(objectKey(0), x0);
    v.insert(objectKey(1), x0.retract(Vec3(0.01 * u(rng), 0.01 * u(rng), 0.05 * u(rng))));
    v.insert(eeKey(1), PlanarPose(x0.x() + 0.08 * u(rng), x0.y() + 0.08 * u(rng), u(rng)));
    v.insert(contactKey(1), ContactForceState{x0.translation() + Vec2(0.05 * u(rng), 0.05 * u(rng)),
                                              Vec2(3 * u(rng), 3 * u(rng))});
    const std::vector<FactorPtr> fs = {
        makeSurfaceContact(objectKey(1), contactKey(1), obj, NoiseModel::isotropic(2, 1e-3)),
        makeSurfaceContact(eeKey(1), contactKey(1), ee, NoiseModel::isotropic(2, 1e-3)),
        makeObjectEeContact(objectKey(1), eeKey(1), obj, ee, NoiseModel::isotropic(2, 1e-3)),
        makeQuasiStatic(objectKey(0), objectKey(1), contactKey(1), 0.04, 0.04, NoiseModel::isotropic(2, 1e-5)),
    };
    for (const auto& f : fs) {
      std::vector<MatrixXd> a;
      f->evaluate(v, &a);
      const auto n = numericJacobian(*f, v);
      ASSERT_EQ(a.size(), n.size());
      for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_LE((a[k] - n[k]).norm(), 1e-5 * std::max({a[k].norm(), n[k].norm(), 1e-12})) << toString(f->kind());
      }
    }
  }
}

TEST(Factors, IntersectionFactorVanishesWhenSeparated) {
  Values v;
  v.insert(objectKey(0), PlanarPose());
  v.insert(eeKey(0), PlanarPose(1.0, 0, 0));
  const auto f = makeIntersection(objectKey(0), eeKey(0), Shape2D::box(0.2, 0.2), Shape2D::disc(0.05),
                                  NoiseModel::unit(2));
  std::vector<MatrixXd> j;
  EXPECT_LT(f->evaluate(v, &j).norm(), 1e-15);
  EXPECT_LT(j[0].norm() + j[1].norm(), 1e-15);
}

TEST(Factors, LinearizedPriorIsAffineInLocalCoordinates) {
  MatrixXd r(2, 3);
  r << 1, 2, 3, 0, 1, -1;
  const VectorXd d = Vec2(0.5, -0.5);
  const PlanarPose lin(1, 2, 0.3);
  const auto f = makeLinearizedPrior({objectKey(4)}, {lin}, r, d);
  Values v;
  v.insert(objectKey(4), lin);
  EXPECT_LT((f->evaluate(v) - d).norm(), 1e-15);
  const Vec3 delta(0.01, -0.02, 0.03);
  v.insert(objectKey(4), lin.retract(delta));
  EXPECT_LT((f->evaluate(v) - (r * delta + d)).norm(), 1e-12);
}
