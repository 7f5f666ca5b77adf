#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "pushest/dataio.hpp"

using namespace pushest;

namespace {

GroundTruthTrajectory sampleTruth(double duration = 4.0) {
  const Shape2D obj = Shape2D::box(0.1, 0.08);
  const PushScene scene{obj, Shape2D::disc(0.01), limitSurfaceConstants(obj, 0.5, 1.0)};
  PusherPathSpec spec;
  spec.duration = duration;
  return simulatePush(generatePusherPath(PlanarPose(-0.2, 0.005, 0.0), spec), PlanarPose(), scene, spec.dt);
}

std::filesystem::path tempPath(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("pushest_test_" + name);
}

}  // namespace

TEST(Trajectory, RoundTripKeepsMissingEntries) {
  MeasuredTrajectory traj = measuredFromGroundTruth(sampleTruth());
  traj.steps[3].y.reset();
  traj.steps[4].w.reset();
  traj.steps[5].alpha.reset();
  traj.steps[6].inContact = false;
  traj.noise = NoiseSpec::gaussian(0.005, 0.05, 0.005, 0.5, 9);
  const auto path = tempPath("roundtrip.json");
  saveTrajectory(traj, path);
  const MeasuredTrajectory back = loadTrajectory(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.size(), traj.size());
  EXPECT_FALSE(back.steps[3].y.has_value());
  EXPECT_FALSE(back.steps[4].w.has_value());
  EXPECT_FALSE(back.steps[5].alpha.has_value());
  EXPECT_FALSE(back.steps[6].inContact);
  ASSERT_TRUE(back.noise.has_value());
  EXPECT_EQ(back.noise->seed, 9u);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    EXPECT_EQ(back.steps[i].t, traj.steps[i].t);
    if (traj.steps[i].y) EXPECT_LT(back.objectMeasurement(i)->localCoordinates(*traj.objectMeasurement(i)).norm(), 1e-15);
  }
  EXPECT_EQ(dumpTrajectory(back), dumpTrajectory(traj));
}

TEST(Trajectory, RejectsBadInput) {
  MeasuredTrajectory traj = measuredFromGroundTruth(sampleTruth(1.0));
  traj.steps[2].t = traj.steps[1].t;
  EXPECT_THROW(validate(traj), NonMonotonicTimestamps);

  nlohmann::json j = toJson(measuredFromGroundTruth(sampleTruth(1.0)));
  j["schema_version"] = 99;
  EXPECT_THROW(fromJson(j), SchemaVersionError);
  j.erase("schema_version");
  EXPECT_THROW(fromJson(j), ParseError);

  const auto path = tempPath("garbage.json");
  std::ofstream(path) << "{not json";
  EXPECT_THROW(loadTrajectory(path), ParseError);
  std::filesystem::remove(path);
  EXPECT_THROW(loadTrajectory(tempPath("does_not_exist.json")), IoError);
}

TEST(MitImport, ProjectsThreeDimensionalPoses) {
  const double yaw = 0.4;
  const Eigen::Quaterniond q(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
  nlohmann::json log;
  log["tip_pose"] = {{0.0, 0.1, 0.2, 0.05, q.w(), q.x(), q.y(), q.z()},
                     {0.1, 0.11, 0.2, 0.05, q.w(), q.x(), q.y(), q.z()},
                     {0.2, 0.12, 0.2, 0.05, q.w(), q.x(), q.y(), q.z()}};
  log["object_pose"] = {{0.01, 0.2, 0.2, 0.0}, {0.21, 0.22, 0.2, 0.1}};
  log["ft_wrench"] = {{0.0, 1.0, 2.0, 3.0}, {0.1, 1.5, 2.5, 3.5}, {0.2, 2.0, 3.0, 4.0}};
  const Shape2D obj = Shape2D::box(0.1, 0.1);
  const MeasuredTrajectory traj =
      importMitLog(log, obj, Shape2D::disc(0.005), limitSurfaceConstants(obj, 0.5, 1.0));
  ASSERT_EQ(traj.size(), 3u);
  const PlanarPose tip = *traj.eeMeasurement(1);
  EXPECT_NEAR(tip.x(), 0.11, 1e-12);
  EXPECT_NEAR(tip.y(), 0.2, 1e-12);
  EXPECT_NEAR(tip.theta(), yaw, 1e-12);
  EXPECT_TRUE(traj.objectMeasurement(0).has_value());
  EXPECT_FALSE(traj.objectMeasurement(1).has_value());
  EXPECT_NEAR(traj.objectMeasurement(2)->theta(), 0.1, 1e-12);
  ASSERT_TRUE(traj.steps[1].alpha.has_value());
  EXPECT_NEAR((*traj.steps[1].alpha)(0), 1.5, 1e-12);
  EXPECT_NEAR((*traj.steps[1].alpha)(1), 2.5, 1e-12);

  log["tip_pose"][2][0] = 0.05;
  EXPECT_THROW(importMitLog(log, obj, Shape2D::disc(0.005), limitSurfaceConstants(obj, 0.5, 1.0)),
               NonMonotonicTimestamps);
}

TEST(Noise, ZeroSigmaLeavesMeasurementsUnchanged) {
  const MeasuredTrajectory clean = measuredFromGroundTruth(sampleTruth());
  const MeasuredTrajectory noisy = injectNoise(clean, NoiseSpec::gaussian(0, 0, 0, 0, 5));
  for (std::size_t i = 0; i < clean.size(); ++i) {
    EXPECT_LT(noisy.objectMeasurement(i)->localCoordinates(*clean.objectMeasurement(i)).norm(), 1e-15);
    EXPECT_LT((*noisy.steps[i].w - *clean.steps[i].w).norm(), 1e-15);
    EXPECT_LT((*noisy.steps[i].alpha - *clean.steps[i].alpha).norm(), 1e-15);
  }
}

TEST(Noise, SameSeedIsDeterministicAndSeedsDiffer) {
  const MeasuredTrajectory clean = measuredFromGroundTruth(sampleTruth());
  const auto spec = NoiseSpec::gaussian(0.005, 0.05, 0.005, 0.5, 17);
  EXPECT_EQ(dumpTrajectory(injectNoise(clean, spec)), dumpTrajectory(injectNoise(clean, spec)));
  auto other = spec;
  other.seed = 18;
  EXPECT_NE(dumpTrajectory(injectNoise(clean, spec)), dumpTrajectory(injectNoise(clean, other)));
}

TEST(Noise, EmpiricalStandardDeviationMatches) {
  // 100 steps x 2 components x 50 repeats = 1e4 samples per channel.
  const MeasuredTrajectory clean = measuredFromGroundTruth(sampleTruth());
  std::vector<double> dx, df;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const MeasuredTrajectory noisy = injectNoise(clean, NoiseSpec::gaussian(0.005, 0.05, 0.005, 0.5, 100 + s));
    for (std::size_t i = 0; i < clean.size(); ++i) {
      const Vec2 e = *noisy.steps[i].w - *clean.steps[i].w;
      dx.insert(dx.end(), {e.x(), e.y()});
      const Eigen::VectorXd f = *noisy.steps[i].alpha - *clean.steps[i].alpha;
      df.insert(df.end(), {f(0), f(1)});
    }
  }
  auto stddev = [](const std::vector<double>& v) {
    double m = 0, q = 0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) q += (x - m) * (x - m);
    return std::sqrt(q / (v.size() - 1));
  };
  EXPECT_NEAR(stddev(dx), 0.005, 0.05 * 0.005);
  EXPECT_NEAR(stddev(df), 0.5, 0.05 * 0.5);
}

TEST(Noise, BimodalTriangularHasTwoModes) {
  std::mt19937_64 rng(3);
  const double mode = 0.3, half = 0.2;
  std::vector<int> hist(12, 0);
  double sumSq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = sampleBimodalTriangular(rng, mode, half);
    ASSERT_LE(std::abs(x), mode + half);
    ASSERT_GE(std::abs(x), mode - half);
    sumSq += x * x;
    ++hist[std::min(11, static_cast<int>((x + 0.6) / 0.1))];
  }
  // Bins [-0.4,-0.2) and [0.2,0.4) hold the modes; the centre bins are empty.
  EXPECT_GT(hist[2] + hist[3], 4 * (hist[1] + hist[4]) / 3);
  EXPECT_GT(hist[8] + hist[9], 4 * (hist[7] + hist[10]) / 3);
  EXPECT_EQ(hist[5] + hist[6], 0);
  EXPECT_NEAR(hist[2] + hist[3] + hist[1] + hist[4], n / 2, 0.02 * n);
  const auto spec = NoiseSpec::bimodalContactForce(0.01, 0.005, mode, half, 0);
  EXPECT_NEAR(std::sqrt(sumSq / n), spec.effectiveStd(NoiseChannel::Force), 0.01 * spec.effectiveStd(NoiseChannel::Force));
}

TEST(Occlusion, DropsWindowOfObjectPoses) {
  const MeasuredTrajectory clean = measuredFromGroundTruth(sampleTruth());
  ASSERT_EQ(clean.size(), 100u);
  const MeasuredTrajectory occ = applyOcclusion(clean, 0.35, 0.65);
  int missing = 0;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    if (!occ.steps[i].y) {
      ++missing;
      EXPECT_GE(i, 35u);
      EXPECT_LT(i, 65u);
    }
    EXPECT_TRUE(occ.steps[i].z.has_value());
  }
  EXPECT_EQ(missing, 30);
  EXPECT_EQ(dumpTrajectory(applyOcclusion(clean, 0.5, 0.5)), dumpTrajectory(clean));
  EXPECT_THROW(applyOcclusion(clean, 0.7, 0.3), std::invalid_argument);
}

TEST(Metrics, ZeroAndConstantOffsets) {
  const GroundTruthTrajectory gt = sampleTruth();
  std::vector<StateSample> est;
  for (const auto& s : gt.steps) est.push_back({s.t, s.object, s.ee, s.contact, s.force});
  const Metrics zero = computeMetrics(est, gt.steps);
  EXPECT_EQ(zero.objectTranslation.rmse, 0.0);
  EXPECT_EQ(zero.contact.rmse, 0.0);
  EXPECT_EQ(zero.forceDirection.mae, 0.0);

  for (auto& e : est) {
    e.contact = *e.contact + Vec2(0.003, 0.004);
    e.object = PlanarPose(e.object->x() + 0.005, e.object->y(), e.object->theta());
    const Vec2 f = *e.force;
    e.force = Vec2(-f.y(), f.x());
  }
  const Metrics off = computeMetrics(est, gt.steps);
  EXPECT_NEAR(off.contact.rmse, 0.5, 1e-9);
  EXPECT_NEAR(off.contact.mae, 0.5, 1e-9);
  EXPECT_NEAR(off.objectTranslation.rmse, 0.5, 1e-9);
  EXPECT_NEAR(off.forceDirection.mae, 90.0, 1e-9);
  EXPECT_NEAR(off.forceMagnitude.mae, 0.0, 1e-9);
}

TEST(Metrics, RmseDominatesMae) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> errs;
    for (int i = 0; i < 30; ++i) errs.push_back(std::abs(n(rng)));
    const ChannelStats s = summarize(errs);
    EXPECT_GE(s.rmse, s.mae);
    EXPECT_NEAR(s.rmse * s.rmse, s.mae * s.mae + s.sigma * s.sigma, 1e-9);
  }
}

TEST(Metrics, LengthMismatchThrows) {
  const GroundTruthTrajectory gt = sampleTruth(1.0);
  std::vector<StateSample> est(gt.steps.size() - 1);
  EXPECT_THROW(computeMetrics(est, gt.steps), LengthMismatch);
}

TEST(Results, CsvRoundTrip) {
  const GroundTruthTrajectory gt = sampleTruth(1.0);
  std::vector<StateSample> est;
  std::vector<StateCovariance> cov;
  for (const auto& s : gt.steps) {
    est.push_back({s.t, s.object, s.ee, s.contact, s.force});
    StateCovariance c;
    c.object = Eigen::Matrix3d::Identity() * 1e-4;
    c.ee = Eigen::Matrix3d::Identity() * 1e-6;
    c.contactForce = Eigen::Matrix4d::Identity() * 1e-5;
    cov.push_back(c);
  }
  est[2].contact.reset();
  const auto path = tempPath("results.csv");
  exportResults(est, cov, path, {{"seed", 3}});
  const ResultsTable table = readResults(path);
  std::filesystem::remove(path);
  EXPECT_EQ(table.columns, resultColumns());
  ASSERT_EQ(table.rows.size(), est.size());
  for (const auto& row : table.rows) EXPECT_EQ(row.size(), resultColumns().size());
  EXPECT_EQ(table.rows[1][1], est[1].object->x());
  EXPECT_TRUE(std::isnan(table.rows[2][7]));
  EXPECT_FALSE(table.headerLines.empty());
  EXPECT_EQ(resultsCsv(est, cov), resultsCsv(est, cov));
  EXPECT_THROW(resultsCsv(est, std::vector<StateCovariance>(1)), LengthMismatch);
}

TEST(Results, TwoSigmaEllipse) {
  const Ellipse2Sigma a = twoSigmaEllipse((Mat2() << 4.0, 0.0, 0.0, 1.0).finished());
  EXPECT_NEAR(a.major, 4.0, 1e-12);
  EXPECT_NEAR(a.minor, 2.0, 1e-12);
  EXPECT_NEAR(std::abs(a.angle), 0.0, 1e-12);
  const double th = 0.6;
  const Mat2 r = Eigen::Rotation2Dd(th).toRotationMatrix();
  const Ellipse2Sigma b = twoSigmaEllipse(r * Eigen::Vector2d(9.0, 0.25).asDiagonal() * r.transpose());
  EXPECT_NEAR(b.major, 6.0, 1e-12);
  EXPECT_NEAR(b.minor, 1.0, 1e-12);
  EXPECT_NEAR(b.angle, th, 1e-12);
}

TEST(Results, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    EXPECT_EQ(std::stod(formatDouble(x)), x);
  }
}
