#include "pushest/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace pushest {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

double parsePositive(const std::string& s, const std::string& spec) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad number in shape spec '" + spec + "'");
  }
  if (used != s.size() || !(v > 0.0)) throw std::invalid_argument("bad dimension in shape spec '" + spec + "'");
  return v;
}

std::pair<double, double> parsePair(const std::string& s, const std::string& spec) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw std::invalid_argument("expected WxH in shape spec '" + spec + "'");
  return {parsePositive(s.substr(0, x), spec), parsePositive(s.substr(x + 1), spec)};
}

std::vector<Shape2D> builtinObjects() {
  return {Shape2D::box(0.1, 0.1), Shape2D::box(0.08, 0.12), Shape2D::disc(0.05), Shape2D::ellipse(0.06, 0.04)};
}

/// Half-extent of the shape (at heading theta) along the world direction n.
bool monotone(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] > trace[i - 1]) return false;
  }
  return true;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += kGamma;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t trialSeed(std::uint64_t master, std::uint64_t index) { return splitmix64(master + (index + 1) * kGamma); }

Shape2D parseShapeSpec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("shape spec '" + spec + "' needs kind:dimensions");
  std::string kind = spec.substr(0, colon);
  std::transform(kind.begin(), kind.end(), kind.begin(), [](unsigned char c) { return std::tolower(c); });
  const std::string dims = spec.substr(colon + 1);
  if (kind == "disc") return Shape2D::disc(parsePositive(dims, spec));
  if (kind == "box" || kind == "rect") {
    const auto [w, h] = parsePair(dims, spec);
    return Shape2D::box(w, h);
  }
  if (kind == "ellipse") {
    const auto [a, b] = parsePair(dims, spec);
    return Shape2D::ellipse(a, b);
  }
  if (kind == "poly") {
    std::vector<Vec2> verts;
    std::stringstream ss(dims);
    std::string item;
    while (std::getline(ss, item, ';')) {
      const auto comma = item.find(',');
      if (comma == std::string::npos) throw std::invalid_argument("poly vertices must be x,y pairs in '" + spec + "'");
      try {
        verts.emplace_back(std::stod(item.substr(0, comma)), std::stod(item.substr(comma + 1)));
      } catch (const std::exception&) {
        throw std::invalid_argument("bad vertex '" + item + "' in '" + spec + "'");
      }
    }
    return Shape2D::polygon(verts);
  }
  throw std::invalid_argument("unknown shape kind '" + kind + "'");
}

std::string toString(PathFamily family) {
  switch (family) {
    case PathFamily::Straight: return "straight";
    case PathFamily::Arc: return "arc";
    case PathFamily::RandomCurvature: return "random";
    case PathFamily::Mixed: return "mixed";
  }
  return "?";
}

PathFamily parsePathFamily(const std::string& name) {
  if (name == "straight") return PathFamily::Straight;
  if (name == "arc") return PathFamily::Arc;
  if (name == "random") return PathFamily::RandomCurvature;
  if (name == "mixed") return PathFamily::Mixed;
  throw std::invalid_argument("unknown path family '" + name + "' (straight, arc, random, mixed)");
}

GroundTruthTrajectory makeScenario(const ScenarioOptions& options, std::uint64_t seed) {
  const std::vector<Shape2D> objects = options.objects.empty() ? builtinObjects() : options.objects;
  std::string lastError = "no attempts";
  for (int attempt = 0; attempt < options.maxAttempts; ++attempt) {
    std::mt19937_64 rng(attempt == 0 ? seed : splitmix64(seed + static_cast<std::uint64_t>(attempt)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Shape2D& object = objects[static_cast<std::size_t>(unit(rng) * objects.size()) % objects.size()];
    const double mass = options.minMass + (options.maxMass - options.minMass) * unit(rng);
    const double phi = -kPi + 2.0 * kPi * unit(rng);
    const double theta0 = options.centered ? phi : -kPi + 2.0 * kPi * unit(rng);
    const double speed = options.minSpeed + (options.maxSpeed - options.minSpeed) * unit(rng);
    const double familyDraw = unit(rng);
    const double biasDraw = unit(rng);
    const std::uint64_t pathSeed = rng();

    const PushScene scene{object, options.ee, limitSurfaceConstants(object, options.muS, mass)};
    const PlanarPose objInit(0.0, 0.0, theta0);
    const Vec2 dir(std::cos(phi), std::sin(phi));

    SteeredPushSpec path;
    path.speed = speed;
    path.duration = options.duration;
    path.dt = options.dt;
    path.seed = pathSeed;
    path.maxOffset = options.maxSteeringOffset;
    PathFamily family = options.centered ? PathFamily::Straight : options.family;
    if (family == PathFamily::Mixed) {
      family = familyDraw < 1.0 / 3.0 ? PathFamily::Straight
               : familyDraw < 2.0 / 3.0 ? PathFamily::Arc
                                        : PathFamily::RandomCurvature;
    }
    switch (family) {
      case PathFamily::Straight: path.kind = PathKind::Straight; break;
      case PathFamily::Arc:
        path.kind = PathKind::Arc;
        path.bias = (biasDraw < 0.5 ? -1.0 : 1.0) *
                    (options.minArcBias + (options.maxArcBias - options.minArcBias) * 2.0 * std::abs(biasDraw - 0.5));
        break;
      default: path.kind = PathKind::RandomCurvature; break;
    }
    try {
      GroundTruthTrajectory gt = simulateSteeredPush(scene, objInit, dir, path);
      if (!gt.truncated) return gt;
      lastError = gt.truncationReason;
    } catch (const SimulationError& e) {
      lastError = e.what();
    }
  }
  throw SimulationError("no valid scenario after " + std::to_string(options.maxAttempts) +
                        " attempts: " + lastError);
}

GroundTruthTrajectory groundTruthTrajectory(const MeasuredTrajectory& traj) {
  if (!traj.objectShape || !traj.eeShape || !traj.params) {
    throw DataError("trajectory lacks shapes or parameters needed for ground truth");
  }
  if (!traj.hasGroundTruth()) throw DataError("trajectory has no embedded ground truth");
  return GroundTruthTrajectory{PushScene{*traj.objectShape, *traj.eeShape, *traj.params}, traj.groundTruth(), false, {}};
}

NoiseSpec benchmarkGaussianNoise(double rotSigma, std::uint64_t seed) {
  return NoiseSpec::gaussian(0.005, rotSigma, 0.005, 0.5, seed);
}

NoiseSpec bimodalNoise(double mode, double halfWidth, std::uint64_t seed) {
  return NoiseSpec::bimodalContactForce(mode * 0.01, halfWidth * 0.01, mode, halfWidth, seed);
}

std::vector<TrialRow> runTrial(const BenchmarkOptions& options, int trial, const TrialSetting& setting) {
  const std::uint64_t seed = trialSeed(options.masterSeed, static_cast<std::uint64_t>(trial));
  std::vector<TrialRow> rows;
  for (GraphModel model : options.models) {
    TrialRow row;
    row.trial = trial;
    row.seed = seed;
    row.setting = setting.name;
    row.model = model;
    rows.push_back(row);
  }
  try {
    const GroundTruthTrajectory gt =
        options.sources.empty() ? makeScenario(options.scenario, splitmix64(seed ^ 0x5CE7A510ULL))
                                : options.sources.at(static_cast<std::size_t>(trial) % options.sources.size());
    const MeasuredTrajectory clean = measuredFromGroundTruth(gt);
    NoiseSpec noise = setting.noise;
    noise.seed = splitmix64(seed ^ 0x0E15EULL);
    MeasuredTrajectory noisy = injectNoise(clean, noise);
    if (setting.occlusion) noisy = applyOcclusion(noisy, setting.occlusion->first, setting.occlusion->second);
    const Metrics raw = computeMetrics(measurementSamples(noisy), gt.steps);
    for (TrialRow& row : rows) {
      row.raw = raw;
      try {
        EstimateOptions eo = options.estimate;
        eo.model = row.model;
        eo.fixPosesToTruth = setting.fixPosesToTruth;
        const EstimateResult res = estimateTrajectory(noisy, eo);
        row.estimate = computeMetrics(res.states, gt.steps);
        row.converged = res.converged;
        row.finalCost = res.finalCost;
        for (const auto& r : res.reports) {
          row.iterations += r.iterations;
          row.costMonotone = row.costMonotone && monotone(r.costTrace);
        }
        if (res.covariances) {
          const MeasurementSigmas s = resolveMeasurementSigmas(noisy, eo.graph);
          const double objTrace = 2.0 * s.objectTrans * s.objectTrans + s.objectRot * s.objectRot;
          const double cTrace = 2.0 * s.contact * s.contact;
          for (const auto& c : *res.covariances) {
            if (!setting.fixPosesToTruth) row.maxObjectTraceRatio = std::max(row.maxObjectTraceRatio, c.object.trace() / objTrace);
            row.maxContactTraceRatio =
                std::max(row.maxContactTraceRatio, c.contactForce.topLeftCorner<2, 2>().trace() / cTrace);
          }
        }
        row.ok = true;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  } catch (const std::exception& e) {
    for (TrialRow& row : rows) row.error = e.what();
  }
  return rows;
}

std::vector<TrialRow> runBenchmark(const BenchmarkOptions& options) {
  std::vector<TrialSetting> settings = options.settings;
  if (settings.empty()) settings.push_back({"gaussian", benchmarkGaussianNoise(0.05, 0), std::nullopt, false});
  const std::size_t jobs = settings.size() * static_cast<std::size_t>(std::max(options.trials, 0));
  std::vector<std::vector<TrialRow>> results(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t j = next++; j < jobs; j = next++) {
      const std::size_t s = j / static_cast<std::size_t>(options.trials);
      const int trial = static_cast<int>(j % static_cast<std::size_t>(options.trials));
      results[j] = runTrial(options, trial, settings[s]);
    }
  };
  const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(jobs)));
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::vector<TrialRow> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

namespace {

struct MetricField {
  const char* name;
  double (*get)(const TrialRow&);
};

const std::vector<MetricField>& metricFields() {
  static const std::vector<MetricField> fields = {
      {"raw_obj_trans_rmse_cm", [](const TrialRow& r) { return r.raw.objectTranslation.rmse; }},
      {"obj_trans_rmse_cm", [](const TrialRow& r) { return r.estimate.objectTranslation.rmse; }},
      {"obj_trans_mae_cm", [](const TrialRow& r) { return r.estimate.objectTranslation.mae; }},
      {"obj_trans_sigma_cm", [](const TrialRow& r) { return r.estimate.objectTranslation.sigma; }},
      {"raw_obj_rot_rmse_rad", [](const TrialRow& r) { return r.raw.objectRotation.rmse; }},
      {"obj_rot_rmse_rad", [](const TrialRow& r) { return r.estimate.objectRotation.rmse; }},
      {"raw_ee_trans_rmse_cm", [](const TrialRow& r) { return r.raw.eeTranslation.rmse; }},
      {"ee_trans_rmse_cm", [](const TrialRow& r) { return r.estimate.eeTranslation.rmse; }},
      {"raw_contact_rmse_cm", [](const TrialRow& r) { return r.raw.contact.rmse; }},
      {"contact_rmse_cm", [](const TrialRow& r) { return r.estimate.contact.rmse; }},
      {"contact_mae_cm", [](const TrialRow& r) { return r.estimate.contact.mae; }},
      {"raw_force_mag_rmse_n", [](const TrialRow& r) { return r.raw.forceMagnitude.rmse; }},
      {"force_mag_rmse_n", [](const TrialRow& r) { return r.estimate.forceMagnitude.rmse; }},
      {"raw_force_dir_mae_deg", [](const TrialRow& r) { return r.raw.forceDirection.mae; }},
      {"force_dir_mae_deg", [](const TrialRow& r) { return r.estimate.forceDirection.mae; }},
      {"max_obj_trace_ratio", [](const TrialRow& r) { return r.maxObjectTraceRatio; }},
      {"max_contact_trace_ratio", [](const TrialRow& r) { return r.maxContactTraceRatio; }},
      {"iterations", [](const TrialRow& r) { return static_cast<double>(r.iterations); }},
      {"final_cost", [](const TrialRow& r) { return r.finalCost; }},
  };
  return fields;
}

}  // namespace

std::vector<AggregateRow> aggregate(const std::vector<TrialRow>& rows) {
  std::vector<AggregateRow> out;
  std::vector<std::pair<std::string, GraphModel>> groups;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.setting, r.model);
    if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
  }
  for (const auto& [setting, model] : groups) {
    for (const auto& field : metricFields()) {
      std::vector<double> v;
      for (const auto& r : rows) {
        if (r.ok && r.setting == setting && r.model == model) v.push_back(field.get(r));
      }
      AggregateRow a{setting, model, field.name, 0.0, 0.0, static_cast<int>(v.size())};
      if (!v.empty()) {
        double sum = 0.0;
        for (double x : v) sum += x;
        a.mean = sum / static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - a.mean) * (x - a.mean);
        a.std = std::sqrt(var / static_cast<double>(v.size()));
      }
      out.push_back(a);
    }
  }
  return out;
}

std::vector<std::string> trialColumns() {
  std::vector<std::string> cols = {"trial", "seed", "setting", "model", "ok", "converged", "cost_monotone"};
  for (const auto& f : metricFields()) cols.emplace_back(f.name);
  cols.emplace_back("error");
  return cols;
}

std::vector<std::string> trialValues(const TrialRow& row) {
  std::vector<std::string> v = {std::to_string(row.trial), std::to_string(row.seed), row.setting,
                                toString(row.model),       row.ok ? "1" : "0",     row.converged ? "1" : "0",
                                row.costMonotone ? "1" : "0"};
  for (const auto& f : metricFields()) v.push_back(formatDouble(f.get(row)));
  std::string err = row.error;
  std::replace(err.begin(), err.end(), ',', ';');
  std::replace(err.begin(), err.end(), '\n', ' ');
  v.push_back(err);
  return v;
}

std::string benchmarkCsv(const std::vector<TrialRow>& rows, const std::vector<AggregateRow>& agg,
                         const nlohmann::json& provenance) {
  std::ostringstream out;
  out << "# pushest benchmark v1\n";
  out << "# units: translation and contact in cm, rotation in rad, force magnitude in N, force direction in deg\n";
  if (!provenance.is_null() && !provenance.empty()) out << "# config: " << provenance.dump() << "\n";
  const auto cols = trialColumns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
  for (const auto& r : rows) {
    const auto v = trialValues(r);
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
    out << "\n";
  }
  out << "\n# aggregate\nsetting,model,metric,mean,std,count\n";
  for (const auto& a : agg) {
    out << a.setting << "," << toString(a.model) << "," << a.metric << "," << formatDouble(a.mean) << ","
        << formatDouble(a.std) << "," << a.count << "\n";
  }
  return out.str();
}

}  // namespace pushest
