#include <glob.h>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pushest/benchmark.hpp"
#include "pushest/dataio.hpp"
#include "pushest/estimate.hpp"
#include "pushest/pushsim.hpp"

using namespace pushest;
using json = nlohmann::json;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kFailure = 3, kTrialsFailed = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Options whose value comes from the command line, else the config file, else the default.
class Settings {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key, T& field,
                   const std::string& help) {
    CLI::Option* opt = app->add_option(flag, field, help)->capture_default_str();
    resolvers_.push_back([opt, key, &field](const json& cfg, json& eff) {
      if (opt->count() == 0 && cfg.contains(key)) field = cfg.at(key).get<T>();
      eff[key] = field;
    });
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& flag, const std::string& key, bool& field,
                    const std::string& help) {
    CLI::Option* opt = app->add_flag(flag, field, help);
    resolvers_.push_back([opt, key, &field](const json& cfg, json& eff) {
      if (opt->count() == 0 && cfg.contains(key)) field = cfg.at(key).get<bool>();
      eff[key] = field;
    });
    return opt;
  }

  json resolve(const json& cfg) const {
    json eff = json::object();
    for (const auto& r : resolvers_) r(cfg, eff);
    return eff;
  }

 private:
  std::vector<std::function<void(const json&, json&)>> resolvers_;
};

struct Global {
  std::uint64_t seed = 1;
  std::string config;
  std::string out;
  bool quiet = false;
  json file = json::object();  // parsed config file
};

std::string readText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

/// JSON object, or "key = value" lines with '#' comments; values are read as JSON when possible.
json loadConfig(const std::string& path) {
  const std::string text = readText(path);
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw ParseError("config '" + path + "' is not a JSON object");
    return j;
  } catch (const json::parse_error&) {
  }
  json j = json::object();
  std::istringstream in(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config '" + path + "' line " + std::to_string(lineNo) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      j[key] = json::parse(value);
    } catch (const json::parse_error&) {
      j[key] = value;
    }
  }
  return j;
}

/// Top-level keys overridden by the section named after the command.
json commandConfig(const json& file, const std::string& command) {
  json cfg = json::object();
  for (auto it = file.begin(); it != file.end(); ++it) {
    if (!it.value().is_object()) cfg[it.key()] = it.value();
  }
  if (file.contains(command) && file.at(command).is_object()) {
    for (auto it = file.at(command).begin(); it != file.at(command).end(); ++it) cfg[it.key()] = it.value();
  }
  return cfg;
}

void writeOutput(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

/// Diagnostics go to stderr when the primary output uses stdout.
std::ostream& console(const Global& g) { return g.out.empty() || g.out == "-" ? std::cerr : std::cout; }

std::vector<std::string> splitList(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

// ---- simulate ----

struct SimulateArgs {
  std::string shape = "box:0.1x0.1";
  double eeRadius = 0.01;
  std::string path = "straight";
  double speed = 0.06;
  double duration = 10.0;
  double dt = 0.04;
  double mu = 0.5;
  double mass = 1.0;
  double heading = 0.0;
  double direction = 0.0;
  double bias = 0.2;
  double maxOffset = 0.35;
};

void addSimulate(CLI::App* cmd, Settings& s, SimulateArgs& a) {
  s.add(cmd, "--shape", "shape", a.shape, "Object shape: box:WxH, rect:WxH, disc:R, ellipse:AxB, poly:x,y;... [m]");
  s.add(cmd, "--ee-radius", "ee_radius", a.eeRadius, "End-effector disc radius [m]");
  s.add(cmd, "--path", "path", a.path, "Pusher path family: straight, arc or random");
  s.add(cmd, "--speed", "speed", a.speed, "Pusher speed [m/s]");
  s.add(cmd, "--dur", "duration", a.duration, "Duration [s]");
  s.add(cmd, "--dt", "dt", a.dt, "Sample period [s]");
  s.add(cmd, "--mu", "mu_s", a.mu, "Object-support friction coefficient [-]");
  s.add(cmd, "--mass", "mass", a.mass, "Object mass [kg]");
  s.add(cmd, "--heading", "heading", a.heading, "Initial object heading [rad]");
  s.add(cmd, "--direction", "direction", a.direction, "Push direction in the plane [rad]");
  s.add(cmd, "--bias", "bias", a.bias, "Arc family: steering offset from the centroid line [rad]");
  s.add(cmd, "--max-offset", "max_offset", a.maxOffset, "Random family: bound on the steering offset [rad]");
}

PathKind parsePathKind(const std::string& name) {
  if (name == "straight") return PathKind::Straight;
  if (name == "arc") return PathKind::Arc;
  if (name == "random" || name == "random-curvature") return PathKind::RandomCurvature;
  throw UsageError("unknown path family '" + name + "' (expected straight, arc or random)");
}

int runSimulate(const Global& g, const SimulateArgs& a, const json& provenance) {
  require(a.eeRadius > 0.0, "--ee-radius must be positive");
  require(a.speed > 0.0, "--speed must be positive");
  require(a.duration > 0.0 && a.dt > 0.0, "--dur and --dt must be positive");
  require(a.mu > 0.0 && a.mass > 0.0, "--mu and --mass must be positive");
  Shape2D object = [&] {
    try {
      return parseShapeSpec(a.shape);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }();
  const PushScene scene{object, Shape2D::disc(a.eeRadius), limitSurfaceConstants(object, a.mu, a.mass)};
  SteeredPushSpec spec;
  spec.kind = parsePathKind(a.path);
  spec.speed = a.speed;
  spec.duration = a.duration;
  spec.dt = a.dt;
  spec.bias = a.bias;
  spec.maxOffset = a.maxOffset;
  spec.seed = g.seed;
  const GroundTruthTrajectory gt = simulateSteeredPush(scene, PlanarPose(0.0, 0.0, a.heading),
                                                       Vec2(std::cos(a.direction), std::sin(a.direction)), spec);
  MeasuredTrajectory traj = measuredFromGroundTruth(gt);
  traj.provenance = provenance;
  writeOutput(g.out, dumpTrajectory(traj));
  if (!g.quiet) {
    console(g) << "simulated " << gt.steps.size() << " steps, c = " << formatDouble(scene.params.c) << " m\n";
  }
  if (gt.truncated) {
    std::cerr << "error: simulation truncated: " << gt.truncationReason << "\n";
    return kFailure;
  }
  return kOk;
}

// ---- corrupt ----

struct CorruptArgs {
  std::string input;
  std::string noise = "gaussian";
  double sigmaTrans = 0.005;
  double sigmaRot = 0.05;
  double sigmaContact = 0.005;
  double sigmaForce = 0.5;
  double contactMode = 0.003;
  double contactWidth = 0.002;
  double forceMode = 0.3;
  double forceWidth = 0.2;
  double occludeBegin = 0.0;
  double occludeEnd = 0.0;
  std::string occludeChannels = "object";
};

void addCorrupt(CLI::App* cmd, Settings& s, CorruptArgs& a) {
  s.add(cmd, "--in", "in", a.input, "Input trajectory file (schema v1 JSON)");
  s.add(cmd, "--noise", "noise", a.noise, "Noise model: gaussian, bimodal or none");
  s.add(cmd, "--sigma-trans", "sigma_trans", a.sigmaTrans, "Gaussian pose translation std [m]");
  s.add(cmd, "--sigma-rot", "sigma_rot", a.sigmaRot, "Gaussian pose rotation std [rad]");
  s.add(cmd, "--sigma-contact", "sigma_contact", a.sigmaContact, "Gaussian contact-point std [m]");
  s.add(cmd, "--sigma-force", "sigma_force", a.sigmaForce, "Gaussian force std [N]");
  s.add(cmd, "--contact-mode", "contact_mode", a.contactMode, "Bimodal contact modes at +/- this value [m]");
  s.add(cmd, "--contact-width", "contact_width", a.contactWidth, "Bimodal contact triangle half-width [m]");
  s.add(cmd, "--force-mode", "force_mode", a.forceMode, "Bimodal force modes at +/- this value [N]");
  s.add(cmd, "--force-width", "force_width", a.forceWidth, "Bimodal force triangle half-width [N]");
  s.add(cmd, "--occlude-begin", "occlude_begin", a.occludeBegin, "Start of the dropout window [fraction of T]");
  s.add(cmd, "--occlude-end", "occlude_end", a.occludeEnd, "End of the dropout window, exclusive [fraction of T]");
  s.add(cmd, "--occlude-channels", "occlude_channels", a.occludeChannels,
        "Comma list of dropped streams: object, ee, contact, force");
}

OcclusionChannel parseOcclusionChannel(const std::string& name) {
  if (name == "object") return OcclusionChannel::Object;
  if (name == "ee") return OcclusionChannel::EE;
  if (name == "contact") return OcclusionChannel::Contact;
  if (name == "force") return OcclusionChannel::Force;
  throw UsageError("unknown occlusion channel '" + name + "'");
}

int runCorrupt(const Global& g, const CorruptArgs& a, const json& provenance) {
  require(!a.input.empty(), "--in is required");
  require(a.occludeBegin >= 0.0 && a.occludeEnd <= 1.0 && a.occludeBegin <= a.occludeEnd,
          "occlusion window must satisfy 0 <= begin <= end <= 1");
  MeasuredTrajectory traj = loadTrajectory(a.input);
  if (a.noise == "gaussian") {
    require(a.sigmaTrans >= 0.0 && a.sigmaRot >= 0.0 && a.sigmaContact >= 0.0 && a.sigmaForce >= 0.0,
            "noise sigmas must be non-negative");
    traj = injectNoise(traj, NoiseSpec::gaussian(a.sigmaTrans, a.sigmaRot, a.sigmaContact, a.sigmaForce, g.seed));
  } else if (a.noise == "bimodal") {
    require(a.contactMode >= 0.0 && a.contactWidth >= 0.0 && a.forceMode >= 0.0 && a.forceWidth >= 0.0,
            "bimodal parameters must be non-negative");
    traj = injectNoise(traj, NoiseSpec::bimodalContactForce(a.contactMode, a.contactWidth, a.forceMode,
                                                            a.forceWidth, g.seed));
  } else if (a.noise != "none") {
    throw UsageError("unknown noise model '" + a.noise + "' (expected gaussian, bimodal or none)");
  }
  if (a.occludeEnd > a.occludeBegin) {
    std::vector<OcclusionChannel> channels;
    for (const auto& c : splitList(a.occludeChannels)) channels.push_back(parseOcclusionChannel(c));
    traj = applyOcclusion(traj, a.occludeBegin, a.occludeEnd, channels);
  }
  json prov = provenance;
  prov["source"] = traj.provenance;
  traj.provenance = prov;
  writeOutput(g.out, dumpTrajectory(traj));
  if (!g.quiet) console(g) << "corrupted " << traj.size() << " steps\n";
  return kOk;
}

// ---- estimate ----

struct EstimateArgs {
  std::string input;
  std::string model = "QS";
  std::string mode = "batch";
  int lag = 20;
  int trigger = 5;
  bool noCovariance = false;
  bool fixPoses = false;
  double sigmaDynamics = GraphConfig{}.dynamicsSigma;
  int maxIterations = GaussNewtonOptions{}.maxIterations;
  std::string solver = "sparse";
};

void addEstimateOptions(CLI::App* cmd, Settings& s, EstimateArgs& a, bool withInput) {
  if (withInput) s.add(cmd, "--in", "in", a.input, "Input trajectory file (schema v1 JSON)");
  s.add(cmd, "--mode", "mode", a.mode, "Inference mode: batch or incremental");
  s.add(cmd, "--lag", "lag", a.lag, "Fixed-lag window length [timesteps]");
  s.add(cmd, "--trigger", "trigger", a.trigger, "Incremental: optimize after this many object-pose measurements [count]");
  s.flag(cmd, "--no-covariance", "no_covariance", a.noCovariance, "Skip marginal covariance recovery");
  s.add(cmd, "--sigma-dynamics", "sigma_dynamics", a.sigmaDynamics,
        "Quasi-static dynamics factor std [N m^2/s, residual units]");
  s.add(cmd, "--max-iter", "max_iterations", a.maxIterations, "Gauss-Newton iteration limit [count]");
  s.add(cmd, "--solver", "solver", a.solver, "Linear solver: sparse or dense Cholesky");
}

EstimateOptions estimateOptions(const EstimateArgs& a) {
  EstimateOptions eo;
  try {
    eo.model = parseGraphModel(a.model);
    eo.mode = parseEstimationMode(a.mode);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  require(a.lag >= 3, "--lag must be at least 3");
  require(a.trigger >= 1, "--trigger must be at least 1");
  require(a.sigmaDynamics > 0.0, "--sigma-dynamics must be positive");
  require(a.maxIterations >= 1, "--max-iter must be at least 1");
  require(a.solver == "sparse" || a.solver == "dense", "--solver must be sparse or dense");
  eo.lag = a.lag;
  eo.trigger = a.trigger;
  eo.covariances = !a.noCovariance;
  eo.fixPosesToTruth = a.fixPoses;
  eo.graph.dynamicsSigma = a.sigmaDynamics;
  eo.solver.maxIterations = a.maxIterations;
  eo.solver.solver = a.solver == "dense" ? LinearSolver::DenseCholesky : LinearSolver::SparseCholesky;
  return eo;
}

json metricsJson(const Metrics& m) {
  auto ch = [](const ChannelStats& c) {
    return json{{"rmse", c.rmse}, {"mae", c.mae}, {"sigma", c.sigma}, {"count", c.count}};
  };
  return json{{"object_translation_cm", ch(m.objectTranslation)}, {"object_rotation_rad", ch(m.objectRotation)},
              {"ee_translation_cm", ch(m.eeTranslation)},         {"ee_rotation_rad", ch(m.eeRotation)},
              {"contact_cm", ch(m.contact)},                       {"force_magnitude_n", ch(m.forceMagnitude)},
              {"force_direction_deg", ch(m.forceDirection)}};
}

int runEstimate(const Global& g, const EstimateArgs& a, json provenance) {
  require(!a.input.empty(), "--in is required");
  const EstimateOptions eo = estimateOptions(a);
  const MeasuredTrajectory traj = loadTrajectory(a.input);
  const EstimateResult res = estimateTrajectory(traj, eo);

  int iterations = 0;
  for (const auto& r : res.reports) iterations += r.iterations;
  json report = {{"converged", res.converged},
                 {"solves", res.reports.size()},
                 {"iterations", iterations},
                 {"initial_cost", res.reports.empty() ? 0.0 : res.reports.front().initialCost},
                 {"final_cost", res.finalCost}};
  if (!res.reports.empty()) report["termination"] = toString(res.reports.back().termination);
  if (traj.hasGroundTruth()) {
    const auto truth = traj.groundTruth();
    report["raw"] = metricsJson(computeMetrics(measurementSamples(traj), truth));
    report["estimate"] = metricsJson(computeMetrics(res.states, truth));
  }
  provenance["report"] = report;
  writeOutput(g.out, resultsCsv(res.states, res.covariances, provenance));
  if (!g.quiet) console(g) << report.dump(2) << "\n";
  if (!res.converged) {
    std::cerr << "error: optimization did not converge\n";
    return kFailure;
  }
  return kOk;
}

// ---- benchmark ----

struct BenchmarkArgs {
  int trials = 50;
  std::string models = "CP,SDF,QS";
  std::string settings = "gaussian";
  int threads = 1;
  std::string family = "mixed";
  double minSpeed = ScenarioOptions{}.minSpeed;
  double maxSpeed = ScenarioOptions{}.maxSpeed;
  double duration = ScenarioOptions{}.duration;
  double dt = ScenarioOptions{}.dt;
  std::string input;
  EstimateArgs estimate;
};

void addBenchmark(CLI::App* cmd, Settings& s, BenchmarkArgs& a) {
  s.add(cmd, "--trials", "trials", a.trials, "Trials per setting [count]");
  s.add(cmd, "--models", "models", a.models, "Comma list of graph models: CP, SDF, QS");
  s.add(cmd, "--settings", "settings", a.settings,
        "Comma list of settings: gaussian (0.05 rad), gaussian-wide (0.5 rad), bimodal (poses fixed), occlusion");
  s.add(cmd, "--threads", "threads", a.threads, "Worker threads; results do not depend on it [count]");
  s.add(cmd, "--family", "family", a.family, "Pusher path family: straight, arc, random or mixed");
  s.add(cmd, "--speed-min", "speed_min", a.minSpeed, "Lowest pusher speed [m/s]");
  s.add(cmd, "--speed-max", "speed_max", a.maxSpeed, "Highest pusher speed [m/s]");
  s.add(cmd, "--dur", "duration", a.duration, "Trajectory duration [s]");
  s.add(cmd, "--dt", "dt", a.dt, "Sample period [s]");
  s.add(cmd, "--in", "in", a.input, "Glob of trajectory files with ground truth; replaces simulated scenarios");
  addEstimateOptions(cmd, s, a.estimate, false);
}

TrialSetting namedSetting(const std::string& name) {
  if (name == "gaussian") return {name, benchmarkGaussianNoise(0.05, 0), std::nullopt, false};
  if (name == "gaussian-wide") return {name, benchmarkGaussianNoise(0.5, 0), std::nullopt, false};
  if (name == "bimodal") return {name, bimodalNoise(0.3, 0.2, 0), std::nullopt, true};
  if (name == "occlusion") return {name, benchmarkGaussianNoise(0.05, 0), std::make_pair(0.35, 0.65), false};
  throw UsageError("unknown setting '" + name + "'");
}

std::vector<std::string> expandGlob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<std::string> files;
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) files.emplace_back(g.gl_pathv[i]);
  }
  globfree(&g);
  if (rc != 0 && rc != GLOB_NOMATCH) throw IoError("cannot expand '" + pattern + "'");
  if (files.empty()) throw IoError("no files match '" + pattern + "'");
  std::sort(files.begin(), files.end());
  return files;
}

int runBenchmarkCommand(const Global& g, const BenchmarkArgs& a, const json& provenance) {
  require(a.trials >= 1, "--trials must be at least 1");
  require(a.threads >= 1, "--threads must be at least 1");
  require(a.minSpeed > 0.0 && a.maxSpeed >= a.minSpeed, "speed range must be positive and ordered");
  require(a.duration > 0.0 && a.dt > 0.0, "--dur and --dt must be positive");
  BenchmarkOptions bo;
  bo.masterSeed = g.seed;
  bo.trials = a.trials;
  bo.threads = a.threads;
  bo.estimate = estimateOptions(a.estimate);
  bo.models.clear();
  try {
    for (const auto& m : splitList(a.models)) bo.models.push_back(parseGraphModel(m));
    bo.scenario.family = parsePathFamily(a.family);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  require(!bo.models.empty(), "--models is empty");
  for (const auto& name : splitList(a.settings)) bo.settings.push_back(namedSetting(name));
  require(!bo.settings.empty(), "--settings is empty");
  bo.scenario.minSpeed = a.minSpeed;
  bo.scenario.maxSpeed = a.maxSpeed;
  bo.scenario.duration = a.duration;
  bo.scenario.dt = a.dt;
  if (!a.input.empty()) {
    for (const auto& f : expandGlob(a.input)) bo.sources.push_back(groundTruthTrajectory(loadTrajectory(f)));
    bo.trials = static_cast<int>(bo.sources.size());
  }

  const auto rows = runBenchmark(bo);
  const auto agg = aggregate(rows);
  writeOutput(g.out, benchmarkCsv(rows, agg, provenance));

  const auto failed = std::count_if(rows.begin(), rows.end(), [](const TrialRow& r) { return !r.ok || !r.converged; });
  if (!g.quiet) {
    std::ostream& os = console(g);
    for (const auto& r : agg) {
      if (r.metric == "obj_trans_rmse_cm" || r.metric == "contact_rmse_cm" || r.metric == "force_dir_mae_deg") {
        os << r.setting << " " << toString(r.model) << " " << r.metric << " mean " << formatDouble(r.mean)
           << " std " << formatDouble(r.std) << " n " << r.count << "\n";
      }
    }
    os << rows.size() << " rows, " << failed << " failed or unconverged\n";
  }
  return failed == 0 ? kOk : kTrialsFailed;
}

// ---- inspect ----

int runInspect(const Global& g, const std::string& input) {
  require(!input.empty(), "--in is required");
  std::ostringstream os;
  if (input.size() > 4 && input.substr(input.size() - 4) == ".csv") {
    const ResultsTable table = readResults(input);
    os << "results: " << table.rows.size() << " rows, " << table.columns.size() << " columns\n";
    for (const auto& h : table.headerLines) os << h << "\n";
    writeOutput(g.out, os.str());
    return kOk;
  }
  const MeasuredTrajectory traj = loadTrajectory(input);
  int y = 0, z = 0, w = 0, alpha = 0, contact = 0;
  for (const auto& s : traj.steps) {
    y += s.y.has_value();
    z += s.z.has_value();
    w += s.w.has_value();
    alpha += s.alpha.has_value();
    contact += s.inContact;
  }
  os << "schema_version: " << kSchemaVersion << "\n";
  os << "steps: " << traj.size() << "\n";
  if (!traj.steps.empty()) {
    os << "time: " << formatDouble(traj.steps.front().t) << " .. " << formatDouble(traj.steps.back().t) << " s\n";
  }
  os << "object_pose: " << y << "\nee_pose: " << z << "\ncontact_point: " << w << "\nforce: " << alpha
     << "\nin_contact: " << contact << "\n";
  if (traj.objectShape) os << "object_shape: " << toJson(*traj.objectShape).dump() << "\n";
  if (traj.eeShape) os << "ee_shape: " << toJson(*traj.eeShape).dump() << "\n";
  if (traj.params) {
    os << "mu_s: " << formatDouble(traj.params->muS) << "\nmass: " << formatDouble(traj.params->mass)
       << " kg\nc: " << formatDouble(traj.params->c) << " m\n";
  }
  if (traj.noise) os << "noise: " << toJson(*traj.noise).dump() << "\n";
  os << "ground_truth: " << (traj.hasGroundTruth() ? "yes" : "no") << "\n";
  if (traj.hasGroundTruth()) {
    os << "raw_metrics: " << metricsJson(computeMetrics(measurementSamples(traj), traj.groundTruth())).dump() << "\n";
  }
  os << "provenance: " << traj.provenance.dump() << "\n";
  writeOutput(g.out, os.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planar pushing state estimation: simulate, corrupt, estimate and benchmark.\n"
               "Units are SI (m, rad, N, s) unless a flag says otherwise."};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  CLI::Option* seedOpt = app.add_option("--seed", g.seed, "Random seed [uint64]")->capture_default_str();
  app.add_option("--config", g.config, "Config file: JSON object or key = value lines; flags take precedence");
  app.add_option("--out", g.out, "Output path; '-' or empty writes to stdout");
  app.add_flag("--quiet", g.quiet, "Suppress console summaries");

  Settings simS, corS, estS, benS;
  SimulateArgs sim;
  CorruptArgs cor;
  EstimateArgs est;
  BenchmarkArgs ben;
  std::string inspectIn;

  CLI::App* simulate = app.add_subcommand("simulate", "Simulate a quasi-static push and write a trajectory file");
  addSimulate(simulate, simS, sim);
  CLI::App* corrupt = app.add_subcommand("corrupt", "Inject measurement noise and dropout into a trajectory file");
  addCorrupt(corrupt, corS, cor);
  CLI::App* estimate = app.add_subcommand("estimate", "Estimate states from a trajectory file and write results CSV");
  estS.add(estimate, "--model", "model", est.model, "Graph model: CP, SDF or QS");
  addEstimateOptions(estimate, estS, est, true);
  estS.flag(estimate, "--fix-poses", "fix_poses", est.fixPoses, "Hold poses at the embedded ground truth (batch)");
  CLI::App* benchmark = app.add_subcommand("benchmark", "Run the Monte Carlo benchmark and write a metrics CSV");
  addBenchmark(benchmark, benS, ben);
  CLI::App* inspect = app.add_subcommand("inspect", "Summarize a trajectory file or results CSV");
  inspect->add_option("--in", inspectIn, "Trajectory file (JSON) or results file (.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (!g.config.empty()) g.file = loadConfig(g.config);
    const std::string command = app.get_subcommands().front()->get_name();
    const json cfg = commandConfig(g.file, command);
    if (seedOpt->count() == 0 && cfg.contains("seed")) g.seed = cfg.at("seed").get<std::uint64_t>();
    auto provenance = [&](const Settings& s) {
      return json{{"tool", "pushest"}, {"command", command}, {"seed", g.seed}, {"config", s.resolve(cfg)}};
    };
    if (simulate->parsed()) return runSimulate(g, sim, provenance(simS));
    if (corrupt->parsed()) return runCorrupt(g, cor, provenance(corS));
    if (estimate->parsed()) return runEstimate(g, est, provenance(estS));
    if (benchmark->parsed()) return runBenchmarkCommand(g, ben, provenance(benS));
    if (inspect->parsed()) {
      if (inspectIn.empty() && cfg.contains("in")) inspectIn = cfg.at("in").get<std::string>();
      return runInspect(g, inspectIn);
    }
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const json::exception& e) {
    std::cerr << "error: invalid config value: " << e.what() << "\n";
    return kIo;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const EmptyTrajectory& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const MissingShapeConfig& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
