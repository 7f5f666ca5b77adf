#include "pushest/pushsim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include <Eigen/LU>

namespace pushest {

namespace {

double adaptiveSimpson(const std::function<double(double)>& f, double a, double b, double fa,
                       double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return adaptiveSimpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         adaptiveSimpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptiveSimpson(f, a, b, fa, fm, fb, whole, tol, 40);
}

double discRadius(const Shape2D& ee) {
  if (!ee.isDisc()) throw NoSolution("simulator supports disc end-effectors only");
  return ee.asDisc().radius;
}

// Material displacement over a step of the body point currently at `p`.
Vec2 materialDisplacement(const PlanarPose& start, const PlanarPose& end, const Vec2& p) {
  return p - start.transformFrom(end.transformTo(p));
}

struct ContactFrame {
  Vec2 point;
  Vec2 normal;  // object outward normal, pointing at the end-effector
  double gap;
};

ContactFrame contactFrame(const PushScene& scene, const PlanarPose& obj, const PlanarPose& ee) {
  const Vec2 center = ee.translation();
  const SurfaceProjection proj = projectOntoSurface(scene.object, obj, center);
  const Vec2 d = center - proj.point;
  const double n = d.norm();
  const Vec2 normal = n > 1e-14 ? Vec2((proj.signedDistance >= 0.0 ? 1.0 : -1.0) * d / n)
                                : outwardNormal(scene.object, obj, center);
  return {proj.point, normal, proj.signedDistance - discRadius(scene.ee)};
}

Vec3 stepConditions(const PushScene& scene, const PlanarPose& prev, const PlanarPose& cur,
                    const PlanarPose& eeStart, const PlanarPose& eeEnd) {
  const ContactFrame cf = contactFrame(scene, cur, eeEnd);
  const double c2 = scene.params.c * scene.params.c;
  const Vec2 disp = cur.translation() - prev.translation();
  const double dtheta = angleDiff(cur.theta(), prev.theta());
  const double scale = scene.object.boundingRadius();
  const Vec2 slip =
      materialDisplacement(prev, cur, cf.point) - materialDisplacement(eeStart, eeEnd, cf.point);
  return {(cross2(cf.point - cur.translation(), disp) - c2 * dtheta) / scale, cf.gap,
          perp(cf.normal).dot(slip)};
}

Vec2 ellipsoidLoad(const PushParams& params, const Vec2& direction, const Vec2& arm) {
  const Vec2 u = direction.normalized();
  const double tauUnit = cross2(arm, u);
  const double s = 1.0 / std::sqrt(1.0 / (params.fMax * params.fMax) +
                                    tauUnit * tauUnit / (params.tauMax * params.tauMax));
  return s * u;
}

}  // namespace

double meanRadialDistance(const Shape2D& shape) {
  if (shape.isDisc()) return 2.0 * shape.asDisc().radius / 3.0;
  const auto& v = shape.asPolygon().vertices;
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % v.size()];
    const Vec2 edge = b - a;
    // Triangle (centroid, a, b) in polar form: rho(phi) = h / cos(phi - phiN), and the
    // integral of |r| dA is the integral of rho^3 / 3 dphi.
    const double h = cross2(a, edge) / edge.norm();
    const double phiN = std::atan2(-edge.x(), edge.y());
    const double lo = angleDiff(std::atan2(a.y(), a.x()), phiN);
    const double hi = angleDiff(std::atan2(b.y(), b.x()), phiN);
    const auto integrand = [h](double alpha) {
      const double rho = h / std::cos(alpha);
      return rho * rho * rho / 3.0;
    };
    total += integrate(integrand, lo, hi, 1e-15);
  }
  return total / shape.area();
}

PushParams limitSurfaceConstants(const Shape2D& shape, double muS, double mass, double gravity) {
  if (!(shape.area() > 1e-14)) throw DegenerateShape("support area is zero");
  if (!(muS > 0.0) || !(mass > 0.0) || !(gravity > 0.0)) {
    throw std::invalid_argument("friction, mass and gravity must be positive");
  }
  PushParams p;
  p.muS = muS;
  p.mass = mass;
  p.gravity = gravity;
  p.fMax = muS * mass * gravity;
  p.tauMax = p.fMax * meanRadialDistance(shape);
  p.c = p.tauMax / p.fMax;
  return p;
}

QuasiStaticResponse instantaneousResponse(const PushParams& params, const PlanarPose& objPose,
                                          const Vec2& contact, const Vec2& pusherVelocity) {
  QuasiStaticResponse out;
  if (pusherVelocity.norm() < 1e-15) return out;
  // Normality gives (v, omega) = k (f, tau / c^2); sticking at r gives
  // v + omega * perp(r) = v_p, i.e. k (I + perp(r) perp(r)^T / c^2) f = v_p.
  const Vec2 arm = contact - objPose.translation();
  const Vec2 rp = perp(arm);
  const double c2 = params.c * params.c;
  const Mat2 a = Mat2::Identity() + rp * rp.transpose() / c2;
  const Vec2 kf = a.inverse() * pusherVelocity;
  out.velocity = kf;
  out.omega = rp.dot(kf) / c2;
  out.force = ellipsoidLoad(params, kf, arm);
  out.torque = cross2(arm, out.force);
  return out;
}

StepResult stepPush(const PushScene& scene, const PlanarPose& objPose, const PlanarPose& eeStart,
                    const PlanarPose& eeEnd, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("timestep must be positive");
  StepResult out;
  out.ee = eeEnd;

  const ContactFrame start = contactFrame(scene, objPose, eeStart);
  const Vec2 pusherDisp = materialDisplacement(eeStart, eeEnd, start.point);
  if (pusherDisp.norm() < 1e-15 && std::abs(angleDiff(eeEnd.theta(), eeStart.theta())) < 1e-15) {
    out.object = objPose;
    out.contact = start.point;
    return out;
  }

  // Explicit prediction from the instantaneous response at the start of the step.
  const QuasiStaticResponse guess = instantaneousResponse(scene.params, objPose, start.point, pusherDisp / dt);
  PlanarPose cur = objPose.retract(
      Vec3(guess.velocity.x() * dt, guess.velocity.y() * dt, guess.omega * dt));

  const auto conditions = [&](const PlanarPose& x) {
    return stepConditions(scene, objPose, x, eeStart, eeEnd);
  };
  Vec3 f = conditions(cur);
  bool converged = false;
  for (int iter = 0; iter < 60; ++iter) {
    if (f.cwiseAbs().maxCoeff() < 1e-16) {
      converged = true;
      break;
    }
    Eigen::Matrix3d jac;
    constexpr double h = 1e-7;
    for (int k = 0; k < 3; ++k) {
      Vec3 d = Vec3::Zero();
      d(k) = h;
      jac.col(k) = (conditions(cur.retract(d)) - conditions(cur.retract(-d))) / (2.0 * h);
    }
    const Eigen::FullPivLU<Eigen::Matrix3d> lu(jac);
    if (!lu.isInvertible()) throw NoSolution("degenerate contact geometry in push step");
    const Vec3 step = -lu.solve(f);
    // Backtracking keeps the iteration monotone when the contact crosses a vertex.
    double alpha = 1.0;
    PlanarPose next = cur.retract(step);
    Vec3 fNext = conditions(next);
    while (fNext.norm() >= f.norm() && alpha > 1e-4) {
      alpha *= 0.5;
      next = cur.retract(alpha * step);
      fNext = conditions(next);
    }
    const bool tiny = (alpha * step).cwiseAbs().maxCoeff() < 1e-17;
    cur = next;
    f = fNext;
    if (tiny) {
      converged = f.cwiseAbs().maxCoeff() < 1e-12;
      break;
    }
  }
  if (!converged && f.cwiseAbs().maxCoeff() > 1e-12) {
    throw NonConvergence("push step root solve did not converge");
  }

  const ContactFrame end = contactFrame(scene, cur, eeEnd);
  out.object = cur;
  out.contact = end.point;
  const Vec2 disp = cur.translation() - objPose.translation();
  if (disp.norm() < 1e-15) {
    // Zero translation forces zero rotation through normality.
    out.object = objPose;
    return out;
  }
  out.force = ellipsoidLoad(scene.params, disp, end.point - cur.translation());
  out.torque = cross2(end.point - cur.translation(), out.force);
  out.moving = true;
  if (out.force.dot(-end.normal) <= 0.0) throw ContactLost("pusher separates from the object");
  return out;
}

StepResult quasiStaticStep(const PushScene& scene, const PlanarPose& objPose, const PlanarPose& eePose,
                           const PlanarTwist& eeMotion, const Vec2& contact, double dt) {
  const double r = discRadius(scene.ee);
  if (std::abs(signedDistance(scene.object, objPose, contact)) > 1e-6 ||
      std::abs((contact - eePose.translation()).norm() - r) > 1e-6) {
    throw NoSolution("contact point is not on both surfaces");
  }
  const PlanarPose eeEnd(eePose.x() + eeMotion.linear.x() * dt, eePose.y() + eeMotion.linear.y() * dt,
                         eePose.theta() + eeMotion.angular * dt);
  return stepPush(scene, objPose, eePose, eeEnd, dt);
}

std::vector<PlanarPose> resolveInitialContact(const PushScene& scene, const PlanarPose& objInit,
                                              std::vector<PlanarPose> eePath) {
  if (eePath.empty()) throw NoSolution("empty end-effector path");
  const double r = discRadius(scene.ee);
  Vec2 dir = Vec2::Zero();
  for (std::size_t i = 1; i < eePath.size() && dir.norm() < 1e-12; ++i) {
    dir = eePath[i].translation() - eePath[0].translation();
  }
  if (dir.norm() < 1e-12) throw NoSolution("end-effector path does not move");
  dir.normalize();
  const Vec2 c0 = eePath[0].translation();
  const auto gap = [&](double s) { return signedDistance(scene.object, objInit, c0 + s * dir) - r; };

  double lo = 0.0;
  double hi = 0.0;
  const double g0 = gap(0.0);
  if (g0 == 0.0) return eePath;
  // Bracket the root by stepping forward (outside) or backward (penetrating).
  const double sign = g0 > 0.0 ? 1.0 : -1.0;
  double step = std::max(1e-3, 0.25 * scene.object.boundingRadius());
  double s = 0.0;
  bool found = false;
  for (int i = 0; i < 200 && std::abs(s) < 20.0; ++i) {
    const double next = s + sign * step;
    if ((gap(next) > 0.0) != (g0 > 0.0)) {
      lo = s;
      hi = next;
      found = true;
      break;
    }
    s = next;
    // Once past the object centre going forward, moving further cannot make contact.
    if (sign > 0.0 && (c0 + s * dir - objInit.translation()).dot(dir) > scene.object.boundingRadius() + r) {
      break;
    }
  }
  if (!found) throw NoSolution("end-effector path never reaches the object");
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if ((gap(mid) > 0.0) == (g0 > 0.0)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // Prefer the outside end of the bracket so the start is touching, never penetrating.
  const double shift = gap(lo) >= 0.0 ? lo : hi;
  for (auto& p : eePath) p = PlanarPose(p.x() + shift * dir.x(), p.y() + shift * dir.y(), p.theta());
  return eePath;
}

GroundTruthTrajectory simulatePush(const std::vector<PlanarPose>& eePath, const PlanarPose& objInit,
                                   const PushScene& scene, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("timestep must be positive");
  if (eePath.size() < 2) throw NoSolution("end-effector path needs at least two samples");
  discRadius(scene.ee);
  const std::vector<PlanarPose> path = resolveInitialContact(scene, objInit, eePath);

  GroundTruthTrajectory traj{scene, {}, false, {}};
  GroundTruthStep first;
  first.object = objInit;
  first.ee = path[0];
  const ContactFrame cf = contactFrame(scene, objInit, path[0]);
  first.contact = cf.point;
  first.force = instantaneousResponse(scene.params, objInit, cf.point,
                                      materialDisplacement(path[0], path[1], cf.point) / dt)
                    .force;
  traj.steps.push_back(first);

  for (std::size_t k = 1; k < path.size(); ++k) {
    const GroundTruthStep& prev = traj.steps.back();
    try {
      const StepResult s = stepPush(scene, prev.object, prev.ee, path[k], dt);
      traj.steps.push_back({static_cast<double>(k) * dt, s.object, s.ee, s.contact, s.force});
    } catch (const ContactLost& e) {
      traj.truncated = true;
      traj.truncationReason = e.what();
      break;
    }
  }
  return traj;
}

int pathSampleCount(const PusherPathSpec& spec) {
  if (!(spec.dt > 0.0) || !(spec.duration > 0.0)) throw std::invalid_argument("invalid path timing");
  return static_cast<int>(std::lround(spec.duration / spec.dt));
}

std::vector<PlanarPose> generatePusherPath(const PlanarPose& start, const PusherPathSpec& spec) {
  const int n = pathSampleCount(spec);
  std::vector<PlanarPose> out;
  out.reserve(n);
  const double psi0 = start.theta();

  if (spec.kind != PathKind::RandomCurvature) {
    const double kappa = spec.kind == PathKind::Arc ? spec.curvature : 0.0;
    for (int i = 0; i < n; ++i) {
      const double s = spec.speed * spec.dt * i;
      const double psi = psi0 + kappa * s;
      Vec2 offset;
      if (std::abs(kappa) < 1e-12) {
        offset = s * Vec2(std::cos(psi0), std::sin(psi0));
      } else {
        offset = Vec2(std::sin(psi) - std::sin(psi0), std::cos(psi0) - std::cos(psi)) / kappa;
      }
      out.emplace_back(start.x() + offset.x(), start.y() + offset.y(), psi);
    }
    return out;
  }

  // Curvature is a sum of three sinusoids in arc length with seeded amplitudes and phases.
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  struct Mode {
    double amplitude, wavelength, phase;
  };
  std::vector<Mode> modes;
  for (int j = 0; j < 3; ++j) {
    modes.push_back({spec.maxCurvature / 3.0 * (2.0 * unit(rng) - 1.0), 0.2 + 0.6 * unit(rng),
                     2.0 * std::numbers::pi * unit(rng)});
  }
  const auto heading = [&](double s) {
    double psi = psi0;
    for (const auto& m : modes) {
      const double w = 2.0 * std::numbers::pi / m.wavelength;
      psi += m.amplitude / w * (std::cos(m.phase) - std::cos(w * s + m.phase));
    }
    return psi;
  };
  constexpr int kSub = 32;
  Vec2 pos = start.translation();
  const double ds = spec.speed * spec.dt;
  for (int i = 0; i < n; ++i) {
    const double s0 = ds * i;
    out.emplace_back(pos.x(), pos.y(), heading(s0));
    // Composite Simpson over the next interval.
    const double h = ds / kSub;
    for (int k = 0; k < kSub; ++k) {
      const double a = s0 + h * k;
      const auto dir = [&](double s) { return Vec2(std::cos(heading(s)), std::sin(heading(s))); };
      pos += h / 6.0 * (dir(a) + 4.0 * dir(a + 0.5 * h) + dir(a + h));
    }
  }
  return out;
}

namespace {

struct SteeringMode {
  double amplitude, wavelength, phase;
};

std::vector<SteeringMode> steeringModes(const SteeredPushSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SteeringMode> modes;
  for (int j = 0; j < 3; ++j) {
    modes.push_back({spec.maxOffset / 3.0 * (2.0 * unit(rng) - 1.0), 0.1 + 0.3 * unit(rng),
                     2.0 * std::numbers::pi * unit(rng)});
  }
  return modes;
}

}  // namespace

double steeringOffset(const SteeredPushSpec& spec, double arcLength) {
  switch (spec.kind) {
    case PathKind::Straight: return 0.0;
    case PathKind::Arc: return spec.bias;
    case PathKind::RandomCurvature: break;
  }
  double beta = 0.0;
  for (const auto& m : steeringModes(spec)) {
    beta += m.amplitude * std::sin(2.0 * std::numbers::pi * arcLength / m.wavelength + m.phase);
  }
  return beta;
}

GroundTruthTrajectory simulateSteeredPush(const PushScene& scene, const PlanarPose& objInit,
                                          const Vec2& approachDirection, const SteeredPushSpec& spec) {
  if (!(spec.dt > 0.0) || !(spec.duration > 0.0) || !(spec.speed > 0.0)) {
    throw std::invalid_argument("invalid steered push timing");
  }
  if (approachDirection.norm() < 1e-12) throw std::invalid_argument("approach direction is zero");
  const double r = discRadius(scene.ee);
  const int n = static_cast<int>(std::lround(spec.duration / spec.dt));
  if (n < 2) throw NoSolution("steered push needs at least two samples");
  const Vec2 dir = approachDirection.normalized();
  const double psi0 = std::atan2(dir.y(), dir.x());
  const double back = scene.object.boundingRadius() + r + 0.02;
  const Vec2 c0 = objInit.translation() - back * dir;
  const double ds = spec.speed * spec.dt;
  std::vector<PlanarPose> approach = {PlanarPose(c0.x(), c0.y(), psi0),
                                      PlanarPose(c0.x() + ds * dir.x(), c0.y() + ds * dir.y(), psi0)};
  approach = resolveInitialContact(scene, objInit, approach);

  GroundTruthTrajectory traj{scene, {}, false, {}};
  PlanarPose ee = approach[0];
  {
    const Vec2 aim = objInit.translation() - ee.translation();
    ee = PlanarPose(ee.x(), ee.y(), std::atan2(aim.y(), aim.x()) + steeringOffset(spec, 0.0));
  }
  PlanarPose obj = objInit;
  for (int k = 0; k < n; ++k) {
    const Vec2 aim = obj.translation() - ee.translation();
    const double psi = std::atan2(aim.y(), aim.x()) + steeringOffset(spec, ds * k);
    const PlanarPose next(ee.x() + ds * std::cos(psi), ee.y() + ds * std::sin(psi), psi);
    if (k == 0) {
      GroundTruthStep first;
      first.object = obj;
      first.ee = ee;
      const ContactFrame cf = contactFrame(scene, obj, ee);
      first.contact = cf.point;
      first.force =
          instantaneousResponse(scene.params, obj, cf.point, materialDisplacement(ee, next, cf.point) / spec.dt)
              .force;
      traj.steps.push_back(first);
    }
    if (k + 1 == n) break;
    try {
      const StepResult s = stepPush(scene, obj, ee, next, spec.dt);
      traj.steps.push_back({static_cast<double>(k + 1) * spec.dt, s.object, s.ee, s.contact, s.force});
      obj = s.object;
      ee = s.ee;
    } catch (const ContactLost& e) {
      traj.truncated = true;
      traj.truncationReason = e.what();
      break;
    }
  }
  return traj;
}

}  // namespace pushest
