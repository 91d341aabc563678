#pragma once

// Reduced-order model: a single rigid torso driven by ground reaction forces
// at four massless, kinematically commanded legs plus four body-fixed thrusters.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mmloco/env.hpp"
#include "mmloco/error.hpp"

namespace mmloco {

using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline constexpr int kNumLegs = 4;
inline constexpr int kNumThrusters = 4;

// Leg order used everywhere: front-left, front-right, back-right, back-left.
enum class Leg : int { FL = 0, FR = 1, BR = 2, BL = 3 };
inline constexpr std::array<const char*, kNumLegs> kLegNames{"FL", "FR", "BR", "BL"};

struct BodyState {
  Vec3 r = Vec3::Zero();             // COM position, world
  Quat q = Quat::Identity();         // world <- body
  Vec3 v = Vec3::Zero();             // COM velocity, world
  Vec3 w = Vec3::Zero();             // angular velocity, body frame

  Mat3 R() const { return q.toRotationMatrix(); }
};

struct LegConfig {
  double phi = 0.0;  // hip frontal angle (rad)
  double psi = 0.0;  // hip sagittal angle (rad)
  double l = 0.3;    // leg length (m)
};

using LegSet = std::array<LegConfig, kNumLegs>;
using Thrusts = std::array<double, kNumThrusters>;

struct LegLimits {
  double l_min = 0.10;
  double l_max = 0.40;
  double phi_max = 0.6;
  double psi_max = 1.7;
  // first-order rate caps on commanded joints
  double phi_rate_max = 15.0;
  double psi_rate_max = 15.0;
  double l_rate_max = 1.5;
};

struct RobotParams {
  double mass = 4.3;
  Mat3 inertia = Eigen::Vector3d(0.08, 0.12, 0.10).asDiagonal();
  double gravity = 9.81;
  std::array<Vec3, kNumLegs> hip_offsets{Vec3(0.15, 0.08, 0.0), Vec3(0.15, -0.08, 0.0),
                                         Vec3(-0.15, -0.08, 0.0), Vec3(-0.15, 0.08, 0.0)};
  LegLimits limits{};
  double mu = 0.8;
  double k_c = 20000.0;  // normal contact stiffness
  double d_c = 300.0;    // normal contact damping
  double k_t = 20000.0;  // tangential stick stiffness
  double d_t = 300.0;    // tangential damping
  std::array<Vec3, kNumThrusters> thruster_pos{Vec3(0.12, 0.12, 0.05), Vec3(0.12, -0.12, 0.05),
                                               Vec3(-0.12, -0.12, 0.05), Vec3(-0.12, 0.12, 0.05)};
  double thrust_max = 19.0;
  double k_yaw = 0.02;
  // power meter constants
  double power_coeff = 16.0;  // W / N^1.5, actuator-disk proxy per rotor
  double idle_power = 20.0;   // W while any foot is loaded
  // nominal postures
  double stand_height = 0.30;
  double crouch_length = 0.15;

  double weight() const { return mass * gravity; }

  // Rotor handedness: diagonal pairs share a sign.
  static constexpr double yaw_sign(int j) { return (j % 2 == 0) ? 1.0 : -1.0; }

  void validate() const {
    if (!(mass > 0)) throw ConfigError("mass must be positive");
    if (!inertia.isApprox(inertia.transpose(), 1e-12)) throw ConfigError("inertia must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(inertia);
    if (!(es.eigenvalues().minCoeff() > 0)) throw ConfigError("inertia must be positive definite");
    if (!(mu > 0)) throw ConfigError("mu must be positive");
    if (!(thrust_max > 0)) throw ConfigError("thrust_max must be positive");
    if (!(limits.l_min > 0 && limits.l_min < limits.l_max))
      throw ConfigError("leg length limits must satisfy 0 < l_min < l_max");
  }
};

struct FootContact {
  bool in_contact = false;
  Vec3 grf = Vec3::Zero();     // applied force, world
  Vec3 demand = Vec3::Zero();  // stick-contact force before the friction clamp
  bool slip = false;
  bool has_anchor = false;
  Vec2 anchor = Vec2::Zero();  // stick reference, world xy
};

using ContactState = std::array<FootContact, kNumLegs>;

struct SimState {
  double t = 0.0;
  BodyState body{};
  LegSet legs{};
  ContactState contact{};
};

// ---- leg kinematics ---------------------------------------------------------

// Hip-to-foot vector in the body frame. Straight-down leg rotated by psi about
// the pitch axis (positive swings the foot forward), then by phi about the roll
// axis (positive swings the foot toward +y).
inline Vec3 leg_vector(const LegConfig& c) {
  const double sps = std::sin(c.psi), cps = std::cos(c.psi);
  const double sph = std::sin(c.phi), cph = std::cos(c.phi);
  return {c.l * sps, c.l * cps * sph, -c.l * cps * cph};
}

// Columns: d/dphi, d/dpsi, d/dl of leg_vector.
inline Mat3 leg_jacobian(const LegConfig& c) {
  const double sps = std::sin(c.psi), cps = std::cos(c.psi);
  const double sph = std::sin(c.phi), cph = std::cos(c.phi);
  Mat3 J;
  J.col(0) = Vec3(0.0, c.l * cps * cph, c.l * cps * sph);
  J.col(1) = Vec3(c.l * cps, -c.l * sps * sph, c.l * sps * cph);
  J.col(2) = Vec3(sps, cps * sph, -cps * cph);
  return J;
}

inline void check_leg_limits(const LegConfig& c, const LegLimits& lim) {
  constexpr double eps = 1e-12;
  if (c.l < lim.l_min - eps) throw JointLimitError("l", c.l, lim.l_min);
  if (c.l > lim.l_max + eps) throw JointLimitError("l", c.l, lim.l_max);
  if (std::abs(c.phi) > lim.phi_max + eps) throw JointLimitError("phi", c.phi, lim.phi_max);
  if (std::abs(c.psi) > lim.psi_max + eps) throw JointLimitError("psi", c.psi, lim.psi_max);
}

inline LegConfig clamp_to_limits(const LegConfig& c, const LegLimits& lim) {
  return {std::clamp(c.phi, -lim.phi_max, lim.phi_max), std::clamp(c.psi, -lim.psi_max, lim.psi_max),
          std::clamp(c.l, lim.l_min, lim.l_max)};
}

inline Vec3 foot_position_unchecked(const BodyState& body, const LegConfig& leg, int i,
                                    const RobotParams& p) {
  return body.r + body.q * (p.hip_offsets[static_cast<std::size_t>(i)] + leg_vector(leg));
}

inline Vec3 foot_position(const BodyState& body, const LegConfig& leg, int i, const RobotParams& p) {
  check_leg_limits(leg, p.limits);
  return foot_position_unchecked(body, leg, i, p);
}

// Leg configuration for a body-frame hip-to-foot vector, without limit checks.
inline LegConfig leg_ik_local(const Vec3& d) {
  LegConfig c;
  c.l = d.norm();
  c.psi = std::atan2(d.x(), std::hypot(d.y(), d.z()));
  c.phi = std::atan2(d.y(), -d.z());
  return c;
}

inline LegConfig leg_ik(const BodyState& body, const Vec3& foot_world, int i, const RobotParams& p) {
  const Vec3 d = body.q.conjugate() * (foot_world - body.r) - p.hip_offsets[static_cast<std::size_t>(i)];
  const LegConfig c = leg_ik_local(d);
  const LegConfig clamped = clamp_to_limits(c, p.limits);
  if (clamped.phi != c.phi || clamped.psi != c.psi || clamped.l != c.l) {
    const double miss = (foot_position_unchecked(body, clamped, i, p) - foot_world).norm();
    throw UnreachableError(i, miss);
  }
  return c;
}

// Move `current` toward `command` by at most the joint rate caps over dt.
inline LegConfig rate_limit(const LegConfig& current, const LegConfig& command, const LegLimits& lim,
                            double dt) {
  auto step = [dt](double from, double to, double rate) {
    const double max_step = rate * dt;
    return from + std::clamp(to - from, -max_step, max_step);
  };
  return {step(current.phi, command.phi, lim.phi_rate_max), step(current.psi, command.psi, lim.psi_rate_max),
          step(current.l, command.l, lim.l_rate_max)};
}

// World velocity of foot i given joint rates.
inline Vec3 foot_velocity(const BodyState& body, const LegConfig& leg, const LegConfig& rate, int i,
                          const RobotParams& p) {
  const Vec3 lever = p.hip_offsets[static_cast<std::size_t>(i)] + leg_vector(leg);
  const Vec3 rel = leg_jacobian(leg) * Vec3(rate.phi, rate.psi, rate.l);
  return body.v + body.q * (body.w.cross(lever) + rel);
}

// ---- contact ---------------------------------------------------------------

// Spring-damper normal force plus stick spring toward the anchor, clamped to
// the friction pyramid. Slipping feet get their anchor moved under the foot.
inline ContactState contact_forces(const BodyState& body, const LegSet& legs, const LegSet& rates,
                                   const ContactState& previous, const Environment& env,
                                   const RobotParams& p) {
  ContactState out;
  for (int i = 0; i < kNumLegs; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Vec3 foot = foot_position_unchecked(body, legs[k], i, p);
    FootContact fc;
    const double depth = env.surface_height(foot.x(), foot.y()) - foot.z();
    if (depth > 0.0) {
      const Vec3 vel = foot_velocity(body, legs[k], rates[k], i, p);
      fc.in_contact = true;
      fc.has_anchor = true;
      fc.anchor = previous[k].has_anchor ? previous[k].anchor : Vec2(foot.x(), foot.y());
      const double fz = std::max(0.0, p.k_c * depth - p.d_c * vel.z());
      const Vec2 ft = -p.k_t * (foot.head<2>() - fc.anchor) - p.d_t * vel.head<2>();
      fc.demand = Vec3(ft.x(), ft.y(), fz);
      const double lim = p.mu * fz;
      if (std::abs(ft.x()) > lim || std::abs(ft.y()) > lim) {
        fc.slip = true;
        fc.anchor = foot.head<2>();
      }
      fc.grf = Vec3(std::clamp(ft.x(), -lim, lim), std::clamp(ft.y(), -lim, lim), fz);
    }
    out[k] = fc;
  }
  return out;
}

// ---- rigid-body step -------------------------------------------------------

inline bool finite(const BodyState& b) {
  return b.r.allFinite() && b.q.coeffs().allFinite() && b.v.allFinite() && b.w.allFinite();
}

struct Wrench {
  Vec3 force = Vec3::Zero();   // world
  Vec3 torque = Vec3::Zero();  // body
};

inline Wrench thruster_wrench(const BodyState& body, const Thrusts& thrusts, const RobotParams& p) {
  Wrench w;
  double total = 0.0;
  for (int j = 0; j < kNumThrusters; ++j) {
    const double T = thrusts[static_cast<std::size_t>(j)];
    total += T;
    w.torque += p.thruster_pos[static_cast<std::size_t>(j)].cross(Vec3(0, 0, T));
    w.torque.z() += RobotParams::yaw_sign(j) * p.k_yaw * T;
  }
  w.force = body.q * Vec3(0, 0, total);
  return w;
}

/// Advance one step of semi-implicit Euler. Legs move toward `leg_cmd` under
/// the rate caps, contact forces are evaluated, velocities are updated, then
/// the pose. Throws NonFiniteState; the input state is left untouched.
inline SimState step(const SimState& s, const LegSet& leg_cmd, const Thrusts& thrusts, double dt,
                     const Environment& env, const RobotParams& p) {
  if (!(dt > 0)) throw Error("step: dt must be positive");
  for (double T : thrusts)
    if (!(T >= -1e-12 && T <= p.thrust_max + 1e-9)) throw Error("step: thrust outside [0, thrust_max]");

  SimState n;
  n.t = s.t + dt;
  LegSet rates;
  for (std::size_t k = 0; k < kNumLegs; ++k) {
    n.legs[k] = rate_limit(s.legs[k], clamp_to_limits(leg_cmd[k], p.limits), p.limits, dt);
    rates[k] = {(n.legs[k].phi - s.legs[k].phi) / dt, (n.legs[k].psi - s.legs[k].psi) / dt,
                (n.legs[k].l - s.legs[k].l) / dt};
  }
  n.contact = contact_forces(s.body, n.legs, rates, s.contact, env, p);

  const BodyState& b = s.body;
  const Vec3 g(0, 0, -p.gravity);
  const Wrench thrust = thruster_wrench(b, thrusts, p);
  Vec3 force = p.mass * g + thrust.force;
  Vec3 torque_world = Vec3::Zero();
  for (std::size_t k = 0; k < kNumLegs; ++k) {
    const auto& fc = n.contact[k];
    if (!fc.in_contact) continue;
    const Vec3 foot = foot_position_unchecked(b, n.legs[k], static_cast<int>(k), p);
    force += fc.grf;
    torque_world += (foot - b.r).cross(fc.grf);
  }
  const Vec3 torque = b.q.conjugate() * torque_world + thrust.torque;
  const Vec3 wdot = p.inertia.inverse() * (torque - b.w.cross(p.inertia * b.w));

  BodyState& nb = n.body;
  nb.v = b.v + dt * force / p.mass;
  nb.w = b.w + dt * wdot;
  // gravity is integrated exactly; everything else is symplectic Euler
  nb.r = b.r + dt * nb.v - 0.5 * dt * dt * g;
  const Vec3 half = 0.5 * dt * nb.w;
  const double angle = half.norm();
  Quat dq = Quat::Identity();
  if (angle > 0) {
    const Vec3 axis = half / angle;
    dq = Quat(std::cos(angle), std::sin(angle) * axis.x(), std::sin(angle) * axis.y(),
              std::sin(angle) * axis.z());
  }
  nb.q = (b.q * dq).normalized();
  if (!finite(nb)) throw NonFiniteState("non-finite state at t = " + std::to_string(n.t));
  return n;
}

// ---- attitude helpers --------------------------------------------------------

// Z-Y-X Euler angles (roll, pitch, yaw).
inline Vec3 rpy(const Quat& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  const double roll = std::atan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y));
  const double pitch = std::asin(std::clamp(2 * (w * y - z * x), -1.0, 1.0));
  const double yaw = std::atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z));
  return {roll, pitch, yaw};
}

inline Quat quat_from_rpy(double roll, double pitch, double yaw) {
  return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
              Eigen::AngleAxisd(roll, Vec3::UnitX()));
}

// ---- energy metering ---------------------------------------------------------

struct Energy {
  double legged = 0.0;
  double aerial = 0.0;
  double total() const { return legged + aerial; }
};

struct StepRecord {
  SimState state;
  Thrusts thrusts{};
};

/// Incremental energy meter. Aerial: sum_j c_e T_j^1.5 dt. Legged: the
/// actuator power |grf . v_foot,rel| summed over loaded feet plus an idle draw
/// while any foot carries load, where v_foot,rel is the foot velocity relative
/// to the torso.
class PowerMeter {
 public:
  explicit PowerMeter(const RobotParams& p) : p_(&p) {}

  void add(const SimState& prev, const SimState& cur, const Thrusts& thrusts, double dt) {
    double air = 0.0;
    for (double T : thrusts) air += p_->power_coeff * std::pow(std::max(T, 0.0), 1.5);
    energy_.aerial += air * dt;

    double leg = 0.0;
    bool loaded = false;
    for (std::size_t k = 0; k < kNumLegs; ++k) {
      const auto& fc = cur.contact[k];
      if (!fc.in_contact) continue;
      loaded = true;
      const Vec3 rel = cur.body.q * (leg_vector(cur.legs[k]) - leg_vector(prev.legs[k])) / dt;
      leg += std::abs(fc.grf.dot(rel));
    }
    if (loaded) leg += p_->idle_power;
    energy_.legged += leg * dt;
  }

  const Energy& energy() const { return energy_; }

 private:
  const RobotParams* p_;
  Energy energy_{};
};

/// Energy per mode over a uniformly sampled history.
inline Energy meter_power(std::span<const StepRecord> history, const RobotParams& p) {
  PowerMeter meter(p);
  for (std::size_t i = 1; i < history.size(); ++i) {
    const double dt = history[i].state.t - history[i - 1].state.t;
    meter.add(history[i - 1].state, history[i].state, history[i].thrusts, dt);
  }
  return meter.energy();
}

// ---- config I/O ----------------------------------------------------------------

inline nlohmann::json to_json(const RobotParams& p) {
  nlohmann::json hips = nlohmann::json::array(), thr = nlohmann::json::array();
  for (const auto& h : p.hip_offsets) hips.push_back(vec_to_json(h));
  for (const auto& t : p.thruster_pos) thr.push_back(vec_to_json(t));
  nlohmann::json inertia = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) inertia.push_back({p.inertia(r, 0), p.inertia(r, 1), p.inertia(r, 2)});
  return {{"mass", p.mass},
          {"inertia", inertia},
          {"gravity", p.gravity},
          {"hip_offsets", hips},
          {"limits",
           {{"l_min", p.limits.l_min},
            {"l_max", p.limits.l_max},
            {"phi_max", p.limits.phi_max},
            {"psi_max", p.limits.psi_max},
            {"phi_rate_max", p.limits.phi_rate_max},
            {"psi_rate_max", p.limits.psi_rate_max},
            {"l_rate_max", p.limits.l_rate_max}}},
          {"mu", p.mu},
          {"k_c", p.k_c},
          {"d_c", p.d_c},
          {"k_t", p.k_t},
          {"d_t", p.d_t},
          {"thruster_pos", thr},
          {"thrust_max", p.thrust_max},
          {"k_yaw", p.k_yaw},
          {"power_coeff", p.power_coeff},
          {"idle_power", p.idle_power},
          {"stand_height", p.stand_height},
          {"crouch_length", p.crouch_length}};
}

// Missing keys keep their defaults.
inline RobotParams robot_params_from_json(const nlohmann::json& j) {
  RobotParams p;
  try {
    p.mass = j.value("mass", p.mass);
    if (j.contains("inertia")) {
      const auto& m = j.at("inertia");
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) p.inertia(r, c) = m.at(r).at(c).get<double>();
    }
    p.gravity = j.value("gravity", p.gravity);
    if (j.contains("hip_offsets"))
      for (std::size_t k = 0; k < kNumLegs; ++k) p.hip_offsets[k] = vec_from_json(j.at("hip_offsets").at(k));
    if (j.contains("limits")) {
      const auto& l = j.at("limits");
      p.limits.l_min = l.value("l_min", p.limits.l_min);
      p.limits.l_max = l.value("l_max", p.limits.l_max);
      p.limits.phi_max = l.value("phi_max", p.limits.phi_max);
      p.limits.psi_max = l.value("psi_max", p.limits.psi_max);
      p.limits.phi_rate_max = l.value("phi_rate_max", p.limits.phi_rate_max);
      p.limits.psi_rate_max = l.value("psi_rate_max", p.limits.psi_rate_max);
      p.limits.l_rate_max = l.value("l_rate_max", p.limits.l_rate_max);
    }
    p.mu = j.value("mu", p.mu);
    p.k_c = j.value("k_c", p.k_c);
    p.d_c = j.value("d_c", p.d_c);
    p.k_t = j.value("k_t", p.k_t);
    p.d_t = j.value("d_t", p.d_t);
    if (j.contains("thruster_pos"))
      for (std::size_t k = 0; k < kNumThrusters; ++k)
        p.thruster_pos[k] = vec_from_json(j.at("thruster_pos").at(k));
    p.thrust_max = j.value("thrust_max", p.thrust_max);
    p.k_yaw = j.value("k_yaw", p.k_yaw);
    p.power_coeff = j.value("power_coeff", p.power_coeff);
    p.idle_power = j.value("idle_power", p.idle_power);
    p.stand_height = j.value("stand_height", p.stand_height);
    p.crouch_length = j.value("crouch_length", p.crouch_length);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("robot params: ") + e.what());
  }
  p.validate();
  return p;
}

}  // namespace mmloco
