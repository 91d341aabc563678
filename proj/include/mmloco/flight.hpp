#pragma once

// Cascaded flight control for the four-thruster layout: position loop ->
// attitude loop -> X-quad mixer.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <json.hpp>

#include "mmloco/error.hpp"
#include "mmloco/rom.hpp"

namespace mmloco {

struct FlightGains {
  double kp_pos = 4.0;
  double kd_pos = 3.0;
  double kp_att = 60.0;
  double kd_att = 8.0;
  double a_max = 4.0;     // m/s^2
  double tilt_max = 0.5;  // rad

  void validate() const {
    if (!(kp_pos > 0 && kd_pos > 0 && kp_att > 0 && kd_att > 0 && a_max > 0 && tilt_max > 0))
      throw ConfigError("flight gains must be positive");
    if (!(tilt_max < std::numbers::pi / 2)) throw ConfigError("tilt_max must be below pi/2");
  }
};

struct PositionRef {
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  double yaw = 0.0;
};

struct AttitudeCommand {
  Quat q_des = Quat::Identity();
  double thrust_total = 0.0;
};

inline AttitudeCommand position_loop(const PositionRef& ref, const BodyState& body, const FlightGains& g,
                                     const RobotParams& p) {
  Vec3 a = g.kp_pos * (ref.r - body.r) + g.kd_pos * (ref.v - body.v);
  const double n = a.norm();
  if (n > g.a_max) a *= g.a_max / n;
  a.z() += p.gravity;

  // tilt the body z axis toward a, limited to tilt_max
  Vec3 z_des = a.normalized();
  const double tilt = std::acos(std::clamp(z_des.z(), -1.0, 1.0));
  if (tilt > g.tilt_max) {
    const Vec2 h = z_des.head<2>();
    const double hn = h.norm();
    z_des = hn > 0 ? Vec3(std::sin(g.tilt_max) * h.x() / hn, std::sin(g.tilt_max) * h.y() / hn,
                          std::cos(g.tilt_max))
                   : Vec3::UnitZ();
  }
  // yaw-first construction: x_c is the heading in the horizontal plane
  const Vec3 x_c(std::cos(ref.yaw), std::sin(ref.yaw), 0.0);
  Vec3 y_des = z_des.cross(x_c);
  if (y_des.norm() < 1e-9) y_des = Vec3::UnitY();
  y_des.normalize();
  const Vec3 x_des = y_des.cross(z_des);
  Mat3 Rd;
  Rd.col(0) = x_des;
  Rd.col(1) = y_des;
  Rd.col(2) = z_des;

  AttitudeCommand out;
  out.q_des = Quat(Rd).normalized();
  out.thrust_total = std::max(0.0, p.mass * a.dot(body.q * Vec3::UnitZ()));
  return out;
}

/// Quaternion PD: tau = I (kp e + kd (0 - w)), e = vector part of the error
/// quaternion taken along the shortest rotation.
inline Vec3 attitude_loop(const Quat& q_des, const BodyState& body, const FlightGains& g, const RobotParams& p) {
  Quat e = body.q.conjugate() * q_des;
  if (e.w() < 0) e.coeffs() = -e.coeffs();
  return p.inertia * (g.kp_att * e.vec() - g.kd_att * body.w);
}

struct MixerResult {
  Thrusts thrusts{};
  bool saturated = false;
};

namespace detail {

// rows: total, tau_x, tau_y, tau_z
inline Eigen::Matrix4d allocation(const RobotParams& p) {
  Eigen::Matrix4d A;
  for (int j = 0; j < kNumThrusters; ++j) {
    const Vec3& r = p.thruster_pos[static_cast<std::size_t>(j)];
    A(0, j) = 1.0;
    A(1, j) = r.y();
    A(2, j) = -r.x();
    A(3, j) = RobotParams::yaw_sign(j) * p.k_yaw;
  }
  return A;
}

inline bool within(const Eigen::Vector4d& t, double tmax) {
  constexpr double eps = 1e-12;
  return (t.array() >= -eps).all() && (t.array() <= tmax + eps).all();
}

}  // namespace detail

/// Exact 4x4 allocation. Under saturation, total thrust is kept first, then
/// roll/pitch torque, then yaw, each scaled back to the largest feasible share.
inline MixerResult mixer(double thrust_total, const Vec3& torque, const RobotParams& p) {
  const Eigen::Matrix4d A = detail::allocation(p);
  const Eigen::Matrix4d Ainv = A.inverse();
  auto solve = [&](double total, double rp_scale, double yaw_scale) -> Eigen::Vector4d {
    return Ainv * Eigen::Vector4d(total, rp_scale * torque.x(), rp_scale * torque.y(), yaw_scale * torque.z());
  };
  auto finish = [&](const Eigen::Vector4d& t, bool sat) {
    MixerResult m;
    m.saturated = sat;
    for (std::size_t j = 0; j < kNumThrusters; ++j)
      m.thrusts[j] = std::clamp(t(static_cast<Eigen::Index>(j)), 0.0, p.thrust_max);
    return m;
  };
  // largest s in [0,1] with feasible(s), given feasible(0)
  auto largest = [&](auto&& feasible) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 50; ++i) {
      const double mid = 0.5 * (lo + hi);
      (feasible(mid) ? lo : hi) = mid;
    }
    return lo;
  };

  const Eigen::Vector4d full = solve(thrust_total, 1.0, 1.0);
  if (detail::within(full, p.thrust_max)) return finish(full, false);

  const double total = std::clamp(thrust_total, 0.0, kNumThrusters * p.thrust_max);
  if (!detail::within(solve(total, 1.0, 0.0), p.thrust_max)) {
    const double s = largest([&](double x) { return detail::within(solve(total, x, 0.0), p.thrust_max); });
    return finish(solve(total, s, 0.0), true);
  }
  const double s = largest([&](double x) { return detail::within(solve(total, 1.0, x), p.thrust_max); });
  return finish(solve(total, 1.0, s), true);
}

// Forces and torques produced by a set of thrusts: (total, tau_x, tau_y, tau_z).
inline Eigen::Vector4d mixer_wrench(const Thrusts& t, const RobotParams& p) {
  return detail::allocation(p) * Eigen::Vector4d(t[0], t[1], t[2], t[3]);
}

struct FlightOutput {
  Thrusts thrusts{};
  AttitudeCommand attitude{};
  Vec3 torque = Vec3::Zero();
  bool saturated = false;
};

inline FlightOutput flight_control(const PositionRef& ref, const BodyState& body, const FlightGains& g,
                                   const RobotParams& p) {
  FlightOutput out;
  out.attitude = position_loop(ref, body, g, p);
  out.torque = attitude_loop(out.attitude.q_des, body, g, p);
  const MixerResult m = mixer(out.attitude.thrust_total, out.torque, p);
  out.thrusts = m.thrusts;
  out.saturated = m.saturated;
  return out;
}

inline nlohmann::json to_json(const FlightGains& g) {
  return {{"kp_pos", g.kp_pos}, {"kd_pos", g.kd_pos}, {"kp_att", g.kp_att},
          {"kd_att", g.kd_att}, {"a_max", g.a_max},   {"tilt_max", g.tilt_max}};
}

inline FlightGains flight_gains_from_json(const nlohmann::json& j, FlightGains g = {}) {
  g.kp_pos = j.value("kp_pos", g.kp_pos);
  g.kd_pos = j.value("kd_pos", g.kd_pos);
  g.kp_att = j.value("kp_att", g.kp_att);
  g.kd_att = j.value("kd_att", g.kd_att);
  g.a_max = j.value("a_max", g.a_max);
  g.tilt_max = j.value("tilt_max", g.tilt_max);
  g.validate();
  return g;
}

}  // namespace mmloco
