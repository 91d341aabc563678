#pragma once

// End-to-end execution: plan following with the legged/aerial transition
// state machine, in-place gait runs, trajectory logs and their analysis,
// discretization comparison and cost calibration.

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmloco/env.hpp"
#include "mmloco/error.hpp"
#include "mmloco/flight.hpp"
#include "mmloco/gait.hpp"
#include "mmloco/governor.hpp"
#include "mmloco/locomotion.hpp"
#include "mmloco/planner.hpp"
#include "mmloco/rom.hpp"

namespace mmloco {

// ---- phases -------------------------------------------------------------------

enum class MissionPhase : int { Walk = 0, PrepareTakeoff, Ascend, Cruise, Descend, TouchdownDetect, Stand };

inline constexpr std::array<const char*, 7> kPhaseNames{"Walk",    "PrepareTakeoff",  "Ascend", "Cruise",
                                                        "Descend", "TouchdownDetect", "Stand"};

inline const char* phase_name(MissionPhase p) { return kPhaseNames[static_cast<std::size_t>(p)]; }

inline MissionPhase phase_from_name(const std::string& s) {
  for (std::size_t i = 0; i < kPhaseNames.size(); ++i)
    if (s == kPhaseNames[i]) return static_cast<MissionPhase>(i);
  throw ConfigError("unknown mission phase '" + s + "'");
}

/// Staying put, one step along the takeoff/landing cycle, or Walk <-> Stand.
inline bool legal_transition(MissionPhase from, MissionPhase to) {
  if (from == to) return true;
  if (from == MissionPhase::Stand && to == MissionPhase::Walk) return true;
  if (from == MissionPhase::Walk && to == MissionPhase::Stand) return true;
  const int a = static_cast<int>(from), b = static_cast<int>(to);
  return from != MissionPhase::Stand && b == a + 1;
}

// ---- configuration ----------------------------------------------------------------

struct MissionParams {
  double dt = 1e-3;
  double edge_timeout = 30.0;    // s per plan edge
  double walk_speed = 0.2;       // m/s along legged edges
  double air_speed = 0.5;        // m/s along aerial and vertical edges
  double legged_tol = 0.05;      // m, waypoint reached
  double aerial_tol = 0.1;       // m
  double probe_clearance = 0.1;  // feet above the surface at the end of Descend
  double touchdown_speed = 0.2;  // m/s sink rate while probing for ground
  double touchdown_vmax = 0.05;  // m/s
  double touchdown_dwell = 0.2;  // s with four contacts and low speed
  double posture_rate = 0.15;    // m/s for crouch and stand-up height changes
  double thrust_ramp = 0.5;      // s to unload the rotors after landing
  double settle_time = 0.3;      // s standing before the first and after the last edge
  double gait_settle = 0.5;      // s standing before a gait run starts
  Vec3 kick_v{0.05, -0.05, 0.0};  // velocity impulse at gait start
  Vec3 kick_w{0.3, 0.2, 0.1};     // body rate impulse at gait start
  std::array<double, 4> poincare_weights{1.0, 1.0, 1.0, 1.0};  // position, attitude, velocity, rate
};

struct MissionConfig {
  RobotParams robot{};
  GaitSchedule gait = GaitSchedule::trot(2.0);
  GovernorConfig governor{};
  LocomotionConfig locomotion{};
  FlightGains flight{};
  CostModel cost{};
  PlannerOptions planner{};
  RouteOptions route{};
  MissionParams mission{};
};

inline nlohmann::json to_json(const MissionParams& m) {
  return {{"dt", m.dt},
          {"edge_timeout", m.edge_timeout},
          {"walk_speed", m.walk_speed},
          {"air_speed", m.air_speed},
          {"legged_tol", m.legged_tol},
          {"aerial_tol", m.aerial_tol},
          {"probe_clearance", m.probe_clearance},
          {"touchdown_speed", m.touchdown_speed},
          {"touchdown_vmax", m.touchdown_vmax},
          {"touchdown_dwell", m.touchdown_dwell},
          {"posture_rate", m.posture_rate},
          {"thrust_ramp", m.thrust_ramp},
          {"settle_time", m.settle_time},
          {"gait_settle", m.gait_settle},
          {"kick_v", vec_to_json(m.kick_v)},
          {"kick_w", vec_to_json(m.kick_w)},
          {"poincare_weights", m.poincare_weights}};
}

inline MissionParams mission_params_from_json(const nlohmann::json& j, MissionParams m = {}) {
  try {
    m.dt = j.value("dt", m.dt);
    m.edge_timeout = j.value("edge_timeout", m.edge_timeout);
    m.walk_speed = j.value("walk_speed", m.walk_speed);
    m.air_speed = j.value("air_speed", m.air_speed);
    m.legged_tol = j.value("legged_tol", m.legged_tol);
    m.aerial_tol = j.value("aerial_tol", m.aerial_tol);
    m.probe_clearance = j.value("probe_clearance", m.probe_clearance);
    m.touchdown_speed = j.value("touchdown_speed", m.touchdown_speed);
    m.touchdown_vmax = j.value("touchdown_vmax", m.touchdown_vmax);
    m.touchdown_dwell = j.value("touchdown_dwell", m.touchdown_dwell);
    m.posture_rate = j.value("posture_rate", m.posture_rate);
    m.thrust_ramp = j.value("thrust_ramp", m.thrust_ramp);
    m.settle_time = j.value("settle_time", m.settle_time);
    m.gait_settle = j.value("gait_settle", m.gait_settle);
    if (j.contains("kick_v")) m.kick_v = vec_from_json(j.at("kick_v"));
    if (j.contains("kick_w")) m.kick_w = vec_from_json(j.at("kick_w"));
    if (j.contains("poincare_weights")) m.poincare_weights = j.at("poincare_weights").get<std::array<double, 4>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mission: ") + e.what());
  }
  if (!(m.dt > 0)) throw ConfigError("mission dt must be positive");
  if (!(m.edge_timeout > 0 && m.walk_speed > 0 && m.air_speed > 0 && m.touchdown_speed > 0 && m.posture_rate > 0))
    throw ConfigError("mission timeout and speeds must be positive");
  return m;
}

inline nlohmann::json to_json(const MissionConfig& c) {
  return {{"robot", to_json(c.robot)},         {"gait", to_json(c.gait)},
          {"governor", to_json(c.governor)},   {"locomotion", to_json(c.locomotion)},
          {"flight", to_json(c.flight)},       {"cost", to_json(c.cost)},
          {"planner", to_json(c.planner)},     {"route", to_json(c.route)},
          {"mission", to_json(c.mission)}};
}

// Every section is optional; missing keys keep their defaults.
inline MissionConfig mission_config_from_json(const nlohmann::json& j) {
  MissionConfig c;
  if (j.contains("robot")) c.robot = robot_params_from_json(j.at("robot"));
  if (j.contains("gait")) c.gait = gait_from_json(j.at("gait"), c.gait);
  if (j.contains("governor")) c.governor = governor_from_json(j.at("governor"), c.governor);
  if (j.contains("locomotion")) c.locomotion = locomotion_from_json(j.at("locomotion"), c.locomotion);
  if (j.contains("flight")) c.flight = flight_gains_from_json(j.at("flight"), c.flight);
  if (j.contains("cost")) c.cost = cost_from_json(j.at("cost"), c.cost);
  if (j.contains("planner")) c.planner = planner_options_from_json(j.at("planner"), c.planner);
  if (j.contains("route")) c.route = route_options_from_json(j.at("route"), c.route);
  if (j.contains("mission")) c.mission = mission_params_from_json(j.at("mission"), c.mission);
  c.robot.validate();
  return c;
}

inline MissionConfig load_mission_config(const std::string& path) {
  return mission_config_from_json(read_json_file(path));
}

/// Environment plus start and goal points; an optional "route" section
/// overrides the configured planner choices.
struct Scenario {
  Environment env;
  Vec3 start = Vec3::Zero();
  Vec3 goal = Vec3::Zero();
  std::optional<nlohmann::json> route;
};

inline Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    Scenario s{environment_from_json(j.at("environment")), vec_from_json(j.at("start")),
               vec_from_json(j.at("goal")), std::nullopt};
    if (j.contains("route")) s.route = j.at("route");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario file: ") + e.what());
  }
}

inline Scenario load_scenario(const std::string& path) { return scenario_from_json(read_json_file(path)); }

// ---- trajectory log -----------------------------------------------------------------

struct LogRow {
  double t = 0.0;
  BodyState body{};
  LegSet legs{};
  Thrusts thrusts{};
  std::array<Vec3, kNumLegs> grf{};
  std::array<bool, kNumLegs> contact{};
  std::array<bool, kNumLegs> stance{};
  MissionPhase phase = MissionPhase::Stand;
  int edge = -1;
  double governor = 1.0;  // accepted fraction of the governor step
  Energy energy{};
  double gait_clock = -1.0;  // s since gait start, negative when no gait runs
  double margin = std::numeric_limits<double>::quiet_NaN();
};

struct MissionLog {
  std::vector<LogRow> rows;
  bool fell = false;
  bool aborted = false;
  std::string reason;
};

inline std::vector<std::string> log_columns() {
  std::vector<std::string> c{"t", "r_x", "r_y", "r_z", "q_w", "q_x", "q_y", "q_z",
                             "v_x", "v_y", "v_z", "w_x", "w_y", "w_z"};
  for (const char* leg : kLegNames)
    for (const char* j : {"phi", "psi", "l"}) c.push_back(std::string(leg) + "_" + j);
  for (int j = 0; j < kNumThrusters; ++j) c.push_back("T" + std::to_string(j));
  for (const char* leg : kLegNames)
    for (const char* a : {"fx", "fy", "fz"}) c.push_back(std::string(leg) + "_" + a);
  for (const char* leg : kLegNames) c.push_back(std::string(leg) + "_contact");
  for (const char* leg : kLegNames) c.push_back(std::string(leg) + "_stance");
  for (const char* x : {"phase", "edge", "governor", "E_legged", "E_aerial", "gait_clock", "margin"}) c.push_back(x);
  return c;
}

namespace detail {

// Shortest round-trip text for a double, identical on every run.
inline void put_number(std::string& out, double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.append(buf, res.ptr);
}

inline double get_number(std::string_view s) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("log: malformed number '" + std::string(s) + "'");
  return x;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline std::string to_csv_line(const LogRow& r) {
  std::string s;
  s.reserve(1024);
  auto num = [&](double x) {
    if (!s.empty()) s.push_back(',');
    detail::put_number(s, x);
  };
  auto text = [&](const char* x) {
    s.push_back(',');
    s.append(x);
  };
  num(r.t);
  for (int i = 0; i < 3; ++i) num(r.body.r(i));
  num(r.body.q.w());
  num(r.body.q.x());
  num(r.body.q.y());
  num(r.body.q.z());
  for (int i = 0; i < 3; ++i) num(r.body.v(i));
  for (int i = 0; i < 3; ++i) num(r.body.w(i));
  for (const auto& l : r.legs) {
    num(l.phi);
    num(l.psi);
    num(l.l);
  }
  for (double T : r.thrusts) num(T);
  for (const auto& f : r.grf)
    for (int i = 0; i < 3; ++i) num(f(i));
  for (bool c : r.contact) num(c ? 1 : 0);
  for (bool c : r.stance) num(c ? 1 : 0);
  text(phase_name(r.phase));
  num(r.edge);
  num(r.governor);
  num(r.energy.legged);
  num(r.energy.aerial);
  num(r.gait_clock);
  num(r.margin);
  return s;
}

inline void write_log_csv(std::ostream& out, const MissionLog& log) {
  const auto cols = log_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : log.rows) out << to_csv_line(r) << '\n';
}

inline void write_log_csv(const std::string& path, const MissionLog& log) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_log_csv(out, log);
}

inline MissionLog read_log_csv(std::istream& in) {
  const auto cols = log_columns();
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("log: empty file");
  const auto header = detail::split_csv(line);
  if (header.size() != cols.size()) throw ConfigError("log: unexpected header");
  for (std::size_t i = 0; i < cols.size(); ++i)
    if (header[i] != cols[i]) throw ConfigError("log: unexpected column '" + std::string(header[i]) + "'");

  MissionLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != cols.size()) throw ConfigError("log: wrong field count");
    std::size_t k = 0;
    auto num = [&] { return detail::get_number(f[k++]); };
    LogRow r;
    r.t = num();
    for (int i = 0; i < 3; ++i) r.body.r(i) = num();
    const double qw = num(), qx = num(), qy = num(), qz = num();
    r.body.q = Quat(qw, qx, qy, qz);
    for (int i = 0; i < 3; ++i) r.body.v(i) = num();
    for (int i = 0; i < 3; ++i) r.body.w(i) = num();
    for (auto& l : r.legs) {
      l.phi = num();
      l.psi = num();
      l.l = num();
    }
    for (double& T : r.thrusts) T = num();
    for (auto& g : r.grf)
      for (int i = 0; i < 3; ++i) g(i) = num();
    for (auto&& c : r.contact) c = num() != 0.0;
    for (auto&& c : r.stance) c = num() != 0.0;
    r.phase = phase_from_name(std::string(f[k++]));
    r.edge = static_cast<int>(num());
    r.governor = num();
    r.energy.legged = num();
    r.energy.aerial = num();
    r.gait_clock = num();
    r.margin = num();
    log.rows.push_back(r);
  }
  return log;
}

inline MissionLog read_log_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return read_log_csv(in);
}

// ---- log analysis -------------------------------------------------------------------

struct LogValidation {
  bool ok = true;
  std::vector<std::string> problems;
};

/// Strictly increasing time, legal phase changes, non-decreasing energy meters,
/// and contact forces consistent with the contact flags.
inline LogValidation validate_log(const MissionLog& log) {
  LogValidation v;
  auto fail = [&](std::size_t i, const std::string& what) {
    v.ok = false;
    if (v.problems.size() < 20) v.problems.push_back("row " + std::to_string(i) + ": " + what);
  };
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    const auto& r = log.rows[i];
    for (std::size_t k = 0; k < kNumLegs; ++k) {
      if (!r.contact[k] && r.grf[k] != Vec3::Zero()) fail(i, "force on a foot without contact");
      if (r.grf[k].z() < 0) fail(i, "tensile normal force");
    }
    if (i == 0) continue;
    const auto& p = log.rows[i - 1];
    if (!(r.t > p.t)) fail(i, "time not increasing");
    if (!legal_transition(p.phase, r.phase))
      fail(i, std::string("illegal phase change ") + phase_name(p.phase) + " -> " + phase_name(r.phase));
    if (r.energy.legged < p.energy.legged || r.energy.aerial < p.energy.aerial) fail(i, "energy meter decreased");
  }
  return v;
}

// Legged-to-aerial and aerial-to-legged changes recorded in a log.
inline int count_mode_transitions(const MissionLog& log) {
  int n = 0;
  for (std::size_t i = 1; i < log.rows.size(); ++i) {
    const auto a = log.rows[i - 1].phase, b = log.rows[i].phase;
    if ((a == MissionPhase::PrepareTakeoff && b == MissionPhase::Ascend) ||
        (a == MissionPhase::TouchdownDetect && b == MissionPhase::Stand))
      ++n;
  }
  return n;
}

struct LimitCycle {
  std::vector<double> d;  // d[k-1] = |x_{k+1} - x_k|
  bool converged = false;
  int K = -1;  // first cycle from which every d_k < 0.05 d_1
  double final_ratio = std::numeric_limits<double>::quiet_NaN();
};

/// Samples (position, attitude, velocity, body rate) at gait phase 0 of every
/// cycle and returns the weighted distances between consecutive samples.
inline LimitCycle limit_cycle_metric(const MissionLog& log, const GaitSchedule& sched,
                                     const std::array<double, 4>& weights = {1, 1, 1, 1}) {
  if (!(sched.freq > 0)) throw Error("limit_cycle_metric: gait frequency must be positive");
  std::vector<Eigen::Matrix<double, 12, 1>> samples;
  long last = -1;
  for (const auto& r : log.rows) {
    if (r.gait_clock < 0) continue;
    const auto c = static_cast<long>(std::floor(r.gait_clock * sched.freq + 1e-9));
    if (c == last) continue;
    last = c;
    Eigen::Matrix<double, 12, 1> x;
    x << weights[0] * r.body.r, weights[1] * rpy(r.body.q), weights[2] * r.body.v, weights[3] * r.body.w;
    samples.push_back(x);
  }
  if (samples.size() < 11) throw Error("limit_cycle_metric: log spans fewer than 10 gait cycles");

  LimitCycle lc;
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    Eigen::Matrix<double, 12, 1> diff = samples[k + 1] - samples[k];
    // yaw difference on the circle
    const double dyaw = diff(5) / (weights[1] != 0 ? weights[1] : 1.0);
    diff(5) = weights[1] * std::atan2(std::sin(dyaw), std::cos(dyaw));
    lc.d.push_back(diff.norm());
  }
  const double d1 = lc.d.front();
  lc.final_ratio = d1 > 0 ? lc.d.back() / d1 : 0.0;
  // smallest K such that every later distance is below the threshold
  int K = static_cast<int>(lc.d.size()) + 1;
  for (int k = static_cast<int>(lc.d.size()); k >= 1; --k) {
    const double dk = lc.d[static_cast<std::size_t>(k - 1)];
    if (d1 > 0 ? dk < 0.05 * d1 : dk == 0.0)
      K = k;
    else
      break;
  }
  if (K <= static_cast<int>(lc.d.size())) {
    lc.converged = true;
    lc.K = K;
  }
  return lc;
}

// Support-polygon margin of the scheduled stance feet; NaN with no stance foot.
inline double row_margin(const BodyState& body, const LegSet& legs, const std::array<bool, kNumLegs>& stance,
                         const RobotParams& p) {
  std::vector<Vec2> feet;
  for (int i = 0; i < kNumLegs; ++i)
    if (stance[static_cast<std::size_t>(i)]) {
      const Vec3 f = foot_position_unchecked(body, legs[static_cast<std::size_t>(i)], i, p);
      feet.emplace_back(f.x(), f.y());
    }
  if (feet.empty()) return std::numeric_limits<double>::quiet_NaN();
  return stability_margin(body.r.head<2>(), support_polygon(feet));
}

// Minimum margin over gait cycles [from, to) of a gait run.
inline double min_margin_over_cycles(const MissionLog& log, const GaitSchedule& sched, int from, int to) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : log.rows) {
    if (r.gait_clock < 0 || std::isnan(r.margin)) continue;
    const double c = r.gait_clock * sched.freq;
    if (c >= from && c < to) m = std::min(m, r.margin);
  }
  if (!std::isfinite(m)) throw Error("min_margin_over_cycles: no samples in the requested cycles");
  return m;
}

inline double max_altitude(const MissionLog& log) {
  double z = -std::numeric_limits<double>::infinity();
  for (const auto& r : log.rows) z = std::max(z, r.body.r.z());
  return z;
}

inline double flight_time(const MissionLog& log, double dt) {
  double t = 0.0;
  for (const auto& r : log.rows)
    if (r.phase == MissionPhase::Ascend || r.phase == MissionPhase::Cruise || r.phase == MissionPhase::Descend ||
        r.phase == MissionPhase::TouchdownDetect)
      t += dt;
  return t;
}

// ---- simulation driver ----------------------------------------------------------------

namespace detail {

class MissionAbort : public Error {
 public:
  using Error::Error;
};

// Owns the simulation state, the legged controller and the energy meter, and
// appends one log row per step.
class Runner {
 public:
  Runner(const MissionConfig& cfg, const Environment& env, const SimState& init)
      : cfg_(cfg), env_(env), s_(init), ground_(cfg.robot, cfg.governor, env, cfg.mission.dt, cfg.locomotion),
        meter_(cfg.robot) {
    ground_.reset(s_);
  }

  const SimState& state() const { return s_; }
  GroundController& ground() { return ground_; }
  MissionLog& log() { return log_; }
  double dt() const { return cfg_.mission.dt; }

  MissionPhase phase = MissionPhase::Stand;
  int edge = -1;
  double edge_start = 0.0;

  void set_phase(MissionPhase p) {
    if (!legal_transition(phase, p))
      throw Error(std::string("illegal phase change ") + phase_name(phase) + " -> " + phase_name(p));
    phase = p;
  }

  void begin_edge(int e) {
    edge = e;
    edge_start = s_.t;
  }

  // Velocity impulse, e.g. to test recovery.
  void perturb(const Vec3& dv, const Vec3& dw) {
    s_.body.v += dv;
    s_.body.w += dw;
  }

  void check_timeout() const {
    if (edge >= 0 && s_.t - edge_start > cfg_.mission.edge_timeout)
      throw MissionAbort("waypoint of edge " + std::to_string(edge) + " not reached within the timeout");
  }

  // One legged control step toward `target`.
  void legged_step(const BodyTarget& target, const Thrusts& thrusts = {}) {
    const LocomotionOutput o = ground_.update(s_, target, thrusts);
    advance(o.command, thrusts, o.accepted_fraction, o.stance, ground_.gait_clock(s_.t));
  }

  // One flight control step with legs held at the crouch.
  Thrusts flight_step(const PositionRef& ref) {
    const FlightOutput o = flight_control(ref, s_.body, cfg_.flight, cfg_.robot);
    LegSet crouch;
    for (auto& l : crouch) l = LegConfig{0.0, 0.0, cfg_.robot.crouch_length};
    advance(crouch, o.thrusts, 1.0, {false, false, false, false}, -1.0);
    return o.thrusts;
  }

  void advance(const LegSet& legs, const Thrusts& thrusts, double governor, const std::array<bool, kNumLegs>& stance,
               double gait_clock) {
    const SimState prev = s_;
    s_ = step(s_, legs, thrusts, dt(), env_, cfg_.robot);
    meter_.add(prev, s_, thrusts, dt());
    LogRow r;
    r.t = s_.t;
    r.body = s_.body;
    r.legs = s_.legs;
    r.thrusts = thrusts;
    for (std::size_t k = 0; k < kNumLegs; ++k) {
      r.grf[k] = s_.contact[k].grf;
      r.contact[k] = s_.contact[k].in_contact;
    }
    r.stance = stance;
    r.phase = phase;
    r.edge = edge;
    r.governor = governor;
    r.energy = meter_.energy();
    r.gait_clock = gait_clock;
    r.margin = row_margin(s_.body, s_.legs, stance, cfg_.robot);
    log_.rows.push_back(r);
  }

 private:
  const MissionConfig& cfg_;
  const Environment& env_;
  SimState s_;
  GroundController ground_;
  PowerMeter meter_;
  MissionLog log_;
};

// Standing pose: body at `com`, legs straight down to the surface.
inline SimState standing_state(const Vec3& com, const Environment& env, const RobotParams& p) {
  SimState s;
  s.body.r = com;
  for (std::size_t k = 0; k < kNumLegs; ++k) {
    const Vec3 hip = com + p.hip_offsets[k];
    s.legs[k] = LegConfig{0.0, 0.0, std::clamp(hip.z() - env.surface_height(hip.x(), hip.y()), p.limits.l_min,
                                               p.limits.l_max)};
  }
  return s;
}

// Straight-line reference moving at constant speed from a to b.
struct Ramp {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double speed = 1.0;
  double t0 = 0.0;

  double length() const { return (b - a).norm(); }
  double progress(double t) const { return std::min(speed * std::max(0.0, t - t0), length()); }
  bool done(double t) const { return progress(t) >= length(); }
  Vec3 pos(double t) const {
    const double L = length();
    if (L > 0) return a + (progress(t) / L) * (b - a);
    return b;
  }
  Vec3 vel(double t) const {
    const double L = length();
    if (L > 0 && !done(t)) return (speed / L) * (b - a);
    return Vec3::Zero();
  }
};

}  // namespace detail

/// Execute a plan in the simulator, starting from a standing pose at the
/// first waypoint. Aborts (partial log, `aborted` set) on a waypoint timeout
/// or a non-finite state.
inline MissionLog follow_plan(const Plan& plan, const MissionConfig& cfg, const Environment& env) {
  if (plan.nodes.empty()) throw Error("follow_plan: empty plan");
  if (plan.modes.front() != Mode::Legged) throw Error("follow_plan: plan must start on the ground");
  const auto& m = cfg.mission;
  const RobotParams& p = cfg.robot;

  detail::Runner run(cfg, env, detail::standing_state(plan.positions.front(), env, p));
  const auto steps = [&](double seconds) { return static_cast<long>(std::llround(seconds / m.dt)); };
  auto surface = [&](const Vec3& x) { return env.surface_height(x.x(), x.y()); };
  auto hold = [&](const Vec3& pos) {
    BodyTarget t;
    t.pos = pos;
    return t;
  };

  try {
    for (long i = 0; i < steps(m.settle_time); ++i) run.legged_step(hold(plan.positions.front()));
    run.set_phase(MissionPhase::Walk);

    std::size_t e = 0;
    Thrusts last_thrust{};
    while (e < plan.edge_count()) {
      const Vec3 a = plan.positions[e], b = plan.positions[e + 1];
      const Mode em = plan.edge_modes[e];
      run.begin_edge(static_cast<int>(e));

      if (em == Mode::Legged) {
        if (run.phase != MissionPhase::Walk) throw Error("follow_plan: legged edge outside Walk");
        if (!run.ground().gait_running()) run.ground().start_gait(cfg.gait, run.state().t);
        detail::Ramp ramp{a, b, m.walk_speed, run.state().t};
        for (;;) {
          const double t = run.state().t;
          BodyTarget tgt;
          tgt.pos = ramp.pos(t);
          tgt.vel = ramp.vel(t);
          run.legged_step(tgt);
          const double err = (run.state().body.r.head<2>() - b.head<2>()).norm();
          if (ramp.done(run.state().t) && err < m.legged_tol) break;
          run.check_timeout();
        }
        ++e;
        continue;
      }

      if (em == Mode::Transition && plan.modes[e] == Mode::Legged) {
        // stop walking with all feet down, crouch, then climb to the aerial node
        run.ground().request_stop();
        while (run.ground().gait_running()) {
          run.legged_step(hold(a));
          run.check_timeout();
        }
        run.set_phase(MissionPhase::PrepareTakeoff);
        const Vec3 crouch(a.x(), a.y(), surface(a) + p.crouch_length);
        detail::Ramp down{Vec3(a.x(), a.y(), run.state().body.r.z()), crouch, m.posture_rate, run.state().t};
        for (;;) {
          BodyTarget tgt;
          tgt.pos = down.pos(run.state().t);
          tgt.vel = down.vel(run.state().t);
          run.legged_step(tgt);
          const auto& b0 = run.state().body;
          if (down.done(run.state().t) && std::abs(b0.r.z() - crouch.z()) < 0.01 && b0.v.norm() < 0.05) break;
          run.check_timeout();
        }
        run.set_phase(MissionPhase::Ascend);
        detail::Ramp up{run.state().body.r, b, m.air_speed, run.state().t};
        for (;;) {
          last_thrust = run.flight_step({up.pos(run.state().t), up.vel(run.state().t), 0.0});
          if (up.done(run.state().t) && (run.state().body.r - b).norm() < m.aerial_tol) break;
          run.check_timeout();
        }
        run.set_phase(MissionPhase::Cruise);
        ++e;
        continue;
      }

      if (em == Mode::Aerial) {
        if (run.phase != MissionPhase::Cruise) throw Error("follow_plan: aerial edge outside Cruise");
        detail::Ramp ramp{a, b, m.air_speed, run.state().t};
        for (;;) {
          last_thrust = run.flight_step({ramp.pos(run.state().t), ramp.vel(run.state().t), 0.0});
          if (ramp.done(run.state().t) && (run.state().body.r - b).norm() < m.aerial_tol) break;
          run.check_timeout();
        }
        ++e;
        continue;
      }

      // aerial -> legged: descend over the landing node, sink until touchdown
      if (run.phase != MissionPhase::Cruise) throw Error("follow_plan: landing outside Cruise");
      run.set_phase(MissionPhase::Descend);
      const Vec3 probe(b.x(), b.y(), surface(b) + p.crouch_length + m.probe_clearance);
      detail::Ramp down{run.state().body.r, probe, m.air_speed, run.state().t};
      for (;;) {
        last_thrust = run.flight_step({down.pos(run.state().t), down.vel(run.state().t), 0.0});
        const auto& b0 = run.state().body;
        if (down.done(run.state().t) && (b0.r - probe).norm() < 0.03 && b0.v.norm() < 0.1) break;
        run.check_timeout();
      }
      run.set_phase(MissionPhase::TouchdownDetect);
      const double t_probe = run.state().t;
      double dwell = 0.0;
      for (;;) {
        const double sink = m.touchdown_speed * (run.state().t - t_probe);
        last_thrust = run.flight_step({probe - Vec3(0, 0, sink), Vec3(0, 0, -m.touchdown_speed), 0.0});
        const auto& s = run.state();
        const bool all_down = std::all_of(s.contact.begin(), s.contact.end(), [](const auto& c) { return c.in_contact; });
        dwell = (all_down && s.body.v.norm() < m.touchdown_vmax) ? dwell + m.dt : 0.0;
        if (dwell >= m.touchdown_dwell - 1e-12) break;
        run.check_timeout();
      }
      // unload the rotors while standing up on the legs
      run.set_phase(MissionPhase::Stand);
      run.ground().reset(run.state());
      const Vec3 here = run.state().body.r;
      const Vec3 standing(here.x(), here.y(), surface(here) + p.stand_height);
      detail::Ramp rise{here, standing, m.posture_rate, run.state().t};
      const double t_land = run.state().t;
      for (;;) {
        const double t = run.state().t;
        const double scale = std::max(0.0, 1.0 - (t - t_land) / m.thrust_ramp);
        Thrusts th;
        for (std::size_t j = 0; j < kNumThrusters; ++j) th[j] = scale * last_thrust[j];
        BodyTarget tgt;
        tgt.pos = rise.pos(t);
        tgt.vel = rise.vel(t);
        run.legged_step(tgt, th);
        const auto& b0 = run.state().body;
        if (scale == 0.0 && rise.done(run.state().t) && std::abs(b0.r.z() - standing.z()) < 0.01 &&
            b0.v.norm() < 0.05)
          break;
        run.check_timeout();
      }
      run.set_phase(MissionPhase::Walk);
      // the next legged edge starts from here rather than from the node
      ++e;
      if (e < plan.edge_count() && plan.edge_modes[e] == Mode::Legged) {
        const Vec3 next = plan.positions[e + 1];
        run.begin_edge(static_cast<int>(e));
        run.ground().start_gait(cfg.gait, run.state().t);
        detail::Ramp ramp{standing, next, m.walk_speed, run.state().t};
        for (;;) {
          BodyTarget tgt;
          tgt.pos = ramp.pos(run.state().t);
          tgt.vel = ramp.vel(run.state().t);
          run.legged_step(tgt);
          if (ramp.done(run.state().t) && (run.state().body.r.head<2>() - next.head<2>()).norm() < m.legged_tol)
            break;
          run.check_timeout();
        }
        ++e;
      }
    }

    // come to rest at the goal
    const Vec3 goal = plan.positions.back();
    run.begin_edge(-1);
    if (run.phase == MissionPhase::Walk) {
      run.ground().request_stop();
      for (long guard = 0; run.ground().gait_running(); ++guard) {
        if (guard > steps(m.edge_timeout)) throw detail::MissionAbort("gait did not stop");
        run.legged_step(hold(goal));
      }
      run.set_phase(MissionPhase::Stand);
      for (long i = 0; i < steps(m.settle_time); ++i) run.legged_step(hold(goal));
    } else {
      for (long i = 0; i < steps(m.settle_time); ++i) run.flight_step({goal, Vec3::Zero(), 0.0});
    }
  } catch (const detail::MissionAbort& ex) {
    run.log().aborted = true;
    run.log().reason = ex.what();
  } catch (const NonFiniteState& ex) {
    run.log().aborted = true;
    run.log().reason = ex.what();
  }
  return std::move(run.log());
}

// ---- gait runs ---------------------------------------------------------------------------

struct GaitRun {
  double duration = 10.0;  // s of gait after the initial settle
  GaitSchedule sched = GaitSchedule::trot(2.0);
  Vec3 velocity = Vec3::Zero();  // body target velocity, world
  bool kick = true;              // apply the configured impulse at gait start
};

inline bool fallen(const BodyState& b, const RobotParams& p) {
  const Vec3 e = rpy(b.q);
  return b.r.z() < 0.5 * p.stand_height || std::abs(e.x()) > 0.6 || std::abs(e.y()) > 0.6;
}

/// Stand for the settle time, then run the gait on flat ground. A fall
/// truncates the log and sets `fell`. A zero frequency only stands.
inline MissionLog run_gait(const GaitRun& g, const MissionConfig& cfg) {
  if (!(g.duration > 0)) throw Error("gait run: duration must be positive");
  const RobotParams& p = cfg.robot;
  const auto& m = cfg.mission;
  const Environment env(0.0, Box{Vec3(-50, -50, 0), Vec3(50, 50, 5)}, {});
  const Vec3 start(0, 0, p.stand_height);
  detail::Runner run(cfg, env, detail::standing_state(start, env, p));
  const bool walking = g.sched.freq > 0;
  if (walking) g.sched.validate();

  BodyTarget tgt;
  tgt.pos = start;
  const long settle = std::llround(m.gait_settle / m.dt), total = settle + std::llround(g.duration / m.dt);
  try {
    for (long k = 0; k < total; ++k) {
      if (k == settle && walking) {
        run.set_phase(MissionPhase::Walk);
        run.ground().start_gait(g.sched, run.state().t);
        tgt.vel = g.velocity;
        if (g.kick) run.perturb(m.kick_v, m.kick_w);
      }
      if (k >= settle) tgt.pos += m.dt * g.velocity;
      run.legged_step(tgt);
      if (fallen(run.state().body, p)) {
        run.log().fell = true;
        break;
      }
    }
  } catch (const NonFiniteState& ex) {
    run.log().fell = true;
    run.log().reason = ex.what();
  }
  return std::move(run.log());
}

inline MissionLog trot_in_place(double duration, const GaitSchedule& sched, const MissionConfig& cfg) {
  return run_gait(GaitRun{duration, sched, Vec3::Zero(), true}, cfg);
}

/// Minimum support margin at duty 0.75 (one leg in swing at a time) while
/// walking straight at `speed`, over cycles [skip, skip + cycles).
inline double crawl_min_margin(double cycle_time, double speed, const MissionConfig& cfg, int skip = 2,
                               int cycles = 4) {
  GaitRun g;
  g.sched = GaitSchedule::three_contact(1.0 / cycle_time);
  g.duration = (skip + cycles) * cycle_time + 0.01;
  g.velocity = Vec3(speed, 0, 0);
  g.kick = false;
  const MissionLog log = run_gait(g, cfg);
  if (log.fell) return -std::numeric_limits<double>::infinity();
  return min_margin_over_cycles(log, g.sched, skip, skip + cycles);
}

/// Four-foot stand that shifts the body sideways and down at `t_shift`, then
/// returns at `t_back`. Loads the feet unevenly with sizeable lateral forces.
struct LeanManeuver {
  Vec3 offset{0.0, 0.05, -0.05};
  double t_shift = 1.0;
  double t_back = 2.0;
  double duration = 3.0;
};

inline MissionLog run_lean(const LeanManeuver& lm, const MissionConfig& cfg) {
  const RobotParams& p = cfg.robot;
  const Environment env(0.0, Box{Vec3(-50, -50, 0), Vec3(50, 50, 5)}, {});
  const Vec3 start(0, 0, p.stand_height);
  detail::Runner run(cfg, env, detail::standing_state(start, env, p));
  BodyTarget tgt;
  const long n = std::llround(lm.duration / cfg.mission.dt);
  try {
    for (long k = 0; k < n; ++k) {
      const double t = run.state().t;
      tgt.pos = (t >= lm.t_shift && t < lm.t_back) ? Vec3(start + lm.offset) : start;
      run.legged_step(tgt);
      if (fallen(run.state().body, p)) {
        run.log().fell = true;
        break;
      }
    }
  } catch (const NonFiniteState& ex) {
    run.log().fell = true;
    run.log().reason = ex.what();
  }
  return std::move(run.log());
}

// Logged stance-foot contact forces outside the friction pyramid.
inline std::size_t pyramid_violations(const MissionLog& log, double mu) {
  std::size_t n = 0;
  for (const auto& r : log.rows)
    for (std::size_t k = 0; k < kNumLegs; ++k)
      if (r.stance[k] && r.contact[k] && !friction_pyramid_ok(r.grf[k], mu)) ++n;
  return n;
}

// Largest tangential-to-normal ratio over logged stance-foot forces.
inline double max_friction_ratio(const MissionLog& log) {
  double m = 0.0;
  for (const auto& r : log.rows)
    for (std::size_t k = 0; k < kNumLegs; ++k)
      if (r.stance[k] && r.contact[k] && r.grf[k].z() > 0)
        m = std::max(m, std::max(std::abs(r.grf[k].x()), std::abs(r.grf[k].y())) / r.grf[k].z());
  return m;
}

struct HoverResult {
  MissionLog log;
  double settle_time = std::numeric_limits<double>::infinity();  // first time the error stays below tol
  double final_error = 0.0;
  double thrust_min = std::numeric_limits<double>::infinity();
  double thrust_max = 0.0;
};

/// Hover at `hold` starting displaced by `offset` at rest, legs at the crouch.
inline HoverResult hover_recovery(const Vec3& hold, const Vec3& offset, double duration, double tol,
                                  const MissionConfig& cfg) {
  const Environment env(0.0, Box{Vec3(-50, -50, 0), Vec3(50, 50, 50)}, {});
  SimState s;
  s.body.r = hold + offset;
  for (auto& l : s.legs) l = LegConfig{0.0, 0.0, cfg.robot.crouch_length};
  detail::Runner run(cfg, env, s);
  run.phase = MissionPhase::Cruise;
  HoverResult out;
  const long n = std::llround(duration / cfg.mission.dt);
  double inside_since = std::numeric_limits<double>::quiet_NaN();
  for (long k = 0; k < n; ++k) {
    const Thrusts th = run.flight_step({hold, Vec3::Zero(), 0.0});
    for (double T : th) {
      out.thrust_min = std::min(out.thrust_min, T);
      out.thrust_max = std::max(out.thrust_max, T);
    }
    const double err = (run.state().body.r - hold).norm();
    if (err < tol) {
      if (std::isnan(inside_since)) inside_since = run.state().t;
    } else {
      inside_since = std::numeric_limits<double>::quiet_NaN();
    }
  }
  out.final_error = (run.state().body.r - hold).norm();
  if (!std::isnan(inside_since)) out.settle_time = inside_since;
  out.log = std::move(run.log());
  return out;
}

// ---- discretization comparison ------------------------------------------------------------

struct CompareOptions {
  std::vector<double> spacings{1.0, 0.5};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int samples = 600;
  double radius = 1.5;
  std::string search = "astar";
  bool legged_only = false;
};

struct CompareEntry {
  std::string method;      // "uniform" | "mmprm"
  double parameter = 0.0;  // spacing or seed
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double build_ms = 0.0;
  bool found = false;
  double cost = std::numeric_limits<double>::quiet_NaN();
  std::size_t expansions = 0;
};

struct CompareSummary {
  std::string method;
  std::size_t runs = 0;
  std::size_t found = 0;
  double cost_mean = std::numeric_limits<double>::quiet_NaN();
  double cost_min = std::numeric_limits<double>::quiet_NaN();
  double expansions_mean = 0.0;
};

struct CompareReport {
  Vec3 start = Vec3::Zero();
  Vec3 goal = Vec3::Zero();
  double lower_bound = 0.0;  // cheapest rate times straight-line distance
  std::vector<CompareEntry> entries;

  std::vector<CompareSummary> summary() const {
    std::vector<CompareSummary> out;
    for (const char* method : {"uniform", "mmprm"}) {
      CompareSummary s;
      s.method = method;
      double sum = 0.0, exp = 0.0;
      for (const auto& e : entries) {
        if (e.method != method) continue;
        ++s.runs;
        exp += static_cast<double>(e.expansions);
        if (!e.found) continue;
        ++s.found;
        sum += e.cost;
        s.cost_min = std::isnan(s.cost_min) ? e.cost : std::min(s.cost_min, e.cost);
      }
      if (s.found) s.cost_mean = sum / static_cast<double>(s.found);
      if (s.runs) s.expansions_mean = exp / static_cast<double>(s.runs);
      out.push_back(s);
    }
    return out;
  }
};

/// Uniform grids at each spacing and MM-PRM at each seed on the same start and
/// goal. Missing paths are reported, not raised.
inline CompareReport compare_discretizations(const Environment& env, const Vec3& start, const Vec3& goal,
                                             const CostModel& cost, const PlannerOptions& opt,
                                             const CompareOptions& co) {
  CompareReport rep;
  rep.start = start;
  rep.goal = goal;
  const double rate = co.legged_only ? cost.legged_rate() : std::min(cost.legged_rate(), cost.aerial_rate());
  rep.lower_bound = rate * (goal - start).norm();

  auto run = [&](const RouteOptions& ro, double parameter) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    const Route r = plan_route(env, start, goal, cost, opt, ro);
    const auto t1 = clock::now();
    CompareEntry e;
    e.method = ro.method;
    e.parameter = parameter;
    e.nodes = r.graph.size();
    e.edges = r.graph.edges.size();
    e.build_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    e.found = r.result.found();
    if (e.found) e.cost = r.result.plan->total_cost;
    e.expansions = r.result.expansions;
    rep.entries.push_back(e);
  };
  for (double sp : co.spacings) {
    RouteOptions ro;
    ro.method = "uniform";
    ro.search = co.search;
    ro.spacing = sp;
    ro.legged_only = co.legged_only;
    run(ro, sp);
  }
  for (std::uint64_t seed : co.seeds) {
    RouteOptions ro;
    ro.method = "mmprm";
    ro.search = co.search;
    ro.samples = co.samples;
    ro.radius = co.radius;
    ro.seed = seed;
    ro.legged_only = co.legged_only;
    run(ro, static_cast<double>(seed));
  }
  return rep;
}

namespace detail {
inline nlohmann::json number_or_null(double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); }
inline double number_from(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}
}  // namespace detail

inline nlohmann::json to_json(const CompareReport& r) {
  nlohmann::json entries = nlohmann::json::array(), summary = nlohmann::json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"method", e.method},
                       {"parameter", e.parameter},
                       {"nodes", e.nodes},
                       {"edges", e.edges},
                       {"build_ms", e.build_ms},
                       {"status", e.found ? "ok" : "no_path"},
                       {"cost", detail::number_or_null(e.cost)},
                       {"expansions", e.expansions}});
  for (const auto& s : r.summary())
    summary.push_back({{"method", s.method},
                       {"runs", s.runs},
                       {"found", s.found},
                       {"cost_mean", detail::number_or_null(s.cost_mean)},
                       {"cost_min", detail::number_or_null(s.cost_min)},
                       {"expansions_mean", s.expansions_mean}});
  return {{"start", vec_to_json(r.start)},
          {"goal", vec_to_json(r.goal)},
          {"lower_bound", r.lower_bound},
          {"entries", entries},
          {"summary", summary}};
}

inline CompareReport compare_report_from_json(const nlohmann::json& j) {
  try {
    CompareReport r;
    r.start = vec_from_json(j.at("start"));
    r.goal = vec_from_json(j.at("goal"));
    r.lower_bound = j.at("lower_bound");
    for (const auto& e : j.at("entries")) {
      CompareEntry c;
      c.method = e.at("method");
      c.parameter = e.at("parameter");
      c.nodes = e.at("nodes");
      c.edges = e.at("edges");
      c.build_ms = e.at("build_ms");
      c.found = e.at("status") == "ok";
      c.cost = detail::number_from(e.at("cost"));
      c.expansions = e.at("expansions");
      r.entries.push_back(c);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("compare report: ") + e.what());
  }
}

inline std::string compare_csv_header() { return "method,parameter,nodes,edges,build_ms,status,cost,expansions"; }

inline void write_compare_csv(std::ostream& out, const CompareReport& r) {
  out << compare_csv_header() << '\n';
  for (const auto& e : r.entries) {
    std::string line = e.method + ",";
    detail::put_number(line, e.parameter);
    line += "," + std::to_string(e.nodes) + "," + std::to_string(e.edges) + ",";
    detail::put_number(line, e.build_ms);
    line += e.found ? ",ok," : ",no_path,";
    detail::put_number(line, e.cost);
    line += "," + std::to_string(e.expansions);
    out << line << '\n';
  }
}

// Entries only; start, goal and bound live in the JSON report.
inline std::vector<CompareEntry> read_compare_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != compare_csv_header()) throw ConfigError("compare csv: unexpected header");
  std::vector<CompareEntry> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 8) throw ConfigError("compare csv: wrong field count");
    CompareEntry e;
    e.method = std::string(f[0]);
    e.parameter = detail::get_number(f[1]);
    e.nodes = static_cast<std::size_t>(detail::get_number(f[2]));
    e.edges = static_cast<std::size_t>(detail::get_number(f[3]));
    e.build_ms = detail::get_number(f[4]);
    if (f[5] != "ok" && f[5] != "no_path") throw ConfigError("compare csv: bad status");
    e.found = f[5] == "ok";
    e.cost = detail::get_number(f[6]);
    e.expansions = static_cast<std::size_t>(detail::get_number(f[7]));
    out.push_back(e);
  }
  return out;
}

// ---- cost calibration -----------------------------------------------------------------------

struct Calibration {
  double legged_power = 0.0;  // W, trot in place
  double aerial_power = 0.0;  // W, hover
  CostModel cost{};
};

/// Metered power of `seconds` of trotting in place and of hovering, turned
/// into per-metre costs at the nominal speeds; a transition is priced as
/// `transition_hover` seconds of hover.
inline Calibration calibrate_costs(const MissionConfig& cfg, double seconds = 5.0, double transition_hover = 2.0) {
  Calibration c;
  const auto& m = cfg.mission;

  GaitRun g;
  g.duration = seconds;
  g.sched = cfg.gait;
  g.kick = false;
  const MissionLog trot = run_gait(g, cfg);
  if (trot.fell) throw Error("calibrate_costs: trot fell");
  std::size_t first = 0;
  while (first < trot.rows.size() && trot.rows[first].gait_clock < 0) ++first;
  if (first == 0 || first >= trot.rows.size()) throw Error("calibrate_costs: no gait samples");
  const Energy e0 = trot.rows[first - 1].energy, e1 = trot.rows.back().energy;
  c.legged_power = (e1.legged - e0.legged) / (trot.rows.back().t - trot.rows[first - 1].t);

  const Environment env(0.0, Box{Vec3(-10, -10, 0), Vec3(10, 10, 10)}, {});
  SimState s;
  s.body.r = Vec3(0, 0, 2.0);
  for (auto& l : s.legs) l = LegConfig{0, 0, cfg.robot.crouch_length};
  PowerMeter meter(cfg.robot);
  const long n = std::llround(seconds / m.dt);
  for (long k = 0; k < n; ++k) {
    const FlightOutput o = flight_control({Vec3(0, 0, 2.0), Vec3::Zero(), 0.0}, s.body, cfg.flight, cfg.robot);
    const SimState prev = s;
    s = step(s, s.legs, o.thrusts, m.dt, env, cfg.robot);
    meter.add(prev, s, o.thrusts, m.dt);
  }
  c.aerial_power = meter.energy().aerial / (static_cast<double>(n) * m.dt);

  c.cost = cfg.cost;
  c.cost.c_leg = c.legged_power / cfg.cost.v_leg;
  c.cost.c_air = c.aerial_power / cfg.cost.v_air;
  c.cost.p_leg = 0.0;
  c.cost.p_air = 0.0;
  c.cost.E_trans = transition_hover * c.aerial_power;
  return c;
}

// ---- summaries ---------------------------------------------------------------------------------

inline nlohmann::json mission_summary(const MissionLog& log, const Plan& plan, const MissionConfig& cfg) {
  nlohmann::json j;
  j["rows"] = log.rows.size();
  j["aborted"] = log.aborted;
  j["reason"] = log.reason;
  j["transitions"] = count_mode_transitions(log);
  j["plan_transitions"] = plan.transitions.size();
  if (!log.rows.empty()) {
    const auto& last = log.rows.back();
    j["duration"] = last.t;
    j["final_position"] = vec_to_json(last.body.r);
    j["final_error"] = (last.body.r - plan.positions.back()).norm();
    j["max_altitude"] = max_altitude(log);
    j["flight_time"] = flight_time(log, cfg.mission.dt);
    j["energy"] = {{"legged", last.energy.legged}, {"aerial", last.energy.aerial}};
  }
  nlohmann::json phases = nlohmann::json::array();
  for (std::size_t i = 0; i < log.rows.size(); ++i)
    if (i == 0 || log.rows[i].phase != log.rows[i - 1].phase) phases.push_back(phase_name(log.rows[i].phase));
  j["phases"] = phases;
  return j;
}

}  // namespace mmloco
