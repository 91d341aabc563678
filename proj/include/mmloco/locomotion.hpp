#pragma once

// Legged-mode control loop: gait schedule -> world foot targets -> leg IK ->
// reference governor.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mmloco/env.hpp"
#include "mmloco/error.hpp"
#include "mmloco/gait.hpp"
#include "mmloco/governor.hpp"
#include "mmloco/rom.hpp"

namespace mmloco {

struct BodyTarget {
  Vec3 pos = Vec3::Zero();  // COM, world; z is the commanded COM height
  Vec3 vel = Vec3::Zero();
  double yaw = 0.0;
};

struct LocomotionConfig {
  double raibert_gain = 0.05;  // s; foothold shift per unit velocity error
  double neutral_time_max = 0.125;  // s; cap on the half-stance velocity lead
  double kp_pos = 1000.0;      // N/m, body position
  double kd_pos = 130.0;       // N s/m
  double kp_att = 50.0;        // N m/rad
  double kd_att = 4.5;         // N m s/rad
  double force_reg = 1e-4;     // damping of the force distribution
  double tangential_weight = 20.0;  // cost of tangential vs normal force
  double force_tau = 0.02;     // s; low-pass on stance force targets, 0 = off
};

inline nlohmann::json to_json(const LocomotionConfig& c) {
  return {{"raibert_gain", c.raibert_gain}, {"neutral_time_max", c.neutral_time_max},
          {"kp_pos", c.kp_pos},             {"kd_pos", c.kd_pos},
          {"kp_att", c.kp_att},             {"kd_att", c.kd_att},
          {"force_reg", c.force_reg},       {"tangential_weight", c.tangential_weight},
          {"force_tau", c.force_tau}};
}

inline LocomotionConfig locomotion_from_json(const nlohmann::json& j, LocomotionConfig c = {}) {
  try {
    c.raibert_gain = j.value("raibert_gain", c.raibert_gain);
    c.neutral_time_max = j.value("neutral_time_max", c.neutral_time_max);
    c.kp_pos = j.value("kp_pos", c.kp_pos);
    c.kd_pos = j.value("kd_pos", c.kd_pos);
    c.kp_att = j.value("kp_att", c.kp_att);
    c.kd_att = j.value("kd_att", c.kd_att);
    c.force_reg = j.value("force_reg", c.force_reg);
    c.tangential_weight = j.value("tangential_weight", c.tangential_weight);
    c.force_tau = j.value("force_tau", c.force_tau);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("locomotion: ") + e.what());
  }
  if (!(c.kp_pos > 0 && c.kd_pos > 0 && c.kp_att > 0 && c.kd_att > 0 && c.tangential_weight > 0))
    throw ConfigError("locomotion gains must be positive");
  if (!(c.force_tau >= 0)) throw ConfigError("locomotion force_tau must be >= 0");
  return c;
}

struct LocomotionOutput {
  LegSet command{};
  LegSet raw{};
  double accepted_fraction = 1.0;
  std::array<bool, kNumLegs> stance{true, true, true, true};
};

/// Stateful legged controller. Stance legs are force controlled through the
/// contact model: a body PD wrench is split over the stance feet and each foot
/// is placed where the contact spring yields its share. Swing feet follow a
/// world-frame curve to a Raibert foothold. All foot targets are solved
/// against the measured body pose.
class GroundController {
 public:
  GroundController(const RobotParams& p, const GovernorConfig& gov, const Environment& env, double dt,
                   LocomotionConfig cfg = {})
      : p_(&p), env_(&env), dt_(dt), cfg_(cfg) {
    gov_.config = gov;
  }

  // Adopt the current feet as footholds and the current joints as applied reference.
  void reset(const SimState& s) {
    for (int i = 0; i < kNumLegs; ++i) {
      auto& L = legs_[static_cast<std::size_t>(i)];
      L.stance = true;
      L.locked = true;
      L.foothold = foot_position_unchecked(s.body, s.legs[static_cast<std::size_t>(i)], i, *p_);
      L.foothold.z() = env_->surface_height(L.foothold.x(), L.foothold.y());
    }
    gov_.applied = s.legs;
    store_applied_feet(s.body);
    for (std::size_t k = 0; k < kNumLegs; ++k) forces_[k] = s.contact[k].grf;
    running_ = false;
  }

  void start_gait(const GaitSchedule& sched, double t_now) {
    sched_ = sched;
    t0_ = t_now;
    running_ = true;
    for (auto& L : legs_) L.locked = false;
  }

  // Finish any swing in progress, then hold all four feet down.
  void request_stop() {
    for (auto& L : legs_)
      if (L.stance) L.locked = true;
  }

  bool gait_running() const { return running_; }
  bool all_stance() const {
    for (const auto& L : legs_)
      if (!L.stance) return false;
    return true;
  }
  double gait_clock(double t) const { return running_ ? t - t0_ : -1.0; }
  const GaitSchedule& schedule() const { return sched_; }
  const GovernorState& governor() const { return gov_; }
  void set_governor(const GovernorConfig& g) { gov_.config = g; }
  Vec3 foothold(int i) const { return legs_[static_cast<std::size_t>(i)].foothold; }

  LocomotionOutput update(const SimState& s, const BodyTarget& target, const Thrusts& thrusts = {}) {
    update_schedule(s);

    LocomotionOutput out;
    std::array<Vec3, kNumLegs> feet;
    for (int i = 0; i < kNumLegs; ++i) {
      const auto k = static_cast<std::size_t>(i);
      out.stance[k] = legs_[k].stance;
      feet[k] = foot_position_unchecked(s.body, s.legs[k], i, *p_);
    }

    const auto wanted = stance_forces(s, target, feet, out.stance, thrusts);
    const double a = dt_ / (cfg_.force_tau + dt_);
    for (std::size_t k = 0; k < kNumLegs; ++k) {
      if (!out.stance[k])
        forces_[k] = s.contact[k].grf;
      else
        forces_[k] += a * (wanted[k] - forces_[k]);
    }
    const auto& forces = forces_;
    for (int i = 0; i < kNumLegs; ++i) {
      const auto k = static_cast<std::size_t>(i);
      auto& L = legs_[k];
      Vec3 foot;
      if (L.stance) {
        // place the foot so the contact spring carries the wanted force
        const auto& fc = s.contact[k];
        const Vec2 anchor = fc.has_anchor ? fc.anchor : Vec2(feet[k].x(), feet[k].y());
        const Vec3& f = forces[k];
        foot.head<2>() = anchor - f.head<2>() / p_->k_t;
        foot.z() = env_->surface_height(anchor.x(), anchor.y()) - std::max(f.z(), 0.0) / p_->k_c;
      } else {
        const Vec3 td = touchdown_target(s, target, i);
        const SwingOffset off = swing_trajectory(L.progress, sched_);
        foot = L.liftoff + L.progress * (td - L.liftoff);
        foot.z() += off.dz;
      }
      const Vec3 d = s.body.q.conjugate() * (foot - s.body.r) - p_->hip_offsets[k];
      out.raw[k] = clamp_to_limits(leg_ik_local(d), p_->limits);
    }

    // carry the applied reference over to the current body pose: feet keep
    // their world xy and their height below the hip
    for (int i = 0; i < kNumLegs; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const Vec3 hip = s.body.r + s.body.q * p_->hip_offsets[k];
      const Vec3 foot(applied_feet_[k].x(), applied_feet_[k].y(), hip.z() + applied_feet_[k].z());
      const Vec3 d = s.body.q.conjugate() * (foot - s.body.r) - p_->hip_offsets[k];
      gov_.applied[k] = clamp_to_limits(leg_ik_local(d), p_->limits);
    }
    RomProbe probe{&s, thrusts, out.stance, env_, p_, dt_, gov_.config.horizon, gov_.config.mu};
    gov_ = governor_update(gov_, out.raw, probe);
    store_applied_feet(s.body);
    out.command = gov_.applied;
    out.accepted_fraction = gov_.accepted_fraction;
    return out;
  }

 private:
  struct LegState {
    bool stance = true;
    bool locked = true;  // held in stance, no new swing
    double progress = 0.0;
    Vec3 foothold = Vec3::Zero();
    Vec3 liftoff = Vec3::Zero();
  };

  // Body PD wrench with gravity compensation, split over the stance feet by
  // damped least squares.
  std::array<Vec3, kNumLegs> stance_forces(const SimState& s, const BodyTarget& target,
                                           const std::array<Vec3, kNumLegs>& feet,
                                           const std::array<bool, kNumLegs>& stance, const Thrusts& thrusts) const {
    std::array<Vec3, kNumLegs> out{};
    const BodyState& b = s.body;
    const Wrench th = thruster_wrench(b, thrusts, *p_);
    const Vec3 force = Vec3(0, 0, p_->weight()) + cfg_.kp_pos * (target.pos - b.r) +
                       cfg_.kd_pos * (target.vel - b.v) - th.force;
    const Quat q_des(Eigen::AngleAxisd(target.yaw, Vec3::UnitZ()));
    Quat e = q_des * b.q.conjugate();
    if (e.w() < 0) e.coeffs() = -e.coeffs();
    const Eigen::AngleAxisd aa(e);
    const Vec3 torque = cfg_.kp_att * aa.angle() * aa.axis() - cfg_.kd_att * (b.q * b.w) - b.q * th.torque;

    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < kNumLegs; ++k)
      if (stance[k]) idx.push_back(k);
    if (idx.empty()) return out;
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd A(6, 3 * n);
    for (Eigen::Index c = 0; c < n; ++c) {
      const Vec3 r = feet[idx[static_cast<std::size_t>(c)]] - b.r;
      Mat3 rx;
      rx << 0, -r.z(), r.y(), r.z(), 0, -r.x(), -r.y(), r.x(), 0;
      A.block<3, 3>(0, 3 * c) = Mat3::Identity();
      A.block<3, 3>(3, 3 * c) = rx;
    }
    Eigen::Matrix<double, 6, 1> w;
    w << force, torque;
    // weighted least norm, f = W^-1 A^T (A W^-1 A^T + reg)^-1 w; the second
    // pass makes tangential force expensive on lightly loaded feet
    const double share = p_->weight() / static_cast<double>(n);
    Eigen::VectorXd winv = Eigen::VectorXd::Ones(3 * n);
    for (Eigen::Index c = 0; c < n; ++c) winv.segment<2>(3 * c).setConstant(1.0 / cfg_.tangential_weight);
    Eigen::VectorXd f;
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::MatrixXd AW = A * winv.asDiagonal();
      const Eigen::Matrix<double, 6, 6> M =
          AW * A.transpose() + cfg_.force_reg * Eigen::Matrix<double, 6, 6>::Identity();
      f = AW.transpose() * M.ldlt().solve(w);
      for (Eigen::Index c = 0; c < n; ++c) {
        const double load = std::max(f(3 * c + 2), 0.1 * share) / share;
        winv.segment<2>(3 * c).setConstant(load * load / cfg_.tangential_weight);
      }
    }
    for (Eigen::Index c = 0; c < n; ++c) {
      Vec3 fi = f.segment<3>(3 * c);
      fi.z() = std::max(fi.z(), 0.0);
      out[idx[static_cast<std::size_t>(c)]] = fi;
    }
    return out;
  }

  // world xy of each applied foot, z relative to its hip
  void store_applied_feet(const BodyState& b) {
    for (int i = 0; i < kNumLegs; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const Vec3 foot = foot_position_unchecked(b, gov_.applied[k], i, *p_);
      const Vec3 hip = b.r + b.q * p_->hip_offsets[k];
      applied_feet_[k] = Vec3(foot.x(), foot.y(), foot.z() - hip.z());
    }
  }

  void update_schedule(const SimState& s) {
    if (!running_) return;
    const GaitPhase ph = gait_phase(std::max(0.0, s.t - t0_), sched_);
    bool all_locked = true;
    for (int i = 0; i < kNumLegs; ++i) {
      auto& L = legs_[static_cast<std::size_t>(i)];
      const LegPhase& lp = ph[static_cast<std::size_t>(i)];
      const bool want_stance = lp.stance || L.locked;
      if (L.stance && !want_stance) {
        L.liftoff = foot_position_unchecked(s.body, s.legs[static_cast<std::size_t>(i)], i, *p_);
        L.stance = false;
      } else if (!L.stance && (lp.stance || swing_progress(lp, sched_) >= 1.0)) {
        Vec3 f = foot_position_unchecked(s.body, s.legs[static_cast<std::size_t>(i)], i, *p_);
        f.z() = env_->surface_height(f.x(), f.y());
        L.foothold = f;
        L.stance = true;
      }
      if (!L.stance) L.progress = swing_progress(lp, sched_);
      // a stop request locks legs as they land
      if (L.stance && stop_pending()) L.locked = true;
      all_locked = all_locked && L.locked && L.stance;
    }
    if (all_locked) running_ = false;
  }

  bool stop_pending() const {
    for (const auto& L : legs_)
      if (L.locked) return true;
    return false;
  }

  Vec3 touchdown_target(const SimState& s, const BodyTarget& target, int i) const {
    const auto& L = legs_[static_cast<std::size_t>(i)];
    const double swing_left = (1.0 - L.progress) * (1.0 - sched_.duty) * sched_.period();
    const double stance_time = sched_.duty * sched_.period();
    const Vec3 body_td = target.pos + target.vel * swing_left;
    const Vec3 hip = Eigen::AngleAxisd(target.yaw, Vec3::UnitZ()) * p_->hip_offsets[static_cast<std::size_t>(i)];
    Vec3 td = body_td + hip + std::min(0.5 * stance_time, cfg_.neutral_time_max) * s.body.v + cfg_.raibert_gain * (s.body.v - target.vel);
    td.z() = env_->surface_height(td.x(), td.y());
    return td;
  }

  const RobotParams* p_;
  const Environment* env_;
  double dt_;
  LocomotionConfig cfg_;
  GovernorState gov_{};
  GaitSchedule sched_{};
  double t0_ = 0.0;
  bool running_ = false;
  std::array<LegState, kNumLegs> legs_{};
  std::array<Vec3, kNumLegs> applied_feet_{};  // see store_applied_feet
  std::array<Vec3, kNumLegs> forces_{};        // filtered stance force targets
};

}  // namespace mmloco
