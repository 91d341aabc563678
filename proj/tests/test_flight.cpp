#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mmloco/flight.hpp"

using namespace mmloco;

namespace {

double tilt_of(const Quat& q) { return std::acos(std::clamp((q * Vec3::UnitZ()).z(), -1.0, 1.0)); }

}  // namespace

TEST(PositionLoop, EquilibriumNeedsWeightOnly) {
  const RobotParams p;
  BodyState b;
  b.r = Vec3(1, 2, 3);
  const auto cmd = position_loop({b.r, Vec3::Zero(), 0.0}, b, FlightGains{}, p);
  EXPECT_NEAR(cmd.thrust_total, 42.183, 1e-12);
  EXPECT_NEAR(cmd.q_des.angularDistance(Quat::Identity()), 0.0, 1e-12);
}

TEST(PositionLoop, PureHeightError) {
  const RobotParams p;
  BodyState b;
  const auto cmd = position_loop({Vec3(0, 0, 0.2), Vec3::Zero(), 0.0}, b, FlightGains{}, p);
  EXPECT_NEAR(cmd.thrust_total, 45.623000000000005, 1e-12);
}

TEST(PositionLoop, LateralOffsetTiltsTowardTheCommand) {
  const RobotParams p;
  BodyState b;
  const auto x = position_loop({Vec3(0.2, 0, 0), Vec3::Zero(), 0.0}, b, FlightGains{}, p);
  EXPECT_NEAR(tilt_of(x.q_des), 0.08136938089082027, 1e-12);
  EXPECT_GT((x.q_des * Vec3::UnitZ()).x(), 0.0);
  const auto xy = position_loop({Vec3(0.3, -0.2, 0), Vec3::Zero(), 0.0}, b, FlightGains{}, p);
  EXPECT_NEAR(tilt_of(xy.q_des), 0.14596969686973321, 1e-12);
}

TEST(PositionLoop, TiltIsClamped) {
  const RobotParams p;
  FlightGains g;
  g.a_max = 50.0;
  const auto cmd = position_loop({Vec3(10, 0, 0), Vec3::Zero(), 0.0}, BodyState{}, g, p);
  EXPECT_NEAR(tilt_of(cmd.q_des), g.tilt_max, 1e-12);
}

TEST(PositionLoop, YawFollowsTheReference) {
  const auto cmd = position_loop({Vec3::Zero(), Vec3::Zero(), 0.7}, BodyState{}, FlightGains{}, RobotParams{});
  EXPECT_NEAR(rpy(cmd.q_des).z(), 0.7, 1e-12);
}

TEST(AttitudeLoop, NoErrorNoTorque) {
  BodyState b;
  b.q = quat_from_rpy(0.2, 0.1, -0.5);
  EXPECT_EQ(attitude_loop(b.q, b, FlightGains{}, RobotParams{}).norm(), 0.0);
}

TEST(AttitudeLoop, AntipodalYawStaysBounded) {
  const RobotParams p;
  BodyState b;
  const Quat target(Eigen::AngleAxisd(std::numbers::pi, Vec3::UnitZ()));
  const Vec3 tau = attitude_loop(target, b, FlightGains{}, p);
  EXPECT_TRUE(tau.allFinite());
  EXPECT_LE(tau.norm(), p.inertia.norm() * FlightGains{}.kp_att + 1e-9);
  // the same physical target with the opposite quaternion sign
  Quat neg = target;
  neg.coeffs() = -neg.coeffs();
  EXPECT_LT((attitude_loop(neg, b, FlightGains{}, p) - tau).norm(), 1e-12);
}

TEST(AttitudeLoop, SmallRollUsesTheHalfAngle) {
  const RobotParams p;
  const FlightGains g;
  const Vec3 tau = attitude_loop(quat_from_rpy(0.1, 0, 0), BodyState{}, g, p);
  const double small_angle = p.inertia(0, 0) * g.kp_att * 0.05;
  EXPECT_NEAR(tau.x(), small_angle, 0.05 * small_angle);
  EXPECT_NEAR(tau.x(), 0.23990001249925597, 1e-12);
}

TEST(Mixer, WeightSplitsEvenly) {
  const auto m = mixer(42.183, Vec3::Zero(), RobotParams{});
  for (double T : m.thrusts) EXPECT_NEAR(T, 10.54575, 1e-12);
  EXPECT_FALSE(m.saturated);
}

TEST(Mixer, PureYawRaisesOneDiagonal) {
  const RobotParams p;
  const auto m = mixer(42.183, Vec3(0, 0, 0.05), p);
  EXPECT_GT(m.thrusts[0], 10.54575);
  EXPECT_GT(m.thrusts[2], 10.54575);
  EXPECT_LT(m.thrusts[1], 10.54575);
  EXPECT_LT(m.thrusts[3], 10.54575);
  EXPECT_NEAR(m.thrusts[0] + m.thrusts[1] + m.thrusts[2] + m.thrusts[3], 42.183, 1e-12);
}

TEST(Mixer, RoundTripOnFeasibleInputs) {
  const RobotParams p;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> thrust(20.0, 60.0), tau(-0.3, 0.3), yaw(-0.05, 0.05);
  int checked = 0;
  for (int n = 0; n < 2000; ++n) {
    const double total = thrust(rng);
    const Vec3 torque(tau(rng), tau(rng), yaw(rng));
    const auto m = mixer(total, torque, p);
    if (m.saturated) continue;
    const Eigen::Vector4d w = mixer_wrench(m.thrusts, p);
    EXPECT_NEAR(w(0), total, 1e-9);
    EXPECT_NEAR(w(1), torque.x(), 1e-9);
    EXPECT_NEAR(w(2), torque.y(), 1e-9);
    EXPECT_NEAR(w(3), torque.z(), 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 1000);
}

TEST(Mixer, SaturationKeepsTotalThrustFirst) {
  const RobotParams p;
  const auto m = mixer(60.0, Vec3(3.0, 0.0, 0.2), p);
  EXPECT_TRUE(m.saturated);
  double sum = 0;
  for (double T : m.thrusts) {
    EXPECT_GE(T, 0.0);
    EXPECT_LE(T, p.thrust_max);
    sum += T;
  }
  EXPECT_NEAR(sum, 60.0, 1e-9);
  const Eigen::Vector4d w = mixer_wrench(m.thrusts, p);
  EXPECT_GT(w(1), 0.0);
  EXPECT_NEAR(w(3), 0.0, 1e-9);
}

TEST(Mixer, ThrustsStayInRangeForAnyRequest) {
  const RobotParams p;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> thrust(-10.0, 120.0), tau(-20.0, 20.0);
  for (int n = 0; n < 2000; ++n) {
    const auto m = mixer(thrust(rng), Vec3(tau(rng), tau(rng), tau(rng)), p);
    for (double T : m.thrusts) {
      EXPECT_GE(T, 0.0);
      EXPECT_LE(T, p.thrust_max);
    }
  }
}

TEST(FlightControl, HoverRecoversFromOffset) {
  const RobotParams p;
  const Environment env(0.0, Box{Vec3(-10, -10, 0), Vec3(10, 10, 10)}, {});
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 6; ++trial) {
    const Vec3 dir = Vec3(n(rng), n(rng), n(rng)).normalized();
    SimState s;
    const Vec3 hold(0, 0, 3);
    s.body.r = hold + 0.2 * dir;
    for (auto& l : s.legs) l = LegConfig{0, 0, p.crouch_length};
    for (int k = 0; k < 5000; ++k) {
      const auto out = flight_control({hold, Vec3::Zero(), 0.0}, s.body, FlightGains{}, p);
      for (double T : out.thrusts) ASSERT_TRUE(T >= 0.0 && T <= p.thrust_max);
      s = step(s, s.legs, out.thrusts, 1e-3, env, p);
    }
    EXPECT_LT((s.body.r - hold).norm(), 0.05) << trial;
  }
}

TEST(FlightGainsJson, RoundTripAndValidation) {
  FlightGains g;
  g.kp_pos = 5.5;
  EXPECT_EQ(to_json(flight_gains_from_json(to_json(g))), to_json(g));
  EXPECT_THROW(flight_gains_from_json({{"tilt_max", 2.0}}), ConfigError);
  EXPECT_THROW(flight_gains_from_json({{"kd_att", 0.0}}), ConfigError);
}
