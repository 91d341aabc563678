#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mmloco/rom.hpp"

using namespace mmloco;

namespace {

RobotParams hip_at(const Vec3& hip) {
  RobotParams p;
  p.hip_offsets[0] = hip;
  return p;
}

Environment flat() { return Environment(0.0, Box{Vec3(-10, -10, -1), Vec3(10, 10, 10)}, {}); }

LegSet straight(double l) {
  LegSet legs;
  for (auto& leg : legs) leg = LegConfig{0.0, 0.0, l};
  return legs;
}

double mechanical_energy(const BodyState& b, const RobotParams& p) {
  return 0.5 * p.mass * b.v.squaredNorm() + 0.5 * b.w.dot(p.inertia * b.w) + p.mass * p.gravity * b.r.z();
}

}  // namespace

// ---- kinematics ---------------------------------------------------------------

TEST(FootPosition, StraightDownLeg) {
  const auto p = hip_at(Vec3(0.1, 0.08, 0));
  const Vec3 f = foot_position(BodyState{}, LegConfig{0, 0, 0.3}, 0, p);
  EXPECT_NEAR((f - Vec3(0.1, 0.08, -0.3)).norm(), 0.0, 1e-15);
}

TEST(FootPosition, LegSwungFullyForward) {
  auto p = hip_at(Vec3(0.1, 0.08, 0));
  const Vec3 f = foot_position(BodyState{}, LegConfig{0, std::numbers::pi / 2, 0.3}, 0, p);
  EXPECT_NEAR((f - Vec3(0.4, 0.08, 0.0)).norm(), 0.0, 1e-15);
}

TEST(FootPosition, PitchThenRollChain) {
  // independent evaluation of Rx(phi) * Ry(-psi) * (0, 0, -l) + hip
  const auto p = hip_at(Vec3(0.1, 0.08, 0));
  const Vec3 f = foot_position(BodyState{}, LegConfig{0.1, 0.2, 0.25}, 0, p);
  EXPECT_NEAR(f.x(), 0.14966733269876531, 1e-15);
  EXPECT_NEAR(f.y(), 0.10446084875181393, 1e-15);
  EXPECT_NEAR(f.z(), -0.24379258180045399, 1e-15);
}

TEST(FootPosition, FollowsBodyPose) {
  const auto p = hip_at(Vec3(0.1, 0.08, 0));
  BodyState b;
  b.r = Vec3(1, 2, 3);
  b.q = Quat(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitZ()));
  const Vec3 f = foot_position(b, LegConfig{0, 0, 0.3}, 0, p);
  EXPECT_NEAR((f - Vec3(1 - 0.08, 2 + 0.1, 3 - 0.3)).norm(), 0.0, 1e-15);
}

TEST(FootPosition, LimitViolationNamesTheJoint) {
  const RobotParams p;
  try {
    foot_position(BodyState{}, LegConfig{0.0, 0.0, 0.5}, 0, p);
    FAIL() << "expected JointLimitError";
  } catch (const JointLimitError& e) {
    EXPECT_EQ(e.dof(), "l");
  }
  try {
    foot_position(BodyState{}, LegConfig{0.9, 0.0, 0.3}, 0, p);
    FAIL() << "expected JointLimitError";
  } catch (const JointLimitError& e) {
    EXPECT_EQ(e.dof(), "phi");
  }
  try {
    foot_position(BodyState{}, LegConfig{0.0, -1.8, 0.3}, 0, p);
    FAIL() << "expected JointLimitError";
  } catch (const JointLimitError& e) {
    EXPECT_EQ(e.dof(), "psi");
  }
}

TEST(LegIk, RecoversTheExampleConfigurations) {
  const auto p = hip_at(Vec3(0.1, 0.08, 0));
  for (const LegConfig c : {LegConfig{0, 0, 0.3}, LegConfig{0, std::numbers::pi / 2, 0.3}, LegConfig{0.1, 0.2, 0.25}}) {
    const LegConfig back = leg_ik(BodyState{}, foot_position(BodyState{}, c, 0, p), 0, p);
    EXPECT_NEAR(back.phi, c.phi, 1e-9);
    EXPECT_NEAR(back.psi, c.psi, 1e-9);
    EXPECT_NEAR(back.l, c.l, 1e-9);
  }
}

TEST(LegIk, TargetBeyondReachIsUnreachable) {
  const RobotParams p;
  const Vec3 hip = p.hip_offsets[1];
  const Vec3 target = hip + Vec3(0, 0, -(p.limits.l_max + 0.1));
  try {
    leg_ik(BodyState{}, target, 1, p);
    FAIL() << "expected UnreachableError";
  } catch (const UnreachableError& e) {
    EXPECT_EQ(e.leg(), 1);
    EXPECT_NEAR(e.distance(), 0.1, 1e-12);
  }
}

TEST(LegIk, RandomReachableTargetsRoundTrip) {
  const RobotParams p;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> phi(-p.limits.phi_max, p.limits.phi_max),
      psi(-1.2, 1.2), len(p.limits.l_min, p.limits.l_max), ang(-0.5, 0.5), pos(-2, 2);
  std::uniform_int_distribution<int> leg(0, kNumLegs - 1);
  for (int n = 0; n < 1000; ++n) {
    BodyState b;
    b.r = Vec3(pos(rng), pos(rng), pos(rng));
    b.q = quat_from_rpy(ang(rng), ang(rng), 3 * ang(rng));
    const int i = leg(rng);
    const Vec3 target = foot_position(b, LegConfig{phi(rng), psi(rng), len(rng)}, i, p);
    const LegConfig c = leg_ik(b, target, i, p);
    EXPECT_LT((foot_position(b, c, i, p) - target).norm(), 1e-9);
  }
}

TEST(LegJacobian, MatchesFiniteDifferences) {
  const LegConfig c{0.3, -0.4, 0.27};
  const Mat3 J = leg_jacobian(c);
  const double h = 1e-7;
  const Vec3 dphi = (leg_vector({c.phi + h, c.psi, c.l}) - leg_vector({c.phi - h, c.psi, c.l})) / (2 * h);
  const Vec3 dpsi = (leg_vector({c.phi, c.psi + h, c.l}) - leg_vector({c.phi, c.psi - h, c.l})) / (2 * h);
  const Vec3 dl = (leg_vector({c.phi, c.psi, c.l + h}) - leg_vector({c.phi, c.psi, c.l - h})) / (2 * h);
  EXPECT_LT((J.col(0) - dphi).norm(), 1e-7);
  EXPECT_LT((J.col(1) - dpsi).norm(), 1e-7);
  EXPECT_LT((J.col(2) - dl).norm(), 1e-7);
}

TEST(RateLimit, CapsEachJoint) {
  const LegLimits lim;
  const LegConfig out = rate_limit(LegConfig{0, 0, 0.3}, LegConfig{1, -1, 0.1}, lim, 1e-3);
  EXPECT_DOUBLE_EQ(out.phi, lim.phi_rate_max * 1e-3);
  EXPECT_DOUBLE_EQ(out.psi, -lim.psi_rate_max * 1e-3);
  EXPECT_DOUBLE_EQ(out.l, 0.3 - lim.l_rate_max * 1e-3);
}

// ---- contact -------------------------------------------------------------------

namespace {

// Body placed so foot 0 sits `depth` below the ground with a straight leg.
BodyState body_with_penetration(const RobotParams& p, double l, double depth) {
  BodyState b;
  b.r = Vec3(0, 0, l - depth) - Vec3(0, 0, p.hip_offsets[0].z());
  return b;
}

}  // namespace

TEST(ContactForces, HookeanNormalForce) {
  const RobotParams p;
  const auto legs = straight(0.3);
  const BodyState b = body_with_penetration(p, 0.3, 1e-3);
  const ContactState c = contact_forces(b, legs, LegSet{LegConfig{0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}},
                                        ContactState{}, flat(), p);
  for (const auto& fc : c) {
    EXPECT_TRUE(fc.in_contact);
    EXPECT_NEAR(fc.grf.z(), 20.0, 1e-9);
    EXPECT_EQ(fc.grf.x(), 0.0);
    EXPECT_EQ(fc.grf.y(), 0.0);
  }
}

TEST(ContactForces, FootAboveGroundCarriesNothing) {
  const RobotParams p;
  const LegSet zero{LegConfig{0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  ContactState prev;
  for (auto& fc : prev) {
    fc.in_contact = true;
    fc.has_anchor = true;
    fc.anchor = Vec2(0.3, 0.3);
  }
  const ContactState c = contact_forces(body_with_penetration(p, 0.3, -0.01), straight(0.3), zero, prev, flat(), p);
  for (const auto& fc : c) {
    EXPECT_FALSE(fc.in_contact);
    EXPECT_EQ(fc.grf, Vec3::Zero());
    EXPECT_FALSE(fc.has_anchor);
  }
}

TEST(ContactForces, TangentialDemandClampsToPyramidAndResetsAnchor) {
  const RobotParams p;
  const LegSet zero{LegConfig{0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  const BodyState b = body_with_penetration(p, 0.3, 1e-3);
  const Vec3 foot = foot_position(b, LegConfig{0, 0, 0.3}, 0, p);
  const double fz = p.k_c * 1e-3;
  // stick spring stretched so that it asks for twice the friction limit along x
  const double offset = 2 * p.mu * fz / p.k_t;
  ContactState prev;
  prev[0].has_anchor = true;
  prev[0].anchor = Vec2(foot.x() + offset, foot.y());
  const ContactState c = contact_forces(b, straight(0.3), zero, prev, flat(), p);
  EXPECT_NEAR(c[0].demand.x(), 2 * p.mu * fz, 1e-9);
  EXPECT_NEAR(c[0].grf.x(), p.mu * fz, 1e-12);
  EXPECT_TRUE(c[0].slip);
  EXPECT_NEAR((c[0].anchor - foot.head<2>()).norm(), 0.0, 1e-15);
}

// ---- integration -----------------------------------------------------------------

TEST(Step, EqualThrustHovers) {
  const RobotParams p;
  SimState s;
  s.body.r = Vec3(0, 0, 2);
  s.legs = straight(0.15);
  const double T = p.weight() / 4;
  const SimState n = step(s, s.legs, {T, T, T, T}, 1e-3, flat(), p);
  EXPECT_NEAR(n.body.v.norm(), 0.0, 1e-12);
  EXPECT_NEAR(n.body.w.norm(), 0.0, 1e-12);
}

TEST(Step, FreeFallVelocityIncrement) {
  const RobotParams p;
  SimState s;
  s.body.r = Vec3(0, 0, 2);
  s.legs = straight(0.15);
  const SimState n = step(s, s.legs, {}, 1e-3, flat(), p);
  EXPECT_NEAR(n.body.v.z(), -0.00981, 1e-15);
  EXPECT_NEAR(n.body.r.z(), 2.0 - 0.5 * 9.81 * 1e-6, 1e-15);
}

TEST(Step, QuaternionStaysNormalised) {
  const RobotParams p;
  SimState s;
  s.body.r = Vec3(0, 0, 5);
  s.body.w = Vec3(3.0, -2.0, 5.0);
  s.legs = straight(0.15);
  for (int k = 0; k < 2000; ++k) {
    s = step(s, s.legs, {1, 2, 3, 4}, 1e-3, flat(), p);
    ASSERT_NEAR(s.body.q.norm(), 1.0, 1e-9);
  }
}

TEST(Step, FreeFlightEnergyDrift) {
  const RobotParams p;
  SimState s;
  s.body.r = Vec3(0, 0, 8);
  s.body.v = Vec3(0.5, -0.3, 1.0);
  s.body.w = Vec3(0.4, -0.3, 0.6);
  s.legs = straight(0.15);
  const double e0 = mechanical_energy(s.body, p);
  for (int k = 0; k < 1000; ++k) s = step(s, s.legs, {}, 1e-3, flat(), p);
  EXPECT_LT(std::abs(mechanical_energy(s.body, p) - e0) / e0, 1e-3);
}

TEST(Step, StaticStandCarriesTheWeight) {
  const RobotParams p;
  SimState s;
  s.body.r = Vec3(0, 0, 0.3);
  s.legs = straight(0.3);
  for (int k = 0; k < 3000; ++k) s = step(s, s.legs, {}, 1e-3, flat(), p);
  double fz = 0;
  for (const auto& fc : s.contact) fz += fc.grf.z();
  EXPECT_NEAR(fz, 42.183, 0.01 * 42.183);
  EXPECT_NEAR(fz, p.weight(), 1e-6);
}

TEST(Step, ContactForcesStayInsidePyramid) {
  const RobotParams p;
  SimState s;
  s.body.r = Vec3(0, 0, 0.35);
  s.body.q = quat_from_rpy(0.2, -0.15, 0.3);
  s.body.v = Vec3(0.4, -0.3, -0.5);
  s.body.w = Vec3(1.0, 0.5, -0.8);
  s.legs = straight(0.3);
  LegSet cmd = s.legs;
  cmd[0].psi = 0.3;
  cmd[2].phi = -0.2;
  for (int k = 0; k < 1500; ++k) {
    s = step(s, cmd, {}, 1e-3, flat(), p);
    for (const auto& fc : s.contact) {
      if (!fc.in_contact) {
        EXPECT_EQ(fc.grf, Vec3::Zero());
        continue;
      }
      EXPECT_GE(fc.grf.z(), 0.0);
      EXPECT_LE(std::abs(fc.grf.x()), p.mu * fc.grf.z() + 1e-12);
      EXPECT_LE(std::abs(fc.grf.y()), p.mu * fc.grf.z() + 1e-12);
    }
  }
}

TEST(Step, BitIdenticalReplay) {
  const RobotParams p;
  auto run = [&] {
    SimState s;
    s.body.r = Vec3(0, 0, 0.33);
    s.body.w = Vec3(0.3, 0.1, 0);
    s.legs = straight(0.3);
    std::vector<double> trace;
    for (int k = 0; k < 800; ++k) {
      LegSet cmd = s.legs;
      cmd[k % 4].psi = 0.2 * std::sin(0.01 * k);
      s = step(s, cmd, {1, 1.5, 2, 2.5}, 1e-3, flat(), p);
      trace.insert(trace.end(), {s.body.r.x(), s.body.r.y(), s.body.r.z(), s.body.q.w(), s.body.q.x()});
    }
    return trace;
  };
  EXPECT_EQ(run(), run());
}

TEST(Step, RejectsBadInputs) {
  const RobotParams p;
  SimState s;
  s.body.r = Vec3(0, 0, 2);
  s.legs = straight(0.15);
  EXPECT_THROW(step(s, s.legs, {}, 0.0, flat(), p), Error);
  EXPECT_THROW(step(s, s.legs, {-1, 0, 0, 0}, 1e-3, flat(), p), Error);
  EXPECT_THROW(step(s, s.legs, {p.thrust_max + 1, 0, 0, 0}, 1e-3, flat(), p), Error);
}

TEST(Step, NonFiniteStateThrows) {
  const RobotParams p;
  SimState s;
  s.body.r = Vec3(0, 0, 2);
  s.body.v = Vec3(std::numeric_limits<double>::quiet_NaN(), 0, 0);
  s.legs = straight(0.15);
  const SimState copy = s;
  EXPECT_THROW(step(s, s.legs, {}, 1e-3, flat(), p), NonFiniteState);
  EXPECT_EQ(s.body.r, copy.body.r);
}

TEST(ThrusterWrench, YawSignsAlternate) {
  const RobotParams p;
  const Wrench w = thruster_wrench(BodyState{}, {1, 0, 1, 0}, p);
  EXPECT_NEAR(w.torque.z(), 2 * p.k_yaw, 1e-15);
  const Wrench v = thruster_wrench(BodyState{}, {0, 1, 0, 1}, p);
  EXPECT_NEAR(v.torque.z(), -2 * p.k_yaw, 1e-15);
}

TEST(Attitude, RpyRoundTrip) {
  const Vec3 e = rpy(quat_from_rpy(0.3, -0.2, 1.1));
  EXPECT_NEAR(e.x(), 0.3, 1e-12);
  EXPECT_NEAR(e.y(), -0.2, 1e-12);
  EXPECT_NEAR(e.z(), 1.1, 1e-12);
}

// ---- energy -------------------------------------------------------------------------

TEST(MeterPower, StaticStandWithoutIdleDrawIsFree) {
  RobotParams p;
  p.idle_power = 0.0;
  std::vector<StepRecord> h;
  SimState s;
  s.body.r = Vec3(0, 0, 0.3);
  s.legs = straight(0.3);
  for (int k = 0; k < 500; ++k) {
    s = step(s, s.legs, {}, 1e-3, flat(), p);
    h.push_back({s, {}});
  }
  const Energy e = meter_power(h, p);
  EXPECT_EQ(e.legged, 0.0);
  EXPECT_EQ(e.aerial, 0.0);
}

TEST(MeterPower, OneSecondHoverClosedForm) {
  const RobotParams p;
  const double T = p.weight() / 4;
  std::vector<StepRecord> h;
  SimState s;
  s.body.r = Vec3(0, 0, 2);
  s.legs = straight(0.15);
  h.push_back({s, {T, T, T, T}});
  for (int k = 0; k < 1000; ++k) {
    s = step(s, s.legs, {T, T, T, T}, 1e-3, flat(), p);
    h.push_back({s, {T, T, T, T}});
  }
  const Energy e = meter_power(h, p);
  EXPECT_NEAR(e.aerial, 4 * p.power_coeff * std::pow(42.183 / 4, 1.5), 1e-9);
  EXPECT_NEAR(e.aerial, 2191.7760723940683, 1e-9);
  EXPECT_EQ(e.legged, 0.0);
}

// ---- config -----------------------------------------------------------------------------

TEST(RobotParamsJson, RoundTrip) {
  RobotParams p;
  p.mass = 5.0;
  p.thruster_pos[2] = Vec3(-0.2, -0.1, 0.0);
  p.limits.l_max = 0.45;
  const RobotParams back = robot_params_from_json(to_json(p));
  EXPECT_EQ(to_json(back), to_json(p));
}

TEST(RobotParamsJson, InvalidValuesAreRejected) {
  EXPECT_THROW(robot_params_from_json({{"mass", -1.0}}), ConfigError);
  EXPECT_THROW(robot_params_from_json({{"mu", 0.0}}), ConfigError);
  EXPECT_THROW(robot_params_from_json({{"inertia", {{1, 0.5, 0}, {0, 1, 0}, {0, 0, 1}}}}), ConfigError);
  EXPECT_THROW(robot_params_from_json({{"inertia", {{1, 0, 0}, {0, -1, 0}, {0, 0, 1}}}}), ConfigError);
  EXPECT_THROW(robot_params_from_json({{"thrust_max", 0.0}}), ConfigError);
}
