#pragma once

// Reference governor for the legged mode: the applied joint reference moves
// toward the target only as far as a short-horizon model prediction keeps
// every stance-foot force inside the friction pyramid.

#include <array>
#include <cmath>
#include <functional>
#include <utility>

#include <json.hpp>

#include "mmloco/env.hpp"
#include "mmloco/error.hpp"
#include "mmloco/rom.hpp"

namespace mmloco {

inline bool friction_pyramid_ok(const Vec3& f, double mu) {
  return f.z() >= 0.0 && std::abs(f.x()) <= mu * f.z() && std::abs(f.y()) <= mu * f.z();
}

struct GovernorConfig {
  double kappa = 0.3;  // fraction of the remaining gap taken per update
  int horizon = 5;     // probe length in sim steps; 0 disables the check
  int max_halvings = 8;
  double mu = 0.6;     // pyramid the governor enforces

  void validate() const {
    if (!(kappa > 0 && kappa <= 1)) throw ConfigError("governor kappa must lie in (0, 1]");
    if (horizon < 0) throw ConfigError("governor horizon must be >= 0");
  }
};

struct GovernorState {
  LegSet applied{};
  GovernorConfig config{};
  double accepted_fraction = 1.0;  // of the last kappa step
};

inline LegSet lerp(const LegSet& a, const LegSet& b, double s) {
  LegSet out;
  for (std::size_t k = 0; k < kNumLegs; ++k)
    out[k] = {a[k].phi + s * (b[k].phi - a[k].phi), a[k].psi + s * (b[k].psi - a[k].psi),
              a[k].l + s * (b[k].l - a[k].l)};
  return out;
}

inline std::array<double, 3 * kNumLegs> flatten(const LegSet& legs) {
  std::array<double, 3 * kNumLegs> out{};
  for (std::size_t k = 0; k < kNumLegs; ++k) {
    out[3 * k] = legs[k].phi;
    out[3 * k + 1] = legs[k].psi;
    out[3 * k + 2] = legs[k].l;
  }
  return out;
}

inline double distance(const LegSet& a, const LegSet& b) {
  double s = 0.0;
  const auto fa = flatten(a), fb = flatten(b);
  for (std::size_t i = 0; i < fa.size(); ++i) s += (fa[i] - fb[i]) * (fa[i] - fb[i]);
  return std::sqrt(s);
}

/// One governor update. `probe(candidate)` returns true when the candidate,
/// held constant over the horizon, keeps all stance forces feasible; it may
/// throw, in which case the error propagates and the caller keeps `gov`.
/// On rejection the step is bisected to the largest feasible fraction found.
template <class Probe>
GovernorState governor_update(GovernorState gov, const LegSet& target, Probe&& probe) {
  const LegSet candidate = lerp(gov.applied, target, gov.config.kappa);
  if (gov.config.horizon == 0 || distance(candidate, gov.applied) == 0.0) {
    gov.applied = candidate;
    gov.accepted_fraction = 1.0;
    return gov;
  }
  bool ok = false;
  try {
    ok = probe(candidate);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(std::string("governor probe failed: ") + e.what());
  }
  if (ok) {
    gov.applied = candidate;
    gov.accepted_fraction = 1.0;
    return gov;
  }
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < gov.config.max_halvings; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (probe(lerp(gov.applied, candidate, mid)))
      lo = mid;
    else
      hi = mid;
  }
  gov.applied = lerp(gov.applied, candidate, lo);
  gov.accepted_fraction = lo;
  return gov;
}

/// Model-based probe: copies the simulation state, applies the candidate and
/// holds the world foot positions it implies for `horizon` steps (re-solving
/// the legs against the predicted body pose), checking the stick-contact force
/// demand of every foot the gait has in stance.
struct RomProbe {
  const SimState* state;
  Thrusts thrusts{};
  std::array<bool, kNumLegs> stance{true, true, true, true};
  const Environment* env;
  const RobotParams* params;
  double dt = 1e-3;
  int horizon = 5;
  double mu = 0.6;

  bool operator()(const LegSet& candidate) const {
    SimState s = *state;
    std::array<Vec3, kNumLegs> feet;
    for (int i = 0; i < kNumLegs; ++i)
      feet[static_cast<std::size_t>(i)] = foot_position_unchecked(s.body, candidate[static_cast<std::size_t>(i)], i, *params);
    LegSet cmd = candidate;
    for (int h = 0; h < horizon; ++h) {
      if (h > 0)
        for (int i = 0; i < kNumLegs; ++i) {
          const auto k = static_cast<std::size_t>(i);
          const Vec3 d = s.body.q.conjugate() * (feet[k] - s.body.r) - params->hip_offsets[k];
          cmd[k] = clamp_to_limits(leg_ik_local(d), params->limits);
        }
      s = step(s, cmd, thrusts, dt, *env, *params);
      for (std::size_t k = 0; k < kNumLegs; ++k)
        if (stance[k] && s.contact[k].in_contact && !friction_pyramid_ok(s.contact[k].demand, mu)) return false;
    }
    return true;
  }
};

struct TrackResult {
  LegSet command{};
  LegSet raw_ik{};
  GovernorState governor{};
};

/// IK for each world foot target, then one governor update toward it.
template <class Probe>
TrackResult track_feet(const BodyState& body, const std::array<Vec3, kNumLegs>& targets,
                       const GovernorState& gov, const RobotParams& p, Probe&& probe) {
  TrackResult out;
  for (int i = 0; i < kNumLegs; ++i)
    out.raw_ik[static_cast<std::size_t>(i)] = leg_ik(body, targets[static_cast<std::size_t>(i)], i, p);
  out.governor = governor_update(gov, out.raw_ik, std::forward<Probe>(probe));
  out.command = out.governor.applied;
  return out;
}

inline nlohmann::json to_json(const GovernorConfig& g) {
  return {{"kappa", g.kappa}, {"horizon", g.horizon}, {"max_halvings", g.max_halvings}, {"mu", g.mu}};
}

inline GovernorConfig governor_from_json(const nlohmann::json& j, GovernorConfig g = {}) {
  g.kappa = j.value("kappa", g.kappa);
  g.horizon = j.value("horizon", g.horizon);
  g.max_halvings = j.value("max_halvings", g.max_halvings);
  g.mu = j.value("mu", g.mu);
  g.validate();
  return g;
}

}  // namespace mmloco
