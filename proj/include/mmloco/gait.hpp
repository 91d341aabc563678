#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mmloco/error.hpp"
#include "mmloco/rom.hpp"

namespace mmloco {

struct GaitSchedule {
  double freq = 2.0;   // cycles per second
  double duty = 0.5;   // stance fraction per leg
  std::array<double, kNumLegs> phase_offset{0.0, 0.5, 0.0, 0.5};
  double step_height = 0.04;
  double stride = 0.0;

  // Diagonal pairs (FL+BR, FR+BL) in antiphase. duty 0.5 is the two-contact trot.
  static GaitSchedule trot(double freq, double duty = 0.5) {
    GaitSchedule s;
    s.freq = freq;
    s.duty = duty;
    s.phase_offset = {0.0, 0.5, 0.0, 0.5};
    return s;
  }

  // One leg at a time; with duty 0.75 exactly three feet are down at all times.
  static GaitSchedule three_contact(double freq) {
    GaitSchedule s;
    s.freq = freq;
    s.duty = 0.75;
    s.phase_offset = {0.0, 0.5, 0.25, 0.75};
    return s;
  }

  double period() const { return 1.0 / freq; }

  void validate() const {
    if (!(duty > 0 && duty < 1)) throw ConfigError("gait duty must lie in (0, 1)");
    if (!(freq > 0)) throw ConfigError("gait frequency must be positive");
    for (double o : phase_offset)
      if (!(o >= 0 && o < 1)) throw ConfigError("gait phase offsets must lie in [0, 1)");
  }
};

struct LegPhase {
  double phase = 0.0;
  bool stance = true;
};

using GaitPhase = std::array<LegPhase, kNumLegs>;

inline GaitPhase gait_phase(double t, const GaitSchedule& s) {
  GaitPhase out;
  for (std::size_t i = 0; i < kNumLegs; ++i) {
    const double x = t * s.freq + s.phase_offset[i];
    double ph = x - std::floor(x);
    if (ph >= 1.0) ph = 0.0;
    out[i] = {ph, ph < s.duty};
  }
  return out;
}

// Fraction of the swing completed for a leg in swing, in [0, 1].
inline double swing_progress(const LegPhase& lp, const GaitSchedule& s) {
  return std::clamp((lp.phase - s.duty) / (1.0 - s.duty), 0.0, 1.0);
}

struct SwingOffset {
  double dx = 0.0;  // along heading
  double dz = 0.0;
};

inline SwingOffset swing_trajectory(double u, const GaitSchedule& s) {
  if (!(u >= 0.0 && u <= 1.0)) throw Error("swing_trajectory: progress must lie in [0, 1]");
  // sin(pi) is not exactly zero
  const double dz = (u == 0.0 || u == 1.0) ? 0.0 : s.step_height * std::sin(std::numbers::pi * u);
  return {s.stride * (u - 0.5), dz};
}

// ---- support polygon and stability margin ---------------------------------------

/// Convex hull of stance-foot ground projections, counter-clockwise. One or two
/// vertices mean a point or segment support.
struct SupportPolygon {
  std::vector<Vec2> vertices;

  double area() const {
    double a = 0.0;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      const auto& p = vertices[i];
      const auto& q = vertices[(i + 1) % vertices.size()];
      a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
  }
};

namespace detail {
inline double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double s = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}
}  // namespace detail

inline SupportPolygon support_polygon(std::span<const Vec2> feet) {
  if (feet.empty()) throw FlightPhaseError("support_polygon: no stance feet");
  std::vector<Vec2> pts(feet.begin(), feet.end());
  std::sort(pts.begin(), pts.end(),
            [](const Vec2& a, const Vec2& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() <= 2) return {pts};

  // Andrew's monotone chain, collinear points dropped
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && detail::cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && detail::cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return {hull};
}

/// Signed distance from the projected COM to the support boundary: positive
/// inside, negative outside. Point and segment supports give values <= 0.
inline double stability_margin(const Vec2& com, const SupportPolygon& poly) {
  const auto& v = poly.vertices;
  if (v.empty()) throw FlightPhaseError("stability_margin: empty support");
  if (v.size() == 1) return -(com - v[0]).norm();
  if (v.size() == 2) return -detail::point_segment_distance(com, v[0], v[1]);

  double nearest = std::numeric_limits<double>::infinity();
  bool inside = true;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % v.size()];
    nearest = std::min(nearest, detail::point_segment_distance(com, a, b));
    if (detail::cross(a, b, com) < 0) inside = false;
  }
  return inside ? nearest : -nearest;
}

inline nlohmann::json to_json(const GaitSchedule& s) {
  return {{"freq", s.freq},
          {"duty", s.duty},
          {"phase_offset", s.phase_offset},
          {"step_height", s.step_height},
          {"stride", s.stride}};
}

inline GaitSchedule gait_from_json(const nlohmann::json& j, GaitSchedule s = {}) {
  try {
    s.freq = j.value("freq", s.freq);
    s.duty = j.value("duty", s.duty);
    if (j.contains("phase_offset")) s.phase_offset = j.at("phase_offset").get<std::array<double, kNumLegs>>();
    s.step_height = j.value("step_height", s.step_height);
    s.stride = j.value("stride", s.stride);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("gait: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace mmloco
