#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mmloco/error.hpp"

namespace mmloco {

using Vec3 = Eigen::Vector3d;

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  // Closed set: faces count as inside.
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  bool footprint_contains(double x, double y) const {
    return x >= min.x() && x <= max.x() && y >= min.y() && y <= max.y();
  }
};

/// Flat ground plane plus axis-aligned box obstacles inside a box workspace.
/// Immutable after construction; all queries are const and thread-safe.
class Environment {
 public:
  Environment() = default;

  Environment(double ground_z, Box bounds, std::vector<Box> obstacles)
      : ground_z_(ground_z), bounds_(bounds), obstacles_(std::move(obstacles)) {
    validate();
  }

  double ground_z() const { return ground_z_; }
  const Box& bounds() const { return bounds_; }
  const std::vector<Box>& obstacles() const { return obstacles_; }

  bool is_free(const Vec3& p) const {
    if (!bounds_.contains(p)) return false;
    if (!(p.z() > ground_z_)) return false;
    for (const auto& b : obstacles_)
      if (b.contains(p)) return false;
    return true;
  }

  /// Height of the walkable surface at (x, y): the top of the highest
  /// ground-resting box covering the point, or the ground plane.
  double ground_height(double x, double y) const {
    if (!bounds_.footprint_contains(x, y))
      throw OutsideWorkspace("ground_height query (" + std::to_string(x) + ", " +
                             std::to_string(y) + ") outside workspace");
    return surface_height(x, y);
  }

  /// Same as ground_height, but points off the footprint see the bare plane.
  double surface_height(double x, double y) const {
    double h = ground_z_;
    for (const auto& b : obstacles_) {
      if (b.min.z() <= ground_z_ + kRestTolerance && b.footprint_contains(x, y))
        h = std::max(h, b.max.z());
    }
    return h;
  }

  /// Sampled segment test: samples at spacing <= step, endpoints included.
  /// The sample count is a power of two, so a smaller step only adds samples.
  bool segment_free(const Vec3& p0, const Vec3& p1, double step) const {
    if (!(step > 0.0)) throw Error("segment_free: step must be positive");
    const double len = (p1 - p0).norm();
    if (len == 0.0) return is_free(p0);
    long n = 1;
    while (static_cast<double>(n) * step < len) n *= 2;
    for (long i = 0; i <= n; ++i) {
      const double s = static_cast<double>(i) / static_cast<double>(n);
      if (!is_free(p0 + s * (p1 - p0))) return false;
    }
    return true;
  }

  /// Copy with every obstacle grown by `margin` on all sides (clipped to the
  /// workspace). Used for collision checks of a robot with nonzero size.
  Environment inflated(double margin) const {
    std::vector<Box> grown;
    grown.reserve(obstacles_.size());
    for (const auto& b : obstacles_) {
      Box g{b.min.array() - margin, b.max.array() + margin};
      g.min = g.min.cwiseMax(bounds_.min);
      g.max = g.max.cwiseMin(bounds_.max);
      grown.push_back(g);
    }
    Environment out;
    out.ground_z_ = ground_z_;
    out.bounds_ = bounds_;
    out.obstacles_ = std::move(grown);
    return out;
  }

 private:
  static constexpr double kRestTolerance = 1e-9;

  void validate() const {
    if (!(bounds_.min.array() < bounds_.max.array()).all())
      throw ConfigError("environment bounds: min must be < max componentwise");
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
      const auto& b = obstacles_[i];
      if (!(b.min.array() < b.max.array()).all())
        throw ConfigError("obstacle " + std::to_string(i) + ": min must be < max");
      if (!bounds_.contains(b.min) || !bounds_.contains(b.max))
        throw ConfigError("obstacle " + std::to_string(i) + " lies outside bounds");
    }
  }

  double ground_z_ = 0.0;
  Box bounds_{Vec3(-1, -1, 0), Vec3(1, 1, 1)};
  std::vector<Box> obstacles_;
};

// ---- structured-text format ------------------------------------------------

inline nlohmann::json vec_to_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

inline Vec3 vec_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json to_json(const Environment& env) {
  nlohmann::json obs = nlohmann::json::array();
  for (const auto& b : env.obstacles())
    obs.push_back({{"min", vec_to_json(b.min)}, {"max", vec_to_json(b.max)}});
  return {{"ground_z", env.ground_z()},
          {"bounds", {{"min", vec_to_json(env.bounds().min)},
                      {"max", vec_to_json(env.bounds().max)}}},
          {"obstacles", obs}};
}

inline Environment environment_from_json(const nlohmann::json& j) {
  try {
    Box bounds{vec_from_json(j.at("bounds").at("min")), vec_from_json(j.at("bounds").at("max"))};
    std::vector<Box> obs;
    if (j.contains("obstacles"))
      for (const auto& o : j.at("obstacles"))
        obs.push_back({vec_from_json(o.at("min")), vec_from_json(o.at("max"))});
    return Environment(j.value("ground_z", 0.0), bounds, std::move(obs));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("environment file: ") + e.what());
  }
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << '\n';
}

inline Environment load_environment(const std::string& path) {
  return environment_from_json(read_json_file(path));
}

}  // namespace mmloco
