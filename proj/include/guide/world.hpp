#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "guide/common.hpp"

namespace guide::world {

struct Circle {
  double cx = 0, cy = 0, r = 1;
  bool contains(const Vec2& p) const { return dist(p, {cx, cy}) <= r; }
  Vec2 center() const { return {cx, cy}; }
};

struct Bounds {
  double min_x = 0, min_y = 0, max_x = 100, max_y = 100;
  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  bool contains(const Vec2& p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
};

// Rasterized current field with bilinear lookup; zero outside data or when
// the world has no current.
struct VectorField {
  double origin_x = 0, origin_y = 0, resolution = 1;
  int width = 0, height = 0;
  std::vector<double> u, v;  // row-major, index = iy*width + ix

  bool empty() const { return width == 0 || height == 0; }
  Vec2 at(const Vec2& p) const;
};

struct MotionLimits {
  double v_max = 2.0;    // m/s
  double a_max = 1.0;    // m/s^2 at full surge
  double omega_max = 1.0;  // rad/s at full yaw
};

struct NoiseConfig {
  double sigma_v = 0.25;      // m/s process noise on position advance
  double sigma_omega = 0.05;  // rad/s process noise on heading
  double sigma_gps = 0.1;     // m measurement std of a GPS fix
};

struct CostConfig {
  double c_step = 0.05;
  double c_gps = 1.0;
  double c_collision = 50.0;
  double r_goal = 100.0;
  double r_patrol = 10.0;
  double kappa = 1.0;  // shaping gain
};

struct WorldConfig {
  Bounds bounds;
  std::vector<Circle> obstacles;
  std::map<std::string, Circle> regions;  // ordered by name; index order is stable
  std::string start_region;               // empty -> spawn anywhere free
  VectorField current;
  double current_ref = 1.0;  // m/s scale used to normalize disturbance intensity
  double dt = 0.5;
  double footprint_radius = 1.0;
  MotionLimits limits;
  NoiseConfig noise;
  CostConfig costs;
  int horizon = 400;
  int patrol_waypoints = 8;
  double waypoint_radius = 3.0;

  // signed distance from p to the nearest obstacle surface (negative inside)
  double obstacle_surface_distance(const Vec2& p) const;
  // |current| / current_ref clamped to [0,1]
  double disturbance_intensity(const Vec2& p) const;
  const Circle& region(const std::string& id) const;
  int region_index(const std::string& id) const;  // position in name order
  std::vector<std::string> region_names() const;
};

class WorldError : public std::runtime_error {
 public:
  explicit WorldError(const std::string& m) : std::runtime_error(m) {}
};

WorldConfig load_world(const std::string& path);
WorldConfig world_from_json_text(const std::string& text);
std::string world_to_json_text(const WorldConfig& w);

}  // namespace guide::world
