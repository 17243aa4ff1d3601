#include "guide/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace guide::world {

using nlohmann::json;

Vec2 VectorField::at(const Vec2& p) const {
  if (empty()) return {0, 0};
  double gx = (p.x - origin_x) / resolution;
  double gy = (p.y - origin_y) / resolution;
  gx = std::clamp(gx, 0.0, static_cast<double>(width - 1));
  gy = std::clamp(gy, 0.0, static_cast<double>(height - 1));
  const int x0 = std::min(static_cast<int>(gx), width - 2 >= 0 ? width - 2 : 0);
  const int y0 = std::min(static_cast<int>(gy), height - 2 >= 0 ? height - 2 : 0);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double tx = gx - x0;
  const double ty = gy - y0;
  auto idx = [&](int ix, int iy) { return iy * width + ix; };
  auto lerp2 = [&](const std::vector<double>& g) {
    const double a = g[idx(x0, y0)] * (1 - tx) + g[idx(x1, y0)] * tx;
    const double b = g[idx(x0, y1)] * (1 - tx) + g[idx(x1, y1)] * tx;
    return a * (1 - ty) + b * ty;
  };
  return {lerp2(u), lerp2(v)};
}

double WorldConfig::obstacle_surface_distance(const Vec2& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : obstacles) best = std::min(best, dist(p, o.center()) - o.r);
  return best;
}

double WorldConfig::disturbance_intensity(const Vec2& p) const {
  if (current.empty() || current_ref <= 0) return 0.0;
  return std::clamp(current.at(p).norm() / current_ref, 0.0, 1.0);
}

const Circle& WorldConfig::region(const std::string& id) const {
  auto it = regions.find(id);
  if (it == regions.end()) throw WorldError("no such region: " + id);
  return it->second;
}

int WorldConfig::region_index(const std::string& id) const {
  int i = 0;
  for (const auto& [name, c] : regions) {
    if (name == id) return i;
    ++i;
  }
  throw WorldError("no such region: " + id);
}

std::vector<std::string> WorldConfig::region_names() const {
  std::vector<std::string> out;
  for (const auto& [name, c] : regions) out.push_back(name);
  return out;
}

namespace {

Circle circle_from(const json& j) {
  return {j.at("cx").get<double>(), j.at("cy").get<double>(), j.at("r").get<double>()};
}

// Currents are authored either as explicit grids or as rectangular bands
// that get rasterized here.
VectorField current_from(const json& j, const Bounds& b) {
  VectorField f;
  f.resolution = j.value("resolution", 2.0);
  if (j.contains("u")) {
    f.origin_x = j.value("origin_x", b.min_x);
    f.origin_y = j.value("origin_y", b.min_y);
    f.width = j.at("width").get<int>();
    f.height = j.at("height").get<int>();
    f.u = j.at("u").get<std::vector<double>>();
    f.v = j.at("v").get<std::vector<double>>();
    if (static_cast<int>(f.u.size()) != f.width * f.height || f.u.size() != f.v.size())
      throw WorldError("current grid size mismatch");
    return f;
  }
  f.origin_x = b.min_x;
  f.origin_y = b.min_y;
  f.width = static_cast<int>(std::floor(b.width() / f.resolution)) + 1;
  f.height = static_cast<int>(std::floor(b.height() / f.resolution)) + 1;
  f.u.assign(static_cast<std::size_t>(f.width) * f.height, 0.0);
  f.v.assign(static_cast<std::size_t>(f.width) * f.height, 0.0);
  for (const auto& band : j.value("bands", json::array())) {
    const double x_lo = band.value("x_lo", b.min_x), x_hi = band.value("x_hi", b.max_x);
    const double y_lo = band.value("y_lo", b.min_y), y_hi = band.value("y_hi", b.max_y);
    const double ux = band.value("ux", 0.0), uy = band.value("uy", 0.0);
    for (int iy = 0; iy < f.height; ++iy)
      for (int ix = 0; ix < f.width; ++ix) {
        const double x = f.origin_x + ix * f.resolution;
        const double y = f.origin_y + iy * f.resolution;
        if (x >= x_lo && x <= x_hi && y >= y_lo && y <= y_hi) {
          f.u[iy * f.width + ix] += ux;
          f.v[iy * f.width + ix] += uy;
        }
      }
  }
  return f;
}

}  // namespace

WorldConfig world_from_json_text(const std::string& text) {
  json j = json::parse(text);
  WorldConfig w;
  if (j.contains("bounds")) {
    const auto& b = j["bounds"];
    w.bounds = {b.value("min_x", 0.0), b.value("min_y", 0.0), b.value("max_x", 100.0),
                b.value("max_y", 100.0)};
  }
  for (const auto& o : j.value("obstacles", json::array())) w.obstacles.push_back(circle_from(o));
  if (j.contains("regions"))
    for (const auto& [name, c] : j["regions"].items()) w.regions[name] = circle_from(c);
  w.start_region = j.value("start_region", std::string{});
  if (!w.start_region.empty() && !w.regions.count(w.start_region))
    throw WorldError("start_region not among regions: " + w.start_region);
  if (j.contains("current")) w.current = current_from(j["current"], w.bounds);
  w.current_ref = j.contains("current") ? j["current"].value("ref", 1.0) : 1.0;
  w.dt = j.value("dt", 0.5);
  w.footprint_radius = j.value("footprint_radius", 1.0);
  if (j.contains("limits")) {
    const auto& l = j["limits"];
    w.limits = {l.value("v_max", 2.0), l.value("a_max", 1.0), l.value("omega_max", 1.0)};
  }
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    w.noise = {n.value("sigma_v", 0.25), n.value("sigma_omega", 0.05), n.value("sigma_gps", 0.1)};
  }
  if (j.contains("costs")) {
    const auto& c = j["costs"];
    w.costs = {c.value("c_step", 0.05),  c.value("c_gps", 1.0),
               c.value("c_collision", 50.0), c.value("r_goal", 100.0),
               c.value("r_patrol", 10.0),    c.value("kappa", 1.0)};
  }
  w.horizon = j.value("horizon", 400);
  if (j.contains("patrol")) {
    w.patrol_waypoints = j["patrol"].value("waypoints", 8);
    w.waypoint_radius = j["patrol"].value("radius", 3.0);
  }
  if (w.dt <= 0) throw WorldError("dt must be positive");
  for (const auto& [name, c] : w.regions)
    if (!w.bounds.contains({c.cx, c.cy})) throw WorldError("region outside bounds: " + name);
  return w;
}

WorldConfig load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw WorldError("cannot open world file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return world_from_json_text(ss.str());
}

std::string world_to_json_text(const WorldConfig& w) {
  json j;
  j["bounds"] = {{"min_x", w.bounds.min_x},
                 {"min_y", w.bounds.min_y},
                 {"max_x", w.bounds.max_x},
                 {"max_y", w.bounds.max_y}};
  j["obstacles"] = json::array();
  for (const auto& o : w.obstacles)
    j["obstacles"].push_back({{"cx", o.cx}, {"cy", o.cy}, {"r", o.r}});
  j["regions"] = json::object();
  for (const auto& [name, c] : w.regions)
    j["regions"][name] = {{"cx", c.cx}, {"cy", c.cy}, {"r", c.r}};
  if (!w.start_region.empty()) j["start_region"] = w.start_region;
  if (!w.current.empty()) {
    j["current"] = {{"origin_x", w.current.origin_x}, {"origin_y", w.current.origin_y},
                    {"resolution", w.current.resolution}, {"width", w.current.width},
                    {"height", w.current.height},       {"u", w.current.u},
                    {"v", w.current.v},                 {"ref", w.current_ref}};
  }
  j["dt"] = w.dt;
  j["footprint_radius"] = w.footprint_radius;
  j["limits"] = {{"v_max", w.limits.v_max}, {"a_max", w.limits.a_max},
                 {"omega_max", w.limits.omega_max}};
  j["noise"] = {{"sigma_v", w.noise.sigma_v}, {"sigma_omega", w.noise.sigma_omega},
                {"sigma_gps", w.noise.sigma_gps}};
  j["costs"] = {{"c_step", w.costs.c_step}, {"c_gps", w.costs.c_gps},
                {"c_collision", w.costs.c_collision}, {"r_goal", w.costs.r_goal},
                {"r_patrol", w.costs.r_patrol}, {"kappa", w.costs.kappa}};
  j["horizon"] = w.horizon;
  j["patrol"] = {{"waypoints", w.patrol_waypoints}, {"radius", w.waypoint_radius}};
  return j.dump(2);
}

}  // namespace guide::world
