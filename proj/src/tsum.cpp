#include "guide/tsum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace guide::tsum {

GridSpec GridSpec::covering(const world::Bounds& b, double resolution) {
  GridSpec g;
  g.origin_x = b.min_x;
  g.origin_y = b.min_y;
  g.resolution = resolution;
  g.width = static_cast<int>(std::ceil(b.width() / resolution)) + 1;
  g.height = static_cast<int>(std::ceil(b.height() / resolution)) + 1;
  return g;
}

ScalarField ScalarField::constant(const GridSpec& g, double v) {
  ScalarField f;
  f.grid = g;
  f.values.assign(static_cast<std::size_t>(g.width) * g.height, v);
  return f;
}

TsumWeights::TsumWeights(double phi, double c, double e) {
  if (phi < 0 || c < 0 || e < 0) throw std::invalid_argument("tsum weights must be >= 0");
  const double s = phi + c + e;
  if (s <= 0) throw std::invalid_argument("tsum weights must not all be zero");
  w_phi = phi / s;
  w_c = c / s;
  w_e = e / s;
}

double Tsum::median() const {
  std::vector<double> v = field.values;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  return v[mid];
}

ScalarField relevance_field(const taskspec::ParsedTask& task, const world::WorldConfig& w,
                            const GridSpec& grid, const grounding::GroundingParams& g) {
  ScalarField out = ScalarField::constant(grid, 1.0);

  struct ItemInfo {
    grounding::Embedding emb;
    world::Circle region;
    double priority;
  };
  std::vector<ItemInfo> items;
  std::vector<grounding::Embedding> embs;
  for (const auto& st : task.subtasks) {
    ItemInfo info{grounding::embed_item(grounding::item_of(st), g), w.region(st.region_id),
                  st.priority};
    embs.push_back(info.emb);
    items.push_back(std::move(info));
  }

#pragma omp parallel for schedule(static)
  for (int iy = 0; iy < grid.height; ++iy) {
    for (int ix = 0; ix < grid.width; ++ix) {
      const Vec2 l = grid.node(ix, iy);
      const grounding::Embedding e_loc =
          grounding::embed_location(grounding::location_features(w, l), g);
      const Eigen::VectorXd alpha =
          grounding::attention_weights(e_loc, embs, g.attention_temperature);
      double relevance = 0;
      for (std::size_t i = 0; i < items.size(); ++i) {
        const double d = dist(l, items[i].region.center());
        const double sigma = std::max(items[i].region.r, 1e-6);
        const double footprint = std::exp(-d * d / (2.0 * sigma * sigma));
        relevance += alpha[static_cast<int>(i)] * footprint * items[i].priority;
      }
      out.at(ix, iy) = std::clamp(1.0 - relevance, 0.0, 1.0);
    }
  }
  return out;
}

ScalarField constraint_field(const taskspec::ParsedTask& task, const world::WorldConfig& w,
                             const GridSpec& grid, double taper) {
  ScalarField out = ScalarField::constant(grid, 1.0);
  if (task.constraints.empty()) return out;

  struct Inflated {
    world::Circle region;
    double margin;
  };
  std::vector<Inflated> zones;
  for (const auto& c : task.constraints) zones.push_back({w.region(c.region_id), c.margin});

#pragma omp parallel for schedule(static)
  for (int iy = 0; iy < grid.height; ++iy) {
    for (int ix = 0; ix < grid.width; ++ix) {
      const Vec2 l = grid.node(ix, iy);
      double d_c = std::numeric_limits<double>::infinity();
      for (const auto& z : zones)
        d_c = std::min(d_c, dist(l, z.region.center()) - (z.region.r + z.margin));
      out.at(ix, iy) = std::clamp(d_c / taper, 0.0, 1.0);
    }
  }
  return out;
}

ScalarField environment_field(const world::WorldConfig& w, const GridSpec& grid,
                              double density_radius) {
  ScalarField out = ScalarField::constant(grid, 1.0);

  // occupancy raster of the grid itself, used for the density kernel
  std::vector<char> occupied(static_cast<std::size_t>(grid.width) * grid.height, 0);
  for (int iy = 0; iy < grid.height; ++iy)
    for (int ix = 0; ix < grid.width; ++ix) {
      const Vec2 l = grid.node(ix, iy);
      for (const auto& o : w.obstacles)
        if (o.contains(l)) {
          occupied[static_cast<std::size_t>(iy) * grid.width + ix] = 1;
          break;
        }
    }

  const int rad = static_cast<int>(std::ceil(density_radius / grid.resolution));

#pragma omp parallel for schedule(static)
  for (int iy = 0; iy < grid.height; ++iy) {
    for (int ix = 0; ix < grid.width; ++ix) {
      const Vec2 l = grid.node(ix, iy);
      int inside = 0, hits = 0;
      for (int dy = -rad; dy <= rad; ++dy) {
        const int jy = iy + dy;
        if (jy < 0 || jy >= grid.height) continue;
        for (int dx = -rad; dx <= rad; ++dx) {
          const int jx = ix + dx;
          if (jx < 0 || jx >= grid.width) continue;
          const double dd = (dx * dx + dy * dy) * grid.resolution * grid.resolution;
          if (dd > density_radius * density_radius) continue;
          ++inside;
          hits += occupied[static_cast<std::size_t>(jy) * grid.width + jx];
        }
      }
      const double ohat = inside > 0 ? static_cast<double>(hits) / inside : 0.0;
      const double chat = w.disturbance_intensity(l);
      out.at(ix, iy) = std::clamp(1.0 - 0.5 * chat - 0.5 * ohat, 0.0, 1.0);
    }
  }
  return out;
}

Tsum compose_tsum(const ScalarField& phi, const ScalarField& c, const ScalarField& e,
                  const TsumWeights& w, double u_max) {
  if (!(phi.grid == c.grid) || !(phi.grid == e.grid)) throw GridMismatch();
  Tsum t;
  t.u_max = u_max;
  t.field.grid = phi.grid;
  t.field.values.resize(phi.values.size());
  for (std::size_t i = 0; i < phi.values.size(); ++i)
    t.field.values[i] = w.w_phi * phi.values[i] + w.w_c * c.values[i] + w.w_e * e.values[i];
  return t;
}

double query_tsum(const Tsum& t, double x, double y) {
  const GridSpec& g = t.field.grid;
  double gx = (x - g.origin_x) / g.resolution;
  double gy = (y - g.origin_y) / g.resolution;
  gx = std::clamp(gx, 0.0, static_cast<double>(g.width - 1));
  gy = std::clamp(gy, 0.0, static_cast<double>(g.height - 1));
  const int x0 = std::min(static_cast<int>(gx), g.width - 2 >= 0 ? g.width - 2 : 0);
  const int y0 = std::min(static_cast<int>(gy), g.height - 2 >= 0 ? g.height - 2 : 0);
  const int x1 = std::min(x0 + 1, g.width - 1);
  const int y1 = std::min(y0 + 1, g.height - 1);
  const double tx = gx - x0;
  const double ty = gy - y0;
  const double a = t.field.at(x0, y0) * (1 - tx) + t.field.at(x1, y0) * tx;
  const double b = t.field.at(x0, y1) * (1 - tx) + t.field.at(x1, y1) * tx;
  return a * (1 - ty) + b * ty;
}

namespace {

constexpr char kMagic[4] = {'T', 'S', 'U', 'M'};
constexpr std::uint16_t kVersion = 1;

struct File {
  std::FILE* f = nullptr;
  explicit File(std::FILE* h) : f(h) {}
  ~File() {
    if (f) std::fclose(f);
  }
  File(const File&) = delete;
  File& operator=(const File&) = delete;
};

template <class T>
void write_pod(std::FILE* f, const T& v) {
  if (std::fwrite(&v, sizeof(T), 1, f) != 1) throw IoError("tsum write failed");
}

template <class T>
T read_pod(std::FILE* f) {
  T v;
  if (std::fread(&v, sizeof(T), 1, f) != 1) throw FormatError("tsum file truncated");
  return v;
}

}  // namespace

void save_tsum(const Tsum& t, const std::string& path) {
  File file(std::fopen(path.c_str(), "wb"));
  if (!file.f) throw IoError("cannot open for write: " + path);
  std::FILE* f = file.f;
  if (std::fwrite(kMagic, 1, 4, f) != 4) throw IoError("tsum write failed");
  write_pod<std::uint16_t>(f, kVersion);
  write_pod<double>(f, t.field.grid.origin_x);
  write_pod<double>(f, t.field.grid.origin_y);
  write_pod<double>(f, t.field.grid.resolution);
  write_pod<double>(f, t.u_max);
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(t.field.grid.width));
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(t.field.grid.height));
  for (double v : t.field.values) write_pod<double>(f, v);
}

Tsum load_tsum(const std::string& path) {
  File file(std::fopen(path.c_str(), "rb"));
  if (!file.f) throw IoError("cannot open for read: " + path);
  std::FILE* f = file.f;
  char magic[4];
  if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad TSUM magic");
  if (read_pod<std::uint16_t>(f) != kVersion) throw FormatError("unsupported TSUM version");
  Tsum t;
  t.field.grid.origin_x = read_pod<double>(f);
  t.field.grid.origin_y = read_pod<double>(f);
  t.field.grid.resolution = read_pod<double>(f);
  t.u_max = read_pod<double>(f);
  t.field.grid.width = static_cast<int>(read_pod<std::uint32_t>(f));
  t.field.grid.height = static_cast<int>(read_pod<std::uint32_t>(f));
  if (t.field.grid.width < 2 || t.field.grid.height < 2 || t.field.grid.resolution <= 0)
    throw FormatError("bad TSUM shape");
  const std::size_t n = static_cast<std::size_t>(t.field.grid.width) * t.field.grid.height;
  t.field.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.field.values[i] = read_pod<double>(f);
  return t;
}

void export_pgm(const ScalarField& f, const std::string& path) {
  double lo = f.values.empty() ? 0.0 : f.values[0];
  double hi = lo;
  for (double v : f.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = hi - lo;

  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << "P2\n" << f.grid.width << " " << f.grid.height << "\n255\n";
  for (int iy = 0; iy < f.grid.height; ++iy) {
    for (int ix = 0; ix < f.grid.width; ++ix) {
      const int q =
          range > 0 ? static_cast<int>(std::lround((f.at(ix, iy) - lo) / range * 255.0)) : 0;
      out << q << (ix + 1 == f.grid.width ? "" : " ");
    }
    out << "\n";
  }
  if (!out) throw IoError("pgm write failed: " + path);

  nlohmann::json sidecar{{"min", lo}, {"max", hi}};
  std::ofstream side(path + ".json");
  if (!side) throw IoError("cannot open for write: " + path + ".json");
  side << sidecar.dump(2) << "\n";
}

Tsum build_tsum(const taskspec::ParsedTask& task, const world::WorldConfig& w,
                const GridSpec& grid, const grounding::GroundingParams& g,
                const TsumWeights& weights, double u_max) {
  const ScalarField phi = relevance_field(task, w, grid, g);
  const ScalarField c = constraint_field(task, w, grid);
  const ScalarField e = environment_field(w, grid);
  return compose_tsum(phi, c, e, weights, u_max);
}

}  // namespace guide::tsum
