#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "guide/grounding.hpp"
#include "guide/taskspec.hpp"
#include "guide/world.hpp"

namespace guide::tsum {

struct GridSpec {
  double origin_x = 0, origin_y = 0;
  double resolution = 1.0;  // meters per cell
  int width = 64, height = 64;

  bool operator==(const GridSpec&) const = default;
  Vec2 node(int ix, int iy) const {
    return {origin_x + ix * resolution, origin_y + iy * resolution};
  }
  static GridSpec covering(const world::Bounds& b, double resolution);
};

class GridMismatch : public std::runtime_error {
 public:
  GridMismatch() : std::runtime_error("scalar fields disagree on grid spec") {}
};
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& m) : std::runtime_error(m) {}
};
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& m) : std::runtime_error(m) {}
};

// Scalar field over a grid, values in [0,1], row-major (index = iy*width+ix).
struct ScalarField {
  GridSpec grid;
  std::vector<double> values;

  double& at(int ix, int iy) { return values[static_cast<std::size_t>(iy) * grid.width + ix]; }
  double at(int ix, int iy) const {
    return values[static_cast<std::size_t>(iy) * grid.width + ix];
  }
  static ScalarField constant(const GridSpec& g, double v);
};

struct TsumWeights {
  double w_phi = 0.5, w_c = 0.3, w_e = 0.2;

  // normalizes to sum 1; throws std::invalid_argument on a nonpositive sum
  TsumWeights(double phi, double c, double e);
  TsumWeights() = default;
};

struct Tsum {
  ScalarField field;    // normalized acceptable uncertainty U in [0,1]
  double u_max = 5.0;   // meters; denormalization scale

  double median() const;  // median of the node values
};

// Phi(l) = 1 - sum_i alpha_i(l) * g_i(l) * priority_i over the task's
// subtasks, where g_i is a Gaussian footprint with sigma equal to the
// referent region radius.
ScalarField relevance_field(const taskspec::ParsedTask& task, const world::WorldConfig& w,
                            const GridSpec& grid, const grounding::GroundingParams& g);

// C(l) = clamp(d_c(l) / D_c, 0, 1) with d_c the signed distance to the
// nearest constraint boundary inflated by its margin; D_c defaults to 10 m.
ScalarField constraint_field(const taskspec::ParsedTask& task, const world::WorldConfig& w,
                             const GridSpec& grid, double taper = 10.0);

// E(l) = clamp(1 - 0.5*chat - 0.5*ohat, 0, 1); chat is normalized current
// magnitude, ohat the occupied fraction of a 10 m disc around l.
ScalarField environment_field(const world::WorldConfig& w, const GridSpec& grid,
                              double density_radius = 10.0);

Tsum compose_tsum(const ScalarField& phi, const ScalarField& c, const ScalarField& e,
                  const TsumWeights& w, double u_max = 5.0);

// bilinear interpolation with boundary clamping
double query_tsum(const Tsum& t, double x, double y);

void save_tsum(const Tsum& t, const std::string& path);
Tsum load_tsum(const std::string& path);

// PGM P2 heatmap plus a JSON sidecar carrying {min,max} for de-quantization.
void export_pgm(const ScalarField& f, const std::string& path);

// Convenience: build all three fields for a task and compose them.
Tsum build_tsum(const taskspec::ParsedTask& task, const world::WorldConfig& w,
                const GridSpec& grid, const grounding::GroundingParams& g,
                const TsumWeights& weights, double u_max = 5.0);

}  // namespace guide::tsum
