#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "guide/nn.hpp"
#include "guide/taskspec.hpp"
#include "guide/world.hpp"

namespace guide::grounding {

using Embedding = Eigen::VectorXd;

// Raw spatial features for one location; assembled from world geometry.
struct LocationFeatures {
  double x = 0, y = 0;                     // meters
  double dist_to_nearest_obstacle = 0;     // meters, >= 0
  std::vector<double> region_memberships;  // one 0/1 entry per known region
  double disturbance_intensity = 0;        // [0,1]
};

LocationFeatures location_features(const world::WorldConfig& w, const Vec2& p);

// A groundable task element: the DSL kind word plus its referent region.
struct Item {
  std::string kind_word;
  std::string region_id;

  bool operator==(const Item&) const = default;
};

Item item_of(const taskspec::SubTask& st);
Item item_of(const taskspec::Constraint& c);

class EmptyItemList : public std::runtime_error {
 public:
  EmptyItemList() : std::runtime_error("attention over an empty item list") {}
};
class NonFiniteOutput : public std::runtime_error {
 public:
  explicit NonFiniteOutput(const std::string& m) : std::runtime_error(m) {}
};
class InsufficientTriplets : public std::runtime_error {
 public:
  InsufficientTriplets() : std::runtime_error("no valid triplet can be mined") {}
};

struct GroundingParams {
  nn::Mlp<double> loc_mlp;        // scaled features -> d
  Eigen::MatrixXd token_table;    // hashed-token vocabulary x d
  Eigen::VectorXd feature_scale;  // elementwise input normalization
  double attention_temperature = 1.0;

  int dim() const { return loc_mlp.output_width(); }
  int feature_width() const { return loc_mlp.input_width(); }

  static constexpr int kTableSize = 1024;
  static constexpr int kDim = 16;
  static constexpr int kHidden = 32;

  static GroundingParams init(const world::WorldConfig& w, Rng& rng, int d = kDim);
};

std::size_t token_bucket(std::string_view token);

Eigen::VectorXd feature_vector(const LocationFeatures& f);

Embedding embed_location(const LocationFeatures& f, const GroundingParams& p);
Embedding embed_item(const Item& item, const GroundingParams& p);

double triplet_loss(const Embedding& a, const Embedding& pos, const Embedding& neg,
                    double margin);

// softmax of <loc, item_i> / (temperature * sqrt(d))
Eigen::VectorXd attention_weights(const Embedding& loc, const std::vector<Embedding>& items,
                                  double temperature);

struct TrainHp {
  double margin = 0.5;
  double lr = 1e-3;
  int steps = 2000;
  int batch = 64;
  std::uint64_t seed = 0;
};

struct TrainStats {
  double initial_loss = 0;
  double final_loss = 0;
};

GroundingParams train_grounding(const world::WorldConfig& w,
                                const std::vector<taskspec::ParsedTask>& tasks,
                                const TrainHp& hp, TrainStats* stats = nullptr);

void save_grounding(const GroundingParams& p, const std::string& path);
GroundingParams load_grounding(const std::string& path);

}  // namespace guide::grounding
