#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "guide/taskspec.hpp"
#include "guide/tsum.hpp"
#include "guide/world.hpp"

namespace guide::envsim {

struct TrueState {
  double x = 0, y = 0;
  double heading = 0;  // wrapped to (-pi, pi]
  double v = 0;        // m/s, >= 0
  Vec2 pos() const { return {x, y}; }
};

struct BeliefState {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();  // x, y, heading
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  Vec2 pos() const { return {mean[0], mean[1]}; }
};

// All components live in [-1,1]; step() clamps. gps_logit > 0 buys a fix.
struct SimAction {
  double surge = 0;
  double yaw = 0;
  double gps_logit = -1;
};

enum class DoneReason { None, Success, Collision, OutOfBounds, Timeout, ZoneViolation };

const char* to_string(DoneReason r);

class SteppedDoneEpisode : public std::runtime_error {
 public:
  SteppedDoneEpisode() : std::runtime_error("step() called on a finished episode") {}
};
class NoValidSpawn : public std::runtime_error {
 public:
  NoValidSpawn() : std::runtime_error("no collision-free spawn found in 1000 samples") {}
};

struct EpisodeState {
  TrueState true_state;
  BeliefState belief;
  taskspec::ParsedTask task;
  const tsum::Tsum* map = nullptr;  // not owned; may be null for map-free rollouts
  int subtask_cursor = 0;
  int waypoint_cursor = 0;
  std::vector<Vec2> waypoints;  // current patrol loop, empty otherwise
  double prev_target_dist = 0;  // belief distance to target after the last step
  int steps = 0;
  DoneReason done_reason = DoneReason::None;

  bool done() const { return done_reason != DoneReason::None; }
  // goal center or active patrol waypoint of the current subtask
  Vec2 target_point(const world::WorldConfig& w) const;
};

struct StepInfo {
  double task_reward = 0;  // shaping + bonus
  double shaping = 0;
  double bonus = 0;
  double step_cost = 0;
  double gps_cost = 0;
  double collision_cost = 0;
  bool gps_used = false;
  bool arrived = false;  // a goal or waypoint was reached this step
  DoneReason done_reason = DoneReason::None;
};

struct StepResult {
  double reward = 0;
  bool done = false;
  StepInfo info;
};

EpisodeState reset(const world::WorldConfig& w, const taskspec::ParsedTask& task,
                   const tsum::Tsum* map, std::uint64_t seed);

StepResult step(EpisodeState& es, const SimAction& a, const world::WorldConfig& w, Rng& rng);

// EKF time update through the noise-free unicycle model. Dead reckoning does
// not model the water current, so sustained currents show up as belief-truth
// divergence rather than covariance growth.
BeliefState ekf_predict(const BeliefState& b, const SimAction& a, double v_prev,
                        const world::WorldConfig& w);

// Joseph-form position update with H = [I2 0], R = sigma_gps^2 * I2.
BeliefState gps_update(const BeliefState& b, const Vec2& z, double sigma_gps);

// u(s) = sqrt of the position-covariance trace, meters.
double uncertainty_scalar(const BeliefState& b);

// Applies shaping, arrival bonuses, cursor advancement, Success and
// constraint violations. Mutates cursor/waypoints/prev_target_dist and
// done_reason; returns the task reward for this step.
double task_reward(EpisodeState& es, const world::WorldConfig& w);

// signed distance to the nearest constraint boundary inflated by its margin
double constraint_surface_distance(const taskspec::ParsedTask& task,
                                   const world::WorldConfig& w, const Vec2& p);

}  // namespace guide::envsim
