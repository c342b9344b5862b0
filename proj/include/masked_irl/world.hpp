#pragma once

#include <cstdint>
#include <vector>

#include "masked_irl/core.hpp"
#include "masked_irl/rng.hpp"

namespace masked_irl {

/// Desk-scale scene geometry. All lengths in meters.
struct SceneLimits {
  Box workspace{{-0.8, -0.8, 0.0}, {0.8, 0.8, 1.6}};
  double table_half_extent = 0.5;   // table top covers |x|, |y| <= this
  double table_z_min = 0.6;
  double table_z_max = 0.8;
  double laptop_margin = 0.1;       // laptop stays this far inside the table edge
  double human_z_min = 1.0;         // torso reference height
  double human_z_max = 1.15;
  double min_laptop_human_xy = 0.3;
  double start_goal_clearance = 0.05;  // above the table surface
  double min_start_goal_distance = 0.3;
  double max_start_goal_tilt = 0.5;    // radians away from upright
};

struct PerturbationSpec {
  int bump_count = 3;
  double amplitude = 0.25;        // m, per-bump upper bound
  double rotation_noise = 0.2;    // rad
  std::uint64_t seed = 0;
};

enum class Split { kTrain, kTest };

/// All trajectories sharing one (config, start-goal pair). Index 0 is the
/// shortest-path reference; 1..K are perturbations of it.
struct TrajectoryGroup {
  int config_id = 0;
  int pair_id = 0;
  std::vector<Trajectory> trajectories;

  const Trajectory& reference() const { return trajectories.front(); }
};

struct TrajectoryBank {
  Split split = Split::kTrain;
  std::vector<EnvironmentConfig> configs;
  std::vector<TrajectoryGroup> groups;  // config-major, pair-minor

  std::size_t trajectory_count() const;
  const TrajectoryGroup& group(int config_id, int pair_id) const;
};

/// Rotation taking the end-effector local x-axis to world +z.
Eigen::Matrix3d upright_rotation();

EnvironmentConfig sample_config(Rng& rng, const SceneLimits& limits = {});

/// Samples a start or goal end-effector state for `config`.
StateVector sample_endpoint(Rng& rng, const EnvironmentConfig& config,
                            const SceneLimits& limits = {});

/// Linear position interpolation and slerp rotation interpolation over 21
/// waypoints. Throws ValidationError if either endpoint leaves the workspace.
Trajectory shortest_path(const EnvironmentConfig& config, const StateVector& start,
                         const StateVector& goal);

/// Adds endpoint-vanishing half-sine bumps to positions and a smooth small
/// rotation to orientations. If the bumped path would leave the workspace,
/// the whole offset is scaled down until it fits.
Trajectory perturb_trajectory(const Trajectory& reference, const PerturbationSpec& spec,
                              Rng& rng);

/// Generates `configs` environments with `pairs` start-goal pairs each and
/// `perturbed` perturbations per pair. One master seed is drawn from `rng`;
/// config i then draws from its own stream derive_seed(master, i), so the
/// result does not depend on generation order.
TrajectoryBank build_bank(int configs, int pairs, int perturbed, const PerturbationSpec& spec,
                          Rng& rng, Split split = Split::kTrain,
                          const SceneLimits& limits = {});

}  // namespace masked_irl
