#include "masked_irl/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "masked_irl/errors.hpp"

namespace masked_irl {

namespace {

constexpr int kMaxRejections = 1000;

Eigen::Vector3d position_of(const StateVector& s) {
  return {s[layout::kEefX], s[layout::kEefY], s[layout::kEefZ]};
}

Eigen::Matrix3d rotation_of(const StateVector& s) { return unpack_state(s).eef_rotation; }

StateVector with_pose(const EnvironmentConfig& config, const Eigen::Vector3d& p,
                      const Eigen::Matrix3d& r) {
  StateVector s;
  s[layout::kEefX] = p.x();
  s[layout::kEefY] = p.y();
  s[layout::kEefZ] = p.z();
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) s[layout::rotation(row, col)] = r(row, col);
  }
  config.stamp(s);
  return s;
}

Eigen::Vector3d random_unit(Rng& rng) {
  // Normalized Gaussian vector is uniform on the sphere.
  Eigen::Vector3d v;
  do {
    v = {rng.normal(), rng.normal(), rng.normal()};
  } while (v.norm() < 1e-12);
  return v.normalized();
}

Box eef_region(const EnvironmentConfig& config) {
  Box region = config.workspace;
  region.min.z = std::max(region.min.z, config.table_z);
  return region;
}

bool inside(const Box& box, const Eigen::Vector3d& p) { return box.contains({p.x(), p.y(), p.z()}); }

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& r) {
  return Eigen::Quaterniond(r).normalized().toRotationMatrix();
}

}  // namespace

std::size_t TrajectoryBank::trajectory_count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.trajectories.size();
  return n;
}

const TrajectoryGroup& TrajectoryBank::group(int config_id, int pair_id) const {
  for (const auto& g : groups) {
    if (g.config_id == config_id && g.pair_id == pair_id) return g;
  }
  throw ValidationError("no trajectory group for config " + std::to_string(config_id) +
                        ", pair " + std::to_string(pair_id));
}

Eigen::Matrix3d upright_rotation() {
  Eigen::Matrix3d r;
  r << 0, 0, -1,
       0, 1, 0,
       1, 0, 0;
  return r;
}

EnvironmentConfig sample_config(Rng& rng, const SceneLimits& limits) {
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    EnvironmentConfig config;
    config.workspace = limits.workspace;
    config.table_z = rng.uniform(limits.table_z_min, limits.table_z_max);

    const double laptop_extent = limits.table_half_extent - limits.laptop_margin;
    config.laptop = {rng.uniform(-laptop_extent, laptop_extent),
                     rng.uniform(-laptop_extent, laptop_extent), config.table_z};

    // Human stands beside one of the four table edges.
    const std::size_t side = rng.index(4);
    const double along = rng.uniform(-limits.table_half_extent, limits.table_half_extent);
    const double away = rng.uniform(limits.table_half_extent + 0.05, limits.workspace.max.x - 0.05);
    const double height = rng.uniform(limits.human_z_min, limits.human_z_max);
    switch (side) {
      case 0: config.human = {away, along, height}; break;
      case 1: config.human = {-away, along, height}; break;
      case 2: config.human = {along, away, height}; break;
      default: config.human = {along, -away, height}; break;
    }

    const double dx = config.human.x - config.laptop.x;
    const double dy = config.human.y - config.laptop.y;
    if (std::hypot(dx, dy) < limits.min_laptop_human_xy) continue;
    if (!config.workspace.contains(config.human) || !config.workspace.contains(config.laptop)) continue;
    return config;
  }
  throw GenerationError("sample_config: constraints not met after 1000 rejections");
}

StateVector sample_endpoint(Rng& rng, const EnvironmentConfig& config, const SceneLimits& limits) {
  const Box& ws = config.workspace;
  const Eigen::Vector3d p{rng.uniform(ws.min.x, ws.max.x), rng.uniform(ws.min.y, ws.max.y),
                          rng.uniform(config.table_z + limits.start_goal_clearance, ws.max.z)};
  const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
  const double tilt_axis = rng.uniform(-std::numbers::pi, std::numbers::pi);
  const double tilt = rng.uniform(0.0, limits.max_start_goal_tilt);
  const Eigen::Matrix3d r =
      (Eigen::AngleAxisd(tilt, Eigen::Vector3d(std::cos(tilt_axis), std::sin(tilt_axis), 0.0)) *
       Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()))
          .toRotationMatrix() *
      upright_rotation();
  return with_pose(config, p, orthonormalize(r));
}

Trajectory shortest_path(const EnvironmentConfig& config, const StateVector& start,
                         const StateVector& goal) {
  const Box region = eef_region(config);
  const Eigen::Vector3d p0 = position_of(start);
  const Eigen::Vector3d p1 = position_of(goal);
  if (!inside(region, p0)) throw ValidationError("shortest_path: start outside workspace");
  if (!inside(region, p1)) throw ValidationError("shortest_path: goal outside workspace");
  const Eigen::Matrix3d r0 = rotation_of(start);
  const Eigen::Matrix3d r1 = rotation_of(goal);
  if (const auto d = rotation_defect(r0); !d.empty()) throw ValidationError("shortest_path start: " + d);
  if (const auto d = rotation_defect(r1); !d.empty()) throw ValidationError("shortest_path goal: " + d);

  const Eigen::Quaterniond q0(r0);
  const Eigen::Quaterniond q1(r1);
  const bool same_rotation = r0 == r1;

  Trajectory::States states;
  states.front() = start;
  states.back() = goal;
  config.stamp(states.front());
  config.stamp(states.back());
  for (int t = 1; t < kTrajectoryLength - 1; ++t) {
    const double s = static_cast<double>(t) / (kTrajectoryLength - 1);
    const Eigen::Vector3d p = p0 + s * (p1 - p0);
    const Eigen::Matrix3d r = same_rotation ? r0 : q0.slerp(s, q1).normalized().toRotationMatrix();
    states[static_cast<std::size_t>(t)] = with_pose(config, p, r);
  }
  return Trajectory(states, config);
}

Trajectory perturb_trajectory(const Trajectory& reference, const PerturbationSpec& spec, Rng& rng) {
  constexpr int kLast = kTrajectoryLength - 1;

  std::vector<Eigen::Vector3d> offsets(kTrajectoryLength, Eigen::Vector3d::Zero());
  for (int b = 0; b < spec.bump_count; ++b) {
    const double width = rng.uniform(0.4, 1.0);
    const double center = rng.uniform(width / 2.0, 1.0 - width / 2.0);
    const double amplitude = rng.uniform(0.0, spec.amplitude);
    const Eigen::Vector3d direction = random_unit(rng);
    for (int t = 1; t < kLast; ++t) {
      const double u = static_cast<double>(t) / kLast;
      const double phase = (u - (center - width / 2.0)) / width;
      if (phase <= 0.0 || phase >= 1.0) continue;
      offsets[static_cast<std::size_t>(t)] += amplitude * std::sin(std::numbers::pi * phase) * direction;
    }
  }

  const Eigen::Vector3d spin_axis = random_unit(rng);
  const double spin_angle = rng.uniform(0.0, spec.rotation_noise);

  // Largest uniform scale in [0, 1] that keeps every waypoint in the region.
  const Box region = eef_region(reference.config());
  const Eigen::Vector3d lo{region.min.x, region.min.y, region.min.z};
  const Eigen::Vector3d hi{region.max.x, region.max.y, region.max.z};
  double scale = 1.0;
  for (int t = 1; t < kLast; ++t) {
    const Eigen::Vector3d p = position_of(reference[t]);
    const Eigen::Vector3d& d = offsets[static_cast<std::size_t>(t)];
    for (int k = 0; k < 3; ++k) {
      if (d(k) > 0.0 && p(k) + d(k) > hi(k)) scale = std::min(scale, (hi(k) - p(k)) / d(k));
      if (d(k) < 0.0 && p(k) + d(k) < lo(k)) scale = std::min(scale, (lo(k) - p(k)) / d(k));
    }
  }
  scale = std::max(scale, 0.0);

  Trajectory::States states = reference.states();
  for (int t = 1; t < kLast; ++t) {
    const double u = static_cast<double>(t) / kLast;
    Eigen::Vector3d p = position_of(reference[t]) + scale * offsets[static_cast<std::size_t>(t)];
    // Guard against rounding at the boundary.
    for (int k = 0; k < 3; ++k) p(k) = std::clamp(p(k), lo(k), hi(k));
    Eigen::Matrix3d r = rotation_of(reference[t]);
    const double angle = spin_angle * std::sin(std::numbers::pi * u);
    if (angle != 0.0) r = orthonormalize(Eigen::AngleAxisd(angle, spin_axis).toRotationMatrix() * r);
    states[static_cast<std::size_t>(t)] = with_pose(reference.config(), p, r);
  }
  return Trajectory(states, reference.config());
}

TrajectoryBank build_bank(int configs, int pairs, int perturbed, const PerturbationSpec& spec,
                          Rng& rng, Split split, const SceneLimits& limits) {
  if (configs < 1 || pairs < 1 || perturbed < 0) {
    throw GenerationError("build_bank: need configs >= 1, pairs >= 1, perturbed >= 0");
  }
  const std::uint64_t master = rng.next_u64();
  TrajectoryBank bank;
  bank.split = split;
  for (int c = 0; c < configs; ++c) {
    Rng local(derive_seed(master, static_cast<std::uint64_t>(c)));
    const EnvironmentConfig config = sample_config(local, limits);
    bank.configs.push_back(config);
    for (int pair = 0; pair < pairs; ++pair) {
      StateVector start;
      StateVector goal;
      int attempt = 0;
      do {
        if (++attempt > kMaxRejections) {
          throw GenerationError("build_bank: could not place a start-goal pair");
        }
        start = sample_endpoint(local, config, limits);
        goal = sample_endpoint(local, config, limits);
      } while ((position_of(start) - position_of(goal)).norm() < limits.min_start_goal_distance);

      TrajectoryGroup group;
      group.config_id = c;
      group.pair_id = pair;
      group.trajectories.push_back(shortest_path(config, start, goal));
      for (int k = 0; k < perturbed; ++k) {
        group.trajectories.push_back(perturb_trajectory(group.reference(), spec, local));
      }
      bank.groups.push_back(std::move(group));
    }
  }
  return bank;
}

}  // namespace masked_irl
