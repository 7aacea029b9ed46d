#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "dlfd/dataset.hpp"
#include "dlfd/linalg.hpp"

namespace dlfd {

/// Planar needle insertion into a mass-spring tissue block. The block spans
/// x in [-width/2, width/2], y in [-height, 0]; its bottom row is fixed and the
/// second-to-last top node is held by the manipulating arm. The needle is a
/// semicircle swept through the block at a constant angular rate.
struct SimConfig {
  std::size_t rows = 8;
  std::size_t cols = 8;
  double width = 0.04;
  double height = 0.02;
  double stiffness = 20.0;
  double damping = 2.0;
  double node_mass = 0.01;
  double dt = 0.01;
  std::size_t substeps = 5;  // physics steps per recorded step
  double needle_radius = 0.01;
  Eigen::Vector2d entry_point{-0.01, 0.0};
  /// Rest-frame location of the exit mark on the tissue surface. When unset
  /// it is drawn from the seed around the needle's nominal exit.
  std::optional<Eigen::Vector2d> target_exit;
  double target_offset_min = 0.001;
  double target_offset_max = 0.003;
  double drag_coefficient = 3.0;
  double drag_radius = 0.004;
  double expert_gain = 1.25;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  std::size_t steps = 140;
  std::size_t markers = 6;

  void validate() const;
};

struct TissueState {
  Eigen::Matrix2Xd node_positions;
  Eigen::Matrix2Xd node_velocities;
  double needle_angle = 0.0;
  Eigen::Vector2d grasp_point = Eigen::Vector2d::Zero();
};

Eigen::Matrix2Xd rest_positions(const SimConfig& cfg);
TissueState rest_state(const SimConfig& cfg);

std::size_t node_index(const SimConfig& cfg, std::size_t row, std::size_t col);
std::size_t grasp_node(const SimConfig& cfg);

/// Needle circle center, placed so the arc enters the undeformed surface at
/// cfg.entry_point.
Eigen::Vector2d needle_center(const SimConfig& cfg);
Eigen::Vector2d needle_tip(const SimConfig& cfg, double angle);
/// Exit of the arc through the undeformed surface.
Eigen::Vector2d nominal_exit(const SimConfig& cfg);
/// Rest-frame target mark (cfg.target_exit or the seeded draw).
Eigen::Vector2d target_rest(const SimConfig& cfg);

/// Height of the deformed top surface at abscissa x (flat beyond the ends).
double surface_height(const TissueState& state, const SimConfig& cfg, double x);
/// Intersection of the arc with the deformed surface on the exit side.
Eigen::Vector2d predicted_exit(const TissueState& state, const SimConfig& cfg);
/// World position of a material point of the surface given its rest abscissa.
Eigen::Vector2d surface_point(const TissueState& state, const SimConfig& cfg, double rest_x);

double total_energy(const TissueState& state, const SimConfig& cfg);

/// Integrates one recorded step: `substeps` semi-implicit Euler steps while the
/// needle angle and grasp point move linearly to the given targets.
void advance(TissueState& state, const SimConfig& cfg, double needle_angle_next,
             const Eigen::Vector2d& grasp_next);

std::size_t feature_dim(const SimConfig& cfg);
/// [tip (2), needle angle, target mark (2), marker displacements (2k), grasp (2)]
Vec extract_features(const TissueState& state, const SimConfig& cfg);

struct SimResult {
  Demonstration demo;
  TissueState final_state;
  Eigen::Vector2d final_exit;
  Eigen::Vector2d final_target;
  double final_exit_error = 0.0;
};

SimResult simulate(const SimConfig& cfg);
Demonstration simulate_demo(const SimConfig& cfg);

}  // namespace dlfd
