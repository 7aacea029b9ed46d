#include "dlfd/tasksim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "dlfd/error.hpp"

namespace dlfd {

namespace {

struct Spring {
  std::size_t a;
  std::size_t b;
  double rest_length;
};

std::vector<Spring> springs(const SimConfig& cfg, const Eigen::Matrix2Xd& rest) {
  std::vector<Spring> out;
  auto add = [&](std::size_t a, std::size_t b) { out.push_back({a, b, (rest.col(a) - rest.col(b)).norm()}); };
  for (std::size_t r = 0; r < cfg.rows; ++r) {
    for (std::size_t c = 0; c < cfg.cols; ++c) {
      const std::size_t i = node_index(cfg, r, c);
      if (c + 1 < cfg.cols) add(i, node_index(cfg, r, c + 1));
      if (r + 1 < cfg.rows) add(i, node_index(cfg, r + 1, c));
      if (c + 1 < cfg.cols && r + 1 < cfg.rows) {
        add(i, node_index(cfg, r + 1, c + 1));
        add(node_index(cfg, r, c + 1), node_index(cfg, r + 1, c));
      }
    }
  }
  return out;
}

// Angle at which the arc crosses the undeformed surface line y = entry.y on the
// entry side.
double entry_angle(const SimConfig& cfg) {
  const double h = needle_center(cfg).y() - cfg.entry_point.y();
  return std::asin(h / cfg.needle_radius);
}

}  // namespace

void SimConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::config, "simulator: " + what);
  };
  require(rows >= 2 && cols >= 2, "grid must be at least 2x2");
  require(width > 0 && height > 0, "tissue size must be positive");
  require(stiffness > 0, "stiffness must be positive");
  require(damping > 0, "damping must be positive");
  require(node_mass > 0, "node mass must be positive");
  require(dt > 0, "dt must be positive");
  require(substeps >= 1, "substeps must be >= 1");
  require(needle_radius > 0, "needle radius must be positive");
  require(steps >= 1, "steps must be >= 1");
  require(expert_gain >= 0, "expert gain must be nonnegative");
  require(noise_std >= 0, "noise std must be nonnegative");
  require(drag_coefficient >= 0 && drag_radius > 0, "needle drag parameters must be positive");
  require(markers <= cols, "more markers than surface nodes");
  require(target_offset_min >= 0 && target_offset_max >= target_offset_min, "target offset range is invalid");
  require(std::abs(entry_point.x()) < width / 2 && entry_point.y() == 0.0, "entry point must lie on the surface");
  require(entry_point.x() + 2 * needle_radius < width / 2, "needle does not fit inside the tissue block");
  require(needle_radius < height, "needle is deeper than the tissue block");
}

std::size_t node_index(const SimConfig& cfg, std::size_t row, std::size_t col) { return row * cfg.cols + col; }

std::size_t grasp_node(const SimConfig& cfg) { return node_index(cfg, cfg.rows - 1, cfg.cols - 2); }

Eigen::Matrix2Xd rest_positions(const SimConfig& cfg) {
  Eigen::Matrix2Xd p(2, static_cast<Eigen::Index>(cfg.rows * cfg.cols));
  const double dx = cfg.width / static_cast<double>(cfg.cols - 1);
  const double dy = cfg.height / static_cast<double>(cfg.rows - 1);
  for (std::size_t r = 0; r < cfg.rows; ++r) {
    for (std::size_t c = 0; c < cfg.cols; ++c) {
      p.col(static_cast<Eigen::Index>(node_index(cfg, r, c))) =
          Eigen::Vector2d(-cfg.width / 2 + dx * static_cast<double>(c), -cfg.height + dy * static_cast<double>(r));
    }
  }
  return p;
}

TissueState rest_state(const SimConfig& cfg) {
  cfg.validate();
  TissueState s;
  s.node_positions = rest_positions(cfg);
  s.node_velocities = Eigen::Matrix2Xd::Zero(2, s.node_positions.cols());
  s.needle_angle = 0.0;
  s.grasp_point = s.node_positions.col(static_cast<Eigen::Index>(grasp_node(cfg)));
  return s;
}

Eigen::Vector2d needle_center(const SimConfig& cfg) {
  // Raised a quarter radius above the surface so the tip starts outside.
  const double h = 0.25 * cfg.needle_radius;
  const double dx = std::sqrt(cfg.needle_radius * cfg.needle_radius - h * h);
  return {cfg.entry_point.x() + dx, cfg.entry_point.y() + h};
}

Eigen::Vector2d needle_tip(const SimConfig& cfg, double angle) {
  return needle_center(cfg) + cfg.needle_radius * Eigen::Vector2d(-std::cos(angle), -std::sin(angle));
}

Eigen::Vector2d nominal_exit(const SimConfig& cfg) {
  return needle_tip(cfg, std::numbers::pi - entry_angle(cfg));
}

Eigen::Vector2d target_rest(const SimConfig& cfg) {
  if (cfg.target_exit) return *cfg.target_exit;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> magnitude(cfg.target_offset_min, cfg.target_offset_max);
  std::bernoulli_distribution side(0.5);
  const double offset = magnitude(rng);
  const Eigen::Vector2d nominal = nominal_exit(cfg);
  return {nominal.x() + (side(rng) ? offset : -offset), 0.0};
}

double surface_height(const TissueState& state, const SimConfig& cfg, double x) {
  const std::size_t top = cfg.rows - 1;
  auto node = [&](std::size_t c) -> Eigen::Vector2d {
    return state.node_positions.col(static_cast<Eigen::Index>(node_index(cfg, top, c)));
  };
  if (x <= node(0).x()) return node(0).y();
  for (std::size_t c = 0; c + 1 < cfg.cols; ++c) {
    const Eigen::Vector2d a = node(c);
    const Eigen::Vector2d b = node(c + 1);
    if (x <= b.x()) {
      const double span = b.x() - a.x();
      const double s = span > 0 ? (x - a.x()) / span : 0.0;
      return a.y() + s * (b.y() - a.y());
    }
  }
  return node(cfg.cols - 1).y();
}

Eigen::Vector2d predicted_exit(const TissueState& state, const SimConfig& cfg) {
  auto gap = [&](double angle) {
    const Eigen::Vector2d tip = needle_tip(cfg, angle);
    return tip.y() - surface_height(state, cfg, tip.x());
  };
  double lo = std::numbers::pi / 2;
  double hi = std::numbers::pi;
  if (gap(lo) >= 0) return needle_tip(cfg, lo);
  if (gap(hi) <= 0) return needle_tip(cfg, hi);
  while (cfg.needle_radius * (hi - lo) > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) < 0 ? lo : hi) = mid;
  }
  return needle_tip(cfg, 0.5 * (lo + hi));
}

Eigen::Vector2d surface_point(const TissueState& state, const SimConfig& cfg, double rest_x) {
  const double dx = cfg.width / static_cast<double>(cfg.cols - 1);
  const double u = (rest_x + cfg.width / 2) / dx;
  const auto c = static_cast<std::size_t>(std::clamp(std::floor(u), 0.0, static_cast<double>(cfg.cols - 2)));
  const double s = u - static_cast<double>(c);
  const std::size_t top = cfg.rows - 1;
  const Eigen::Vector2d a = state.node_positions.col(static_cast<Eigen::Index>(node_index(cfg, top, c)));
  const Eigen::Vector2d b = state.node_positions.col(static_cast<Eigen::Index>(node_index(cfg, top, c + 1)));
  return (1 - s) * a + s * b;
}

double total_energy(const TissueState& state, const SimConfig& cfg) {
  const Eigen::Matrix2Xd rest = rest_positions(cfg);
  double e = 0;
  for (const auto& sp : springs(cfg, rest)) {
    const double stretch = (state.node_positions.col(static_cast<Eigen::Index>(sp.a)) -
                            state.node_positions.col(static_cast<Eigen::Index>(sp.b)))
                               .norm() -
                           sp.rest_length;
    e += 0.5 * cfg.stiffness * stretch * stretch;
  }
  for (std::size_t r = 1; r < cfg.rows; ++r) {
    for (std::size_t c = 0; c < cfg.cols; ++c) {
      const std::size_t i = node_index(cfg, r, c);
      if (i == grasp_node(cfg)) continue;
      e += 0.5 * cfg.node_mass * state.node_velocities.col(static_cast<Eigen::Index>(i)).squaredNorm();
    }
  }
  return e;
}

void advance(TissueState& state, const SimConfig& cfg, double needle_angle_next,
             const Eigen::Vector2d& grasp_next) {
  const Eigen::Matrix2Xd rest = rest_positions(cfg);
  const auto spring_list = springs(cfg, rest);
  const auto n = static_cast<Eigen::Index>(cfg.rows * cfg.cols);
  const auto grasp = static_cast<Eigen::Index>(grasp_node(cfg));
  const double angle0 = state.needle_angle;
  const Eigen::Vector2d grasp0 = state.grasp_point;
  const double steps = static_cast<double>(cfg.substeps);
  const double two_r2 = 2 * cfg.drag_radius * cfg.drag_radius;

  Eigen::Matrix2Xd force(2, n);
  for (std::size_t k = 1; k <= cfg.substeps; ++k) {
    const double f0 = static_cast<double>(k - 1) / steps;
    const double f1 = static_cast<double>(k) / steps;
    const double a0 = angle0 + (needle_angle_next - angle0) * f0;
    const double a1 = angle0 + (needle_angle_next - angle0) * f1;
    const Eigen::Vector2d tip0 = needle_tip(cfg, a0);
    const Eigen::Vector2d tip1 = needle_tip(cfg, a1);
    const Eigen::Vector2d tip_mid = needle_tip(cfg, 0.5 * (a0 + a1));
    const Eigen::Vector2d tip_velocity = (tip1 - tip0) / cfg.dt;
    const bool inside = tip_mid.y() < surface_height(state, cfg, tip_mid.x());

    force.setZero();
    for (const auto& sp : spring_list) {
      const auto a = static_cast<Eigen::Index>(sp.a);
      const auto b = static_cast<Eigen::Index>(sp.b);
      const Eigen::Vector2d d = state.node_positions.col(b) - state.node_positions.col(a);
      const double len = d.norm();
      if (len <= 0) continue;
      const Eigen::Vector2d f = cfg.stiffness * (len - sp.rest_length) / len * d;
      force.col(a) += f;
      force.col(b) -= f;
    }

    for (Eigen::Index i = static_cast<Eigen::Index>(cfg.cols); i < n; ++i) {
      if (i == grasp) continue;
      double coupling = 0;
      if (inside && cfg.drag_coefficient > 0) {
        coupling = cfg.drag_coefficient * std::exp(-(state.node_positions.col(i) - tip_mid).squaredNorm() / two_r2);
      }
      const double h = cfg.dt / cfg.node_mass;
      state.node_velocities.col(i) = (state.node_velocities.col(i) + h * (force.col(i) + coupling * tip_velocity)) /
                                     (1 + h * (cfg.damping + coupling));
      state.node_positions.col(i) += cfg.dt * state.node_velocities.col(i);
    }
    const Eigen::Vector2d g = grasp0 + (grasp_next - grasp0) * f1;
    state.node_velocities.col(grasp) = (g - state.node_positions.col(grasp)) / cfg.dt;
    state.node_positions.col(grasp) = g;
  }
  state.needle_angle = needle_angle_next;
  state.grasp_point = grasp_next;
}

std::size_t feature_dim(const SimConfig& cfg) { return 7 + 2 * cfg.markers; }

Vec extract_features(const TissueState& state, const SimConfig& cfg) {
  const Eigen::Matrix2Xd rest = rest_positions(cfg);
  Vec z(static_cast<Eigen::Index>(feature_dim(cfg)));
  z.segment<2>(0) = needle_tip(cfg, state.needle_angle);
  z[2] = state.needle_angle;
  z.segment<2>(3) = surface_point(state, cfg, target_rest(cfg).x());
  // Markers spread evenly over the top row, corners excluded when possible.
  const std::size_t top = cfg.rows - 1;
  for (std::size_t m = 0; m < cfg.markers; ++m) {
    std::size_t col = cfg.markers == cfg.cols ? m : (m + 1) * (cfg.cols - 1) / (cfg.markers + 1);
    const auto i = static_cast<Eigen::Index>(node_index(cfg, top, col));
    z.segment<2>(static_cast<Eigen::Index>(5 + 2 * m)) = state.node_positions.col(i) - rest.col(i);
  }
  z.tail<2>() = state.grasp_point;
  return z;
}

namespace {

Pose planar_pose(const Eigen::Vector2d& p, double yaw) {
  Pose pose;
  pose.p = Eigen::Vector3d(p.x(), p.y(), 0.0);
  pose.q = Eigen::Vector4d(std::cos(yaw / 2), 0.0, 0.0, std::sin(yaw / 2));
  return pose;
}

}  // namespace

SimResult simulate(const SimConfig& cfg) {
  cfg.validate();
  TissueState state = rest_state(cfg);
  const double mark_x = target_rest(cfg).x();
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, 1.0);

  SimResult result;
  result.demo.demo_id = "seed_" + std::to_string(cfg.seed);
  result.demo.records.reserve(cfg.steps);
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    DemonstrationRecord rec;
    rec.t = t;
    rec.z = extract_features(state, cfg);
    rec.ee_l = planar_pose(state.grasp_point, 0.0);
    rec.ee_r = planar_pose(needle_center(cfg), state.needle_angle);

    const Eigen::Vector2d exit = predicted_exit(state, cfg);
    const Eigen::Vector2d mark = surface_point(state, cfg, mark_x);
    // Lateral correction: dragging the tissue sideways carries the mark onto
    // the exit point; both then sit on the same surface segment.
    Eigen::Vector2d grasp_next = state.grasp_point + Eigen::Vector2d(cfg.expert_gain * (exit.x() - mark.x()), 0.0);
    if (cfg.noise_std > 0) grasp_next.x() += cfg.noise_std * noise(rng);
    const double angle_next = std::numbers::pi * static_cast<double>(t + 1) / static_cast<double>(cfg.steps);
    advance(state, cfg, angle_next, grasp_next);
    if (!all_finite(state.node_positions) || !all_finite(state.node_velocities)) {
      throw Error(ErrorKind::simulation, "tissue integration became unstable at step " + std::to_string(t));
    }

    const Pose next = planar_pose(state.grasp_point, 0.0);
    rec.a.dp = next.p - rec.ee_l.p;
    rec.a.q = next.q;
    result.demo.records.push_back(std::move(rec));
  }
  result.final_state = state;
  result.final_exit = predicted_exit(state, cfg);
  result.final_target = surface_point(state, cfg, mark_x);
  result.final_exit_error = (result.final_exit - result.final_target).norm();
  return result;
}

Demonstration simulate_demo(const SimConfig& cfg) { return simulate(cfg).demo; }

}  // namespace dlfd
