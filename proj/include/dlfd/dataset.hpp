#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dlfd/linalg.hpp"
#include "dlfd/samples.hpp"

namespace dlfd {

/// Unit quaternions are stored (w, x, y, z).
struct Pose {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector4d q{1.0, 0.0, 0.0, 0.0};

  bool operator==(const Pose&) const = default;
};

/// Action of the manipulating arm: position increment and the orientation
/// it reaches at t+1.
struct Action {
  Eigen::Vector3d dp = Eigen::Vector3d::Zero();
  Eigen::Vector4d q{1.0, 0.0, 0.0, 0.0};

  Vec to_vector() const;
  static Action from_vector(const Vec& v);
  bool operator==(const Action&) const = default;
};

inline constexpr std::size_t kStateDim = 14;
inline constexpr std::size_t kActionDim = 7;
inline constexpr std::size_t kCalibDim = 12;
inline constexpr double kUnitQuaternionTolerance = 1e-9;

using CalibBlock = std::array<double, kCalibDim>;

struct DemonstrationRecord {
  std::size_t t = 0;
  Vec z;        // latent feature vector
  Pose ee_l;    // manipulating arm
  Pose ee_r;    // needle-driving arm
  Action a;
  std::optional<std::array<double, 6>> theta_l;
  std::optional<std::array<double, 6>> theta_r;
  std::optional<std::array<double, 12>> g;  // 2D tracked target, 2 x 6 cameras, row-major
  std::optional<std::array<double, 3>> h;

  /// [p_l, q_l, p_r, q_r]
  Vec state_vector() const;
  bool operator==(const DemonstrationRecord& o) const;
};

struct Demonstration {
  std::string demo_id;
  std::vector<DemonstrationRecord> records;
  std::vector<CalibBlock> calib;  // one 3x4 extrinsic block per camera, row-major

  /// Nonempty, t = 0,1,2,... strictly increasing from 0, constant z width,
  /// unit quaternions, optional fields present in all records or none.
  void validate() const;
  bool operator==(const Demonstration&) const = default;
};

struct Dataset {
  std::vector<Demonstration> demos;
  bool operator==(const Dataset&) const = default;
};

/// Reads a directory of `<demo_id>.csv` files (sorted by name) or a single
/// file. A `<demo_id>.calib` sidecar supplies calibration blocks.
Dataset load_dataset(const std::filesystem::path& path);
Demonstration load_demonstration(const std::filesystem::path& file);

/// Writes one file per demonstration into `dir` (created if missing).
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
std::string format_demonstration(const Demonstration& demo);

/// Demonstration-level partition by index into Dataset::demos.
struct DatasetSplit {
  std::vector<std::size_t> fit;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded shuffle; floor(20%) to test, then floor(30%) of the remainder to
/// validation, the rest to fit. Each partition is sorted ascending.
DatasetSplit split_dataset(const Dataset& ds, std::uint64_t seed);
Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices);

/// Layout of windows over this dataset for memory window `n`.
WindowLayout window_layout(const Dataset& ds, std::size_t n);

/// Windowed samples per demonstration. For a demo of length T emits targets
/// a_N .. a_{T-1}; sample t has input [z_{t-N}, s_{t-N}, ..., z_{t-1},
/// s_{t-1}, calib].
std::vector<SampleSequence> make_windows(const Dataset& ds, std::size_t n);

/// Input features kept for modelling: indices into the per-step block
/// [z, s] and into the static calibration block.
struct FeatureSelection {
  std::vector<std::size_t> step;
  std::vector<std::size_t> fixed;
  bool operator==(const FeatureSelection&) const = default;
};

/// Features whose value is not identical across every record of `ds`.
/// Constant features carry no information and are dropped from model inputs.
FeatureSelection varying_features(const Dataset& ds);

/// Keeps only the selected features in every window; `layout` describes the
/// incoming windows. Returns the reduced layout through `reduced`.
std::vector<SampleSequence> select_features(const std::vector<SampleSequence>& seqs, const WindowLayout& layout,
                                            const FeatureSelection& sel, WindowLayout* reduced);

}  // namespace dlfd
