#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dlfd/dataset.hpp"
#include "dlfd/linalg.hpp"

namespace dlfd {

inline constexpr double kDefaultErrorThreshold = 0.01;

/// Error statistics over every element of an (samples x outputs) matrix.
struct ErrorStats {
  double mae = 0;                // maximum absolute error
  double ae = 0;                 // average absolute error
  double loss = 0;               // mean squared error
  double pct_gt_threshold = 0;   // percent of elements with |e| > threshold
  bool operator==(const ErrorStats&) const = default;
};

struct MetricsReport {
  std::string model_name;
  ErrorStats stats;  // physical units
  double threshold = kDefaultErrorThreshold;
  std::optional<double> pose_error_mean;
  std::size_t sample_count = 0;
  /// Same statistics on standardized outputs, when available.
  std::optional<ErrorStats> standardized;
  bool operator==(const MetricsReport&) const = default;
};

/// Rows are samples. Strict `>` for the threshold count.
MetricsReport regression_metrics(const Mat& preds, const Mat& targets, double threshold = kDefaultErrorThreshold);

double quaternion_distance(const Eigen::Vector4d& q1, const Eigen::Vector4d& q2);
/// ||dp_pred - dp_true|| (m) + quaternion_distance (rad), mixed units.
double pose_error(const Action& pred, const Action& truth);

inline constexpr int kReportVersion = 1;
/// Table columns in report files, in order.
const std::vector<std::string>& report_columns();

std::string format_report(const std::vector<MetricsReport>& reports);
std::vector<MetricsReport> parse_report(const std::string& text);
void export_report(const std::vector<MetricsReport>& reports, const std::filesystem::path& path);
std::vector<MetricsReport> load_report(const std::filesystem::path& path);

/// One predicted timestep for trajectory plots. Without an ensemble the CI
/// bounds equal the prediction.
struct TrajectoryRow {
  std::string demo_id;
  std::size_t t = 0;
  Vec truth;
  Vec prediction;
  Vec ci_low;
  Vec ci_high;
};

std::string format_trajectories(const std::vector<TrajectoryRow>& rows);
void export_trajectories(const std::vector<TrajectoryRow>& rows, const std::filesystem::path& path);

}  // namespace dlfd
