#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace dlfd {

/// Per-epoch summary. `mean_loss` is the mean over samples of the squared
/// residual norm; `max_abs_residual` the largest residual component seen.
struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double max_abs_residual = 0.0;
};

struct TrainingLog {
  std::vector<EpochStats> epochs;

  /// Comma-separated table with header `epoch,mean_loss,max_abs_residual`.
  void write_csv(const std::filesystem::path& path) const;
  static TrainingLog read_csv(const std::filesystem::path& path);
};

}  // namespace dlfd
