#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlfd/dataset.hpp"
#include "dlfd/metrics.hpp"
#include "dlfd/model_io.hpp"
#include "dlfd/policy.hpp"

namespace dlfd {

enum class Partition { fit, val, test, train, all };  // train = fit + val

std::string_view to_string(Partition p) noexcept;
Partition partition_from_string(std::string_view name);

/// Raw (unnormalized) windows for each partition of a seeded split, reduced
/// to the selected input features.
struct PreparedData {
  WindowLayout layout;
  FeatureSelection features;
  DatasetSplit split;
  std::vector<SampleSequence> fit;
  std::vector<SampleSequence> val;
  std::vector<SampleSequence> test;

  std::vector<SampleSequence> partition(Partition p) const;
};

/// Without `features`, keeps the features that vary over the fit partition.
PreparedData prepare_data(const Dataset& ds, std::size_t window, std::uint64_t split_seed,
                          const FeatureSelection* features = nullptr);

struct TrainRequest {
  TrainerSpec spec;  // layout and outputs are filled from the data
  std::size_t window = 3;
  std::size_t ensemble_size = 0;  // 0 trains a single model
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::size_t workers = 1;
  double z_value = 1.96;
};

struct TrainOutcome {
  ModelBundle bundle;
  std::vector<TrainingLog> logs;  // one per member
};

/// Split, window, standardize inputs and targets on the fit partition, train.
TrainOutcome train_on_dataset(const Dataset& ds, const TrainRequest& req);
/// Same, on already prepared windows.
TrainOutcome train_on_prepared(const PreparedData& data, const TrainRequest& req);

struct Evaluation {
  MetricsReport report;
  std::vector<TrajectoryRow> trajectories;  // physical units
};

/// Metrics in physical units, with standardized-unit metrics attached.
Evaluation evaluate_bundle(const ModelBundle& bundle, const std::vector<SampleSequence>& raw_windows,
                           const std::string& model_name);

/// Rescales the quaternion part of a predicted action to unit norm
/// (identity when it is zero).
Action action_from_prediction(const Vec& v);

}  // namespace dlfd
