#include "dlfd/pipeline.hpp"

#include "dlfd/bagging.hpp"
#include "dlfd/error.hpp"
#include "dlfd/normalizer.hpp"

namespace dlfd {

std::string_view to_string(Partition p) noexcept {
  switch (p) {
    case Partition::fit: return "fit";
    case Partition::val: return "val";
    case Partition::test: return "test";
    case Partition::train: return "train";
    case Partition::all: return "all";
  }
  return "test";
}

Partition partition_from_string(std::string_view name) {
  for (Partition p : {Partition::fit, Partition::val, Partition::test, Partition::train, Partition::all}) {
    if (name == to_string(p)) return p;
  }
  throw Error(ErrorKind::config, "unknown partition '" + std::string(name) + "' (valid: fit, val, test, train, all)");
}

std::vector<SampleSequence> PreparedData::partition(Partition p) const {
  switch (p) {
    case Partition::fit: return fit;
    case Partition::val: return val;
    case Partition::test: return test;
    case Partition::train: {
      auto out = fit;
      out.insert(out.end(), val.begin(), val.end());
      return out;
    }
    case Partition::all: {
      auto out = fit;
      out.insert(out.end(), val.begin(), val.end());
      out.insert(out.end(), test.begin(), test.end());
      return out;
    }
  }
  return test;
}

PreparedData prepare_data(const Dataset& ds, std::size_t window, std::uint64_t split_seed,
                          const FeatureSelection* features) {
  PreparedData out;
  const WindowLayout full = window_layout(ds, window);
  out.split = split_dataset(ds, split_seed);
  const Dataset fit = subset(ds, out.split.fit);
  out.features = features ? *features : varying_features(fit);
  out.fit = select_features(make_windows(fit, window), full, out.features, &out.layout);
  out.val = select_features(make_windows(subset(ds, out.split.val), window), full, out.features, nullptr);
  out.test = select_features(make_windows(subset(ds, out.split.test), window), full, out.features, nullptr);
  return out;
}

TrainOutcome train_on_prepared(const PreparedData& data, const TrainRequest& req) {
  TrainerSpec spec = req.spec;
  spec.layout = data.layout;
  spec.outputs = kActionDim;

  ModelBundle bundle;
  bundle.kind = spec.kind;
  bundle.window = req.window;
  bundle.split_seed = req.split_seed;
  bundle.features = data.features;
  bundle.seed = req.seed;
  bundle.input_normalizer = fit_input_normalizer(data.fit);
  bundle.target_scaler = fit_target_scaler(data.fit);
  const auto fit = normalize(data.fit, bundle.input_normalizer, bundle.target_scaler);

  TrainOutcome out;
  bundle.ensemble.z_value = req.z_value;
  if (req.ensemble_size > 0) {
    EnsembleFit ens = fit_ensemble(spec, fit, req.ensemble_size, req.seed, req.workers, req.z_value);
    bundle.is_ensemble = true;
    bundle.ensemble = std::move(ens.ensemble);
    out.logs = std::move(ens.logs);
  } else {
    TrainedPolicy trained = train_policy(spec, fit, req.seed);
    bundle.ensemble.members.push_back(std::move(trained.policy));
    bundle.ensemble.member_seeds.push_back(req.seed);
    out.logs.push_back(std::move(trained.log));
  }
  out.bundle = std::move(bundle);
  return out;
}

TrainOutcome train_on_dataset(const Dataset& ds, const TrainRequest& req) {
  return train_on_prepared(prepare_data(ds, req.window, req.split_seed), req);
}

Action action_from_prediction(const Vec& v) {
  Action a;
  a.dp = v.head<3>();
  const Eigen::Vector4d q = v.segment<4>(3);
  const double n = q.norm();
  a.q = n > 0 ? Eigen::Vector4d(q / n) : Eigen::Vector4d(1, 0, 0, 0);
  return a;
}

Evaluation evaluate_bundle(const ModelBundle& bundle, const std::vector<SampleSequence>& raw_windows,
                           const std::string& model_name) {
  bundle.ensemble.validate();
  const std::size_t n = total_samples(raw_windows);
  if (n == 0) throw Error(ErrorKind::input, "nothing to evaluate");
  const auto d = static_cast<Eigen::Index>(bundle.target_scaler.size());
  const auto normalized = normalize(raw_windows, bundle.input_normalizer, bundle.target_scaler);

  Mat pred(static_cast<Eigen::Index>(n), d), truth(static_cast<Eigen::Index>(n), d);
  Mat pred_std(static_cast<Eigen::Index>(n), d), truth_std(static_cast<Eigen::Index>(n), d);
  Evaluation out;
  out.trajectories.reserve(n);
  double pose_sum = 0;
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < raw_windows.size(); ++s) {
    const auto predictions = bundle.ensemble.predict_sequence_with_ci(normalized[s]);
    for (std::size_t k = 0; k < predictions.size(); ++k, ++row) {
      const auto& raw = raw_windows[s].samples[k];
      const auto& p = predictions[k];
      pred_std.row(row) = p.mean.transpose();
      truth_std.row(row) = normalized[s].samples[k].target.transpose();
      TrajectoryRow tr;
      tr.demo_id = raw.demo_id;
      tr.t = raw.t;
      tr.truth = raw.target;
      tr.prediction = bundle.target_scaler.invert(p.mean);
      tr.ci_low = bundle.target_scaler.invert(p.ci_low);
      tr.ci_high = bundle.target_scaler.invert(p.ci_high);
      pred.row(row) = tr.prediction.transpose();
      truth.row(row) = tr.truth.transpose();
      pose_sum += pose_error(action_from_prediction(tr.prediction), Action::from_vector(tr.truth));
      out.trajectories.push_back(std::move(tr));
    }
  }
  out.report = regression_metrics(pred, truth);
  out.report.model_name = model_name;
  out.report.pose_error_mean = pose_sum / static_cast<double>(n);
  out.report.standardized = regression_metrics(pred_std, truth_std).stats;
  return out;
}

}  // namespace dlfd
