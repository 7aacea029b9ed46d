#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "dlfd/baselines.hpp"
#include "dlfd/ekf.hpp"
#include "dlfd/rmlp.hpp"
#include "dlfd/samples.hpp"

namespace dlfd {

enum class ModelKind { kf_rmlp, feedforward, rnn, gru, lstm };

std::string_view to_string(ModelKind kind) noexcept;
/// Throws a configuration error listing the valid names.
ModelKind model_kind_from_string(std::string_view name);
CellKind cell_kind_of(ModelKind kind);

/// A trained model of any kind, predicting in the space it was trained in.
class Policy {
 public:
  explicit Policy(RmlpNetwork net) : model_(std::move(net)) {}
  explicit Policy(BaselineModel model) : model_(std::move(model)) {}

  ModelKind kind() const;
  std::size_t input_size() const;
  std::size_t output_size() const;

  /// Predictions for every sample of a demonstration. The KF-RMLP carries its
  /// recurrent state through the sequence from a zero state; baselines treat
  /// each window independently.
  std::vector<Vec> predict_sequence(const SampleSequence& seq) const;

  /// Single-window prediction. For the KF-RMLP this starts from a zero state.
  Vec predict_window(const Vec& window) const;

  const RmlpNetwork* rmlp() const { return std::get_if<RmlpNetwork>(&model_); }
  const BaselineModel* baseline() const { return std::get_if<BaselineModel>(&model_); }

 private:
  std::variant<RmlpNetwork, BaselineModel> model_;
};

/// Everything needed to train one model from windowed data.
struct TrainerSpec {
  ModelKind kind = ModelKind::kf_rmlp;
  WindowLayout layout;
  std::size_t outputs = 7;
  std::size_t hidden = 16;
  double init_std = 0.05;
  /// Jacobian truncation for the KF-RMLP; 0 means "use the window length".
  std::size_t bptt_depth = 0;
  Activation hidden_activation = Activation::tanh;
  EkfConfig ekf;
  OptimConfig optim;

  void validate() const;
};

struct TrainedPolicy {
  Policy policy;
  TrainingLog log;
};

/// Initialises from `seed` and trains. The same seed drives weight
/// initialisation and sample/demo shuffling.
TrainedPolicy train_policy(const TrainerSpec& spec, std::span<const SampleSequence> demos,
                           std::uint64_t seed);

}  // namespace dlfd
