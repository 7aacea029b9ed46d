#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <string_view>
#include <vector>

#include "dlfd/linalg.hpp"

namespace dlfd {

enum class Activation { tanh, logistic, linear };

std::string_view to_string(Activation a) noexcept;
Activation activation_from_string(std::string_view name);

/// Recurrent multilayer perceptron topology.
///
/// `layer_sizes` lists input, hidden and output widths. Hidden layers are
/// numbered 1..layer_sizes.size()-2; any of them may carry an Elman-style
/// self-connection (h_t = phi(W_x x + W_h h_{t-1} + b)). The output layer is
/// always linear.
struct RmlpConfig {
  std::vector<std::size_t> layer_sizes;
  Activation hidden_activation = Activation::tanh;
  Activation output_activation = Activation::linear;
  std::set<std::size_t> recurrent_layers;
  std::size_t bptt_depth = 3;
  double init_std = 0.05;
  std::uint64_t seed = 0;

  /// [inputs, hidden, outputs] with recurrence on the hidden layer.
  static RmlpConfig elman(std::size_t inputs, std::size_t hidden, std::size_t outputs);

  void validate() const;
  std::size_t num_weights() const;
};

/// Inputs and incoming recurrent activations of one past step, kept so the
/// Jacobian can be recomputed through time.
struct RecurrentSnapshot {
  Vec input;
  std::vector<Vec> activations_before;
};

struct RecurrentState {
  /// Previous-step activations, one per recurrent layer in ascending layer order.
  std::vector<Vec> activations;
  /// Oldest first. Holds at most bptt_depth - 1 entries: together with the
  /// current input that spans bptt_depth steps.
  std::deque<RecurrentSnapshot> history;
};

class RmlpNetwork;

struct StepOutput {
  Vec output;
  RecurrentState next_state;
};

/// Weight packing, per layer in order: input weights (fan_out x fan_in,
/// row-major), recurrent weights (width x width, row-major, recurrent layers
/// only), bias (fan_out).
class RmlpNetwork {
 public:
  /// Zero weights. Use init_network for the random initialisation.
  explicit RmlpNetwork(RmlpConfig config);
  RmlpNetwork(RmlpConfig config, Vec weights);

  const RmlpConfig& config() const noexcept { return config_; }
  std::size_t num_weights() const noexcept { return static_cast<std::size_t>(weights_.size()); }
  std::size_t input_size() const noexcept { return config_.layer_sizes.front(); }
  std::size_t output_size() const noexcept { return config_.layer_sizes.back(); }
  bool is_recurrent() const noexcept { return !config_.recurrent_layers.empty(); }

  const Vec& weights() const noexcept { return weights_; }
  /// Copy with replaced weights. Throws shape/input errors on bad vectors.
  RmlpNetwork with_weights(Vec weights) const;

  RecurrentState zero_state() const;

  StepOutput forward_step(const RecurrentState& state, const Vec& input) const;

  /// d(output_j)/d(weight_i) as an (n_w x n_y) matrix, by backpropagation
  /// through the stored history truncated at bptt_depth steps. The window is
  /// replayed with the current weights starting from the activations recorded
  /// at its first step.
  Mat output_jacobian(const RecurrentState& state, const Vec& input) const;

  struct LayerSlots {
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    std::size_t input_offset = 0;
    std::optional<std::size_t> recurrent_offset;
    std::optional<std::size_t> recurrent_slot;  // index into RecurrentState::activations
    std::size_t bias_offset = 0;
  };
  const std::vector<LayerSlots>& layers() const noexcept { return layers_; }

 private:
  void check_state(const RecurrentState& state) const;
  void check_input(const Vec& input) const;

  RmlpConfig config_;
  std::vector<LayerSlots> layers_;
  Vec weights_;
};

/// Weights drawn i.i.d. from Normal(0, init_std^2) with the config's seed.
RmlpNetwork init_network(const RmlpConfig& config);

}  // namespace dlfd
