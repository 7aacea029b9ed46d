#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "dlfd/linalg.hpp"
#include "dlfd/samples.hpp"
#include "dlfd/training_log.hpp"

namespace dlfd {

enum class CellKind { feedforward, simple_rnn, gru, lstm };

std::string_view to_string(CellKind kind) noexcept;
CellKind cell_kind_from_string(std::string_view name);

/// Adam with an L1 penalty on every weight.
struct OptimConfig {
  double learning_rate = 1e-3;
  double l1_lambda = 0.1;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-7;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Gradient-trained regressor over a flattened window.
///
/// feedforward: layer_sizes = [flat window, hidden..., outputs], tanh hidden
/// layers and a linear head over the whole flattened window.
/// simple_rnn / gru / lstm: layer_sizes = [step input, hidden, outputs]. The
/// cell runs over the window's steps from a zero state and a linear head reads
/// the last hidden vector.
///
/// Recurrent weight packing, per gate: W (hidden x input), U (hidden x
/// hidden), b (hidden), all row-major. Gate order is [z, r, n] for GRU and
/// [i, f, g, o] for LSTM. The head (W_out, b_out) comes last.
class BaselineModel {
 public:
  BaselineModel(CellKind kind, WindowLayout layout, std::vector<std::size_t> layer_sizes,
                std::uint64_t seed = 0);

  CellKind kind() const noexcept { return kind_; }
  const WindowLayout& layout() const noexcept { return layout_; }
  const std::vector<std::size_t>& layer_sizes() const noexcept { return layer_sizes_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t num_weights() const noexcept { return static_cast<std::size_t>(weights_.size()); }
  std::size_t output_size() const noexcept { return layer_sizes_.back(); }
  bool is_recurrent() const noexcept { return kind_ != CellKind::feedforward; }

  const Vec& weights() const noexcept { return weights_; }
  BaselineModel with_weights(Vec weights) const;

  /// Prediction for one flattened window (WindowLayout order).
  Vec predict(const Vec& flat_window) const;
  /// Prediction for a window given as per-step inputs (static part included
  /// in each step). Feedforward models take a single flattened step.
  Vec predict_steps(std::span<const Vec> steps) const;

  static std::size_t weight_count(CellKind kind, const std::vector<std::size_t>& layer_sizes);
  /// Layer sizes used by the training pipeline for a single hidden width.
  static std::vector<std::size_t> default_layer_sizes(CellKind kind, const WindowLayout& layout,
                                                      std::size_t hidden, std::size_t outputs);

 private:
  CellKind kind_;
  WindowLayout layout_;
  std::vector<std::size_t> layer_sizes_;
  std::uint64_t seed_ = 0;
  Vec weights_;
};

/// Normal(0, init_std^2) weights from `seed`; LSTM forget-gate biases start at 1.
BaselineModel init_baseline(CellKind kind, const WindowLayout& layout,
                            std::vector<std::size_t> layer_sizes, double init_std,
                            std::uint64_t seed);

/// One recurrent cell transition for a single example.
struct CellStep {
  Vec h;
  Vec c;                    // LSTM only, empty otherwise
  std::vector<Vec> gates;   // sigmoid gates: z,r (GRU); i,f,o (LSTM); empty for simple RNN
};
CellStep cell_step(const BaselineModel& model, const Vec& x, const Vec& h, const Vec& c);

/// Mean squared error over the batch and output components plus
/// l1_lambda * ||w||_1. Writes d(loss)/d(weights) when `gradient` is set.
double batch_loss(const BaselineModel& model, std::span<const WindowedSample* const> batch,
                  double l1_lambda, Vec* gradient);

struct BaselineFitResult {
  BaselineModel model;
  TrainingLog log;
};

/// Minibatch Adam on shuffled windows. Each window is an independent example
/// (full BPTT over its steps), so demonstration grouping only fixes the data.
BaselineFitResult sgd_fit(const BaselineModel& model, std::span<const SampleSequence> demos,
                          const OptimConfig& cfg);

}  // namespace dlfd
