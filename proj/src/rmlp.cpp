#include "dlfd/rmlp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "dlfd/error.hpp"

namespace dlfd {

namespace {

Vec activate(Activation a, const Vec& z) {
  switch (a) {
    case Activation::tanh: return z.array().tanh().matrix();
    case Activation::logistic: return (1.0 / (1.0 + (-z.array()).exp())).matrix();
    case Activation::linear: return z;
  }
  return z;
}

// Derivative expressed through the activation value where possible.
Vec activation_slope(Activation a, const Vec& act) {
  switch (a) {
    case Activation::tanh: return (1.0 - act.array().square()).matrix();
    case Activation::logistic: return (act.array() * (1.0 - act.array())).matrix();
    case Activation::linear: return Vec::Ones(act.size());
  }
  return Vec::Ones(act.size());
}

using ConstRowMap = Eigen::Map<const RowMajorMat>;

}  // namespace

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::logistic: return "logistic";
    case Activation::linear: return "linear";
  }
  return "linear";
}

Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "logistic") return Activation::logistic;
  if (name == "linear") return Activation::linear;
  throw Error(ErrorKind::config, "unknown activation '" + std::string(name) + "'");
}

RmlpConfig RmlpConfig::elman(std::size_t inputs, std::size_t hidden, std::size_t outputs) {
  RmlpConfig c;
  c.layer_sizes = {inputs, hidden, outputs};
  c.recurrent_layers = {1};
  return c;
}

void RmlpConfig::validate() const {
  if (layer_sizes.size() < 2) {
    throw Error(ErrorKind::config, "layer_sizes needs at least an input and an output width");
  }
  for (std::size_t w : layer_sizes) {
    if (w == 0) throw Error(ErrorKind::config, "layer widths must be positive");
  }
  if (bptt_depth < 1) throw Error(ErrorKind::config, "bptt_depth must be >= 1");
  const std::size_t hidden = layer_sizes.size() - 2;
  for (std::size_t l : recurrent_layers) {
    if (l < 1 || l > hidden) {
      throw Error(ErrorKind::config,
                  "recurrent layer " + std::to_string(l) + " is not a hidden layer");
    }
  }
  if (output_activation != Activation::linear) {
    throw Error(ErrorKind::config, "output layer must be linear");
  }
  if (!(init_std >= 0.0) || !std::isfinite(init_std)) {
    throw Error(ErrorKind::config, "init_std must be finite and nonnegative");
  }
}

std::size_t RmlpConfig::num_weights() const {
  std::size_t n = 0;
  for (std::size_t l = 1; l < layer_sizes.size(); ++l) {
    n += layer_sizes[l - 1] * layer_sizes[l] + layer_sizes[l];
    if (recurrent_layers.count(l)) n += layer_sizes[l] * layer_sizes[l];
  }
  return n;
}

RmlpNetwork::RmlpNetwork(RmlpConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t offset = 0;
  std::size_t slot = 0;
  for (std::size_t l = 1; l < config_.layer_sizes.size(); ++l) {
    LayerSlots s;
    s.fan_in = config_.layer_sizes[l - 1];
    s.fan_out = config_.layer_sizes[l];
    s.input_offset = offset;
    offset += s.fan_in * s.fan_out;
    if (config_.recurrent_layers.count(l)) {
      s.recurrent_offset = offset;
      s.recurrent_slot = slot++;
      offset += s.fan_out * s.fan_out;
    }
    s.bias_offset = offset;
    offset += s.fan_out;
    layers_.push_back(s);
  }
  weights_ = Vec::Zero(static_cast<Eigen::Index>(offset));
}

RmlpNetwork::RmlpNetwork(RmlpConfig config, Vec weights) : RmlpNetwork(std::move(config)) {
  *this = with_weights(std::move(weights));
}

RmlpNetwork RmlpNetwork::with_weights(Vec weights) const {
  if (weights.size() != weights_.size()) {
    throw Error(ErrorKind::shape, "weight vector has length " + std::to_string(weights.size()) +
                                      ", network expects " + std::to_string(weights_.size()));
  }
  if (!all_finite(weights)) throw Error(ErrorKind::input, "weight vector contains NaN or Inf");
  RmlpNetwork copy = *this;
  copy.weights_ = std::move(weights);
  return copy;
}

RecurrentState RmlpNetwork::zero_state() const {
  RecurrentState s;
  for (const auto& layer : layers_) {
    if (layer.recurrent_slot) s.activations.push_back(Vec::Zero(static_cast<Eigen::Index>(layer.fan_out)));
  }
  return s;
}

void RmlpNetwork::check_input(const Vec& input) const {
  if (static_cast<std::size_t>(input.size()) != input_size()) {
    throw Error(ErrorKind::shape, "input has length " + std::to_string(input.size()) +
                                      ", network expects " + std::to_string(input_size()));
  }
  if (!all_finite(input)) throw Error(ErrorKind::input, "input contains NaN or Inf");
}

void RmlpNetwork::check_state(const RecurrentState& state) const {
  std::size_t slots = 0;
  for (const auto& layer : layers_) {
    if (!layer.recurrent_slot) continue;
    if (*layer.recurrent_slot >= state.activations.size() ||
        static_cast<std::size_t>(state.activations[*layer.recurrent_slot].size()) != layer.fan_out) {
      throw Error(ErrorKind::shape, "recurrent state does not match the network");
    }
    ++slots;
  }
  if (slots != state.activations.size()) {
    throw Error(ErrorKind::shape, "recurrent state does not match the network");
  }
}

StepOutput RmlpNetwork::forward_step(const RecurrentState& state, const Vec& input) const {
  check_state(state);
  check_input(input);

  StepOutput out;
  out.next_state.activations = state.activations;
  Vec x = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerSlots& s = layers_[l];
    ConstRowMap w(weights_.data() + s.input_offset, static_cast<Eigen::Index>(s.fan_out),
                  static_cast<Eigen::Index>(s.fan_in));
    Vec z = w * x + weights_.segment(static_cast<Eigen::Index>(s.bias_offset),
                                     static_cast<Eigen::Index>(s.fan_out));
    if (s.recurrent_offset) {
      ConstRowMap u(weights_.data() + *s.recurrent_offset, static_cast<Eigen::Index>(s.fan_out),
                    static_cast<Eigen::Index>(s.fan_out));
      z += u * state.activations[*s.recurrent_slot];
    }
    const bool is_output = l + 1 == layers_.size();
    x = is_output ? z : activate(config_.hidden_activation, z);
    if (s.recurrent_slot) out.next_state.activations[*s.recurrent_slot] = x;
  }
  out.output = std::move(x);

  if (is_recurrent() && config_.bptt_depth > 1) {
    out.next_state.history = state.history;
    out.next_state.history.push_back(RecurrentSnapshot{input, state.activations});
    while (out.next_state.history.size() > config_.bptt_depth - 1) out.next_state.history.pop_front();
  }
  return out;
}

Mat RmlpNetwork::output_jacobian(const RecurrentState& state, const Vec& input) const {
  check_state(state);
  check_input(input);

  const std::size_t past =
      is_recurrent() ? std::min(state.history.size(), config_.bptt_depth - 1) : std::size_t{0};
  const std::size_t steps = past + 1;
  const std::size_t first = state.history.size() - past;

  std::vector<const Vec*> inputs(steps);
  for (std::size_t k = 0; k < past; ++k) inputs[k] = &state.history[first + k].input;
  inputs[steps - 1] = &input;
  std::vector<Vec> h = past > 0 ? state.history[first].activations_before : state.activations;

  const std::size_t n_layers = layers_.size();
  const auto n_y = static_cast<Eigen::Index>(output_size());

  struct Cache {
    Vec x;       // layer input
    Vec act;     // layer output
    Vec h_prev;  // incoming recurrent activation (recurrent layers only)
  };
  std::vector<std::vector<Cache>> cache(steps, std::vector<Cache>(n_layers));

  for (std::size_t t = 0; t < steps; ++t) {
    Vec x = *inputs[t];
    for (std::size_t l = 0; l < n_layers; ++l) {
      const LayerSlots& s = layers_[l];
      Cache& c = cache[t][l];
      c.x = x;
      ConstRowMap w(weights_.data() + s.input_offset, static_cast<Eigen::Index>(s.fan_out),
                    static_cast<Eigen::Index>(s.fan_in));
      Vec z = w * x + weights_.segment(static_cast<Eigen::Index>(s.bias_offset),
                                       static_cast<Eigen::Index>(s.fan_out));
      if (s.recurrent_offset) {
        ConstRowMap u(weights_.data() + *s.recurrent_offset, static_cast<Eigen::Index>(s.fan_out),
                      static_cast<Eigen::Index>(s.fan_out));
        c.h_prev = h[*s.recurrent_slot];
        z += u * c.h_prev;
      }
      const bool is_output = l + 1 == n_layers;
      c.act = is_output ? z : activate(config_.hidden_activation, z);
      if (s.recurrent_slot) h[*s.recurrent_slot] = c.act;
      x = c.act;
    }
  }

  Mat jac = Mat::Zero(weights_.size(), n_y);
  // Pre-activation deltas of recurrent layers at step t+1, one column per output.
  std::vector<Mat> rec_next(state.activations.size());
  std::vector<bool> rec_next_live(state.activations.size(), false);

  for (std::size_t tt = steps; tt-- > 0;) {
    std::vector<Mat> rec_cur(rec_next.size());
    std::vector<bool> rec_cur_live(rec_next.size(), false);
    Mat delta_above;
    bool above_live = false;

    for (std::size_t l = n_layers; l-- > 0;) {
      const LayerSlots& s = layers_[l];
      const auto fan_out = static_cast<Eigen::Index>(s.fan_out);
      const auto fan_in = static_cast<Eigen::Index>(s.fan_in);
      const Cache& c = cache[tt][l];
      const bool is_output = l + 1 == n_layers;

      Mat delta;
      bool live = false;
      if (is_output) {
        if (tt + 1 == steps) {
          delta = Mat::Identity(n_y, n_y);
          live = true;
        }
      } else {
        Mat upstream = Mat::Zero(fan_out, n_y);
        if (above_live) {
          const LayerSlots& up = layers_[l + 1];
          ConstRowMap w_up(weights_.data() + up.input_offset, static_cast<Eigen::Index>(up.fan_out),
                           static_cast<Eigen::Index>(up.fan_in));
          upstream.noalias() += w_up.transpose() * delta_above;
          live = true;
        }
        if (s.recurrent_slot && rec_next_live[*s.recurrent_slot]) {
          ConstRowMap u(weights_.data() + *s.recurrent_offset, fan_out, fan_out);
          upstream.noalias() += u.transpose() * rec_next[*s.recurrent_slot];
          live = true;
        }
        if (live) delta = activation_slope(config_.hidden_activation, c.act).asDiagonal() * upstream;
      }

      if (live) {
        for (Eigen::Index a = 0; a < fan_out; ++a) {
          jac.block(static_cast<Eigen::Index>(s.input_offset) + a * fan_in, 0, fan_in, n_y).noalias() +=
              c.x * delta.row(a);
          if (s.recurrent_offset) {
            jac.block(static_cast<Eigen::Index>(*s.recurrent_offset) + a * fan_out, 0, fan_out, n_y)
                .noalias() += c.h_prev * delta.row(a);
          }
        }
        jac.block(static_cast<Eigen::Index>(s.bias_offset), 0, fan_out, n_y) += delta;
        if (s.recurrent_slot) {
          rec_cur[*s.recurrent_slot] = delta;
          rec_cur_live[*s.recurrent_slot] = true;
        }
      }
      delta_above = std::move(delta);
      above_live = live;
    }
    rec_next = std::move(rec_cur);
    rec_next_live = std::move(rec_cur_live);
  }
  return jac;
}

RmlpNetwork init_network(const RmlpConfig& config) {
  RmlpNetwork net(config);
  std::mt19937_64 gen(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec w(static_cast<Eigen::Index>(net.num_weights()));
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = config.init_std * normal(gen);
  return net.with_weights(std::move(w));
}

}  // namespace dlfd
