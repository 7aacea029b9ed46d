#include "dlfd/policy.hpp"

#include <string>

#include "dlfd/error.hpp"

namespace dlfd {

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::kf_rmlp: return "kf_rmlp";
    case ModelKind::feedforward: return "feedforward";
    case ModelKind::rnn: return "rnn";
    case ModelKind::gru: return "gru";
    case ModelKind::lstm: return "lstm";
  }
  return "kf_rmlp";
}

ModelKind model_kind_from_string(std::string_view name) {
  if (name == "kf_rmlp") return ModelKind::kf_rmlp;
  if (name == "feedforward") return ModelKind::feedforward;
  if (name == "rnn") return ModelKind::rnn;
  if (name == "gru") return ModelKind::gru;
  if (name == "lstm") return ModelKind::lstm;
  throw Error(ErrorKind::config, "unknown model '" + std::string(name) +
                                     "' (valid: kf_rmlp, feedforward, rnn, gru, lstm)");
}

CellKind cell_kind_of(ModelKind kind) {
  switch (kind) {
    case ModelKind::feedforward: return CellKind::feedforward;
    case ModelKind::rnn: return CellKind::simple_rnn;
    case ModelKind::gru: return CellKind::gru;
    case ModelKind::lstm: return CellKind::lstm;
    case ModelKind::kf_rmlp: break;
  }
  throw Error(ErrorKind::config, "kf_rmlp is not a gradient-trained cell");
}

ModelKind Policy::kind() const {
  if (const auto* b = baseline()) {
    switch (b->kind()) {
      case CellKind::feedforward: return ModelKind::feedforward;
      case CellKind::simple_rnn: return ModelKind::rnn;
      case CellKind::gru: return ModelKind::gru;
      case CellKind::lstm: return ModelKind::lstm;
    }
  }
  return ModelKind::kf_rmlp;
}

std::size_t Policy::input_size() const {
  if (const auto* n = rmlp()) return n->input_size();
  return baseline()->layout().flat_dim();
}

std::size_t Policy::output_size() const {
  if (const auto* n = rmlp()) return n->output_size();
  return baseline()->output_size();
}

std::vector<Vec> Policy::predict_sequence(const SampleSequence& seq) const {
  std::vector<Vec> out;
  out.reserve(seq.samples.size());
  if (const auto* net = rmlp()) {
    RecurrentState state = net->zero_state();
    for (const auto& s : seq.samples) {
      StepOutput step = net->forward_step(state, s.input);
      out.push_back(std::move(step.output));
      state = std::move(step.next_state);
    }
    return out;
  }
  for (const auto& s : seq.samples) out.push_back(baseline()->predict(s.input));
  return out;
}

Vec Policy::predict_window(const Vec& window) const {
  if (const auto* net = rmlp()) return net->forward_step(net->zero_state(), window).output;
  return baseline()->predict(window);
}

void TrainerSpec::validate() const {
  if (layout.flat_dim() == 0) throw Error(ErrorKind::config, "window layout is empty");
  if (outputs == 0 || hidden == 0) throw Error(ErrorKind::config, "widths must be positive");
  if (kind == ModelKind::kf_rmlp) {
    ekf.validate();
  } else {
    optim.validate();
  }
}

TrainedPolicy train_policy(const TrainerSpec& spec, std::span<const SampleSequence> demos,
                           std::uint64_t seed) {
  spec.validate();
  if (spec.kind == ModelKind::kf_rmlp) {
    RmlpConfig cfg = RmlpConfig::elman(spec.layout.flat_dim(), spec.hidden, spec.outputs);
    cfg.hidden_activation = spec.hidden_activation;
    cfg.bptt_depth = spec.bptt_depth > 0 ? spec.bptt_depth : spec.layout.steps;
    cfg.init_std = spec.init_std;
    cfg.seed = seed;
    EkfConfig ekf = spec.ekf;
    ekf.seed = seed;
    EkfFitResult fit = fit_ekf(init_network(cfg), demos, ekf);
    return TrainedPolicy{Policy(std::move(fit.network)), std::move(fit.log)};
  }
  const CellKind cell = cell_kind_of(spec.kind);
  BaselineModel model = init_baseline(
      cell, spec.layout, BaselineModel::default_layer_sizes(cell, spec.layout, spec.hidden, spec.outputs),
      spec.init_std, seed);
  OptimConfig optim = spec.optim;
  optim.seed = seed;
  BaselineFitResult fit = sgd_fit(model, demos, optim);
  return TrainedPolicy{Policy(std::move(fit.model)), std::move(fit.log)};
}

}  // namespace dlfd
