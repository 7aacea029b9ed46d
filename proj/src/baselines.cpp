#include "dlfd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "dlfd/error.hpp"

namespace dlfd {

namespace {

using Index = Eigen::Index;
using ConstRowMap = Eigen::Map<const RowMajorMat>;
using RowMap = Eigen::Map<RowMajorMat>;

std::size_t gate_count(CellKind kind) {
  switch (kind) {
    case CellKind::feedforward: return 0;
    case CellKind::simple_rnn: return 1;
    case CellKind::gru: return 3;
    case CellKind::lstm: return 4;
  }
  return 0;
}

Mat sigmoid(const Mat& a) { return (1.0 / (1.0 + (-a.array()).exp())).matrix(); }
Mat tanh_of(const Mat& a) { return a.array().tanh().matrix(); }

// Offsets of one recurrent cell plus its linear head inside the flat vector.
struct CellLayout {
  Index in = 0;
  Index hid = 0;
  Index out = 0;
  Index stride = 0;
  Index head = 0;

  CellLayout(const std::vector<std::size_t>& sizes, std::size_t gates)
      : in(static_cast<Index>(sizes[0])),
        hid(static_cast<Index>(sizes[1])),
        out(static_cast<Index>(sizes[2])),
        stride(hid * in + hid * hid + hid),
        head(static_cast<Index>(gates) * stride) {}

  Index w(Index g) const { return g * stride; }
  Index u(Index g) const { return g * stride + hid * in; }
  Index b(Index g) const { return g * stride + hid * in + hid * hid; }
};

// Forward pass over a batch of windows with enough cached state for BPTT.
class RecurrentTape {
 public:
  RecurrentTape(const BaselineModel& model, const std::vector<Mat>& xs)
      : model_(model), xs_(xs), cell_(model.layer_sizes(), gate_count(model.kind())) {}

  Mat forward() {
    const Vec& w = model_.weights();
    const Index batch = xs_.front().cols();
    const Index hid = cell_.hid;
    const auto steps = xs_.size();
    hs_.assign(steps + 1, Mat::Zero(hid, batch));
    cs_.assign(steps + 1, Mat::Zero(hid, batch));
    gates_.assign(steps, {});
    tanh_c_.assign(steps, Mat());

    auto affine = [&](Index g, const Mat& x, const Mat& h) {
      ConstRowMap wm(w.data() + cell_.w(g), hid, cell_.in);
      ConstRowMap um(w.data() + cell_.u(g), hid, hid);
      Mat a = wm * x;
      a.noalias() += um * h;
      a.colwise() += w.segment(cell_.b(g), hid);
      return a;
    };

    for (std::size_t t = 0; t < steps; ++t) {
      const Mat& x = xs_[t];
      const Mat& h = hs_[t];
      switch (model_.kind()) {
        case CellKind::simple_rnn: {
          hs_[t + 1] = tanh_of(affine(0, x, h));
          break;
        }
        case CellKind::gru: {
          Mat z = sigmoid(affine(0, x, h));
          Mat r = sigmoid(affine(1, x, h));
          Mat rh = r.cwiseProduct(h);
          Mat n = tanh_of(affine(2, x, rh));
          hs_[t + 1] = (1.0 - z.array()).matrix().cwiseProduct(n) + z.cwiseProduct(h);
          gates_[t] = {std::move(z), std::move(r), std::move(n), std::move(rh)};
          break;
        }
        case CellKind::lstm: {
          Mat i = sigmoid(affine(0, x, h));
          Mat f = sigmoid(affine(1, x, h));
          Mat g = tanh_of(affine(2, x, h));
          Mat o = sigmoid(affine(3, x, h));
          cs_[t + 1] = f.cwiseProduct(cs_[t]) + i.cwiseProduct(g);
          tanh_c_[t] = tanh_of(cs_[t + 1]);
          hs_[t + 1] = o.cwiseProduct(tanh_c_[t]);
          gates_[t] = {std::move(i), std::move(f), std::move(g), std::move(o)};
          break;
        }
        case CellKind::feedforward: break;
      }
    }
    ConstRowMap head(w.data() + cell_.head, cell_.out, hid);
    Mat y = head * hs_[steps];
    y.colwise() += w.segment(cell_.head + cell_.out * hid, cell_.out);
    return y;
  }

  void backward(const Mat& d_out, Vec& grad) const {
    const Vec& w = model_.weights();
    const Index hid = cell_.hid;
    const auto steps = xs_.size();

    ConstRowMap head(w.data() + cell_.head, cell_.out, hid);
    RowMap(grad.data() + cell_.head, cell_.out, hid).noalias() += d_out * hs_[steps].transpose();
    grad.segment(cell_.head + cell_.out * hid, cell_.out) += d_out.rowwise().sum();
    Mat dh = head.transpose() * d_out;
    Mat dc = Mat::Zero(hid, d_out.cols());

    // Accumulates the parameter gradient of gate g and returns U_g^T * da.
    auto accumulate = [&](Index g, const Mat& da, const Mat& x, const Mat& h_in) {
      RowMap(grad.data() + cell_.w(g), hid, cell_.in).noalias() += da * x.transpose();
      RowMap(grad.data() + cell_.u(g), hid, hid).noalias() += da * h_in.transpose();
      grad.segment(cell_.b(g), hid) += da.rowwise().sum();
      ConstRowMap um(w.data() + cell_.u(g), hid, hid);
      return Mat(um.transpose() * da);
    };

    for (std::size_t t = steps; t-- > 0;) {
      const Mat& x = xs_[t];
      const Mat& h = hs_[t];
      switch (model_.kind()) {
        case CellKind::simple_rnn: {
          Mat da = dh.cwiseProduct((1.0 - hs_[t + 1].array().square()).matrix());
          dh = accumulate(0, da, x, h);
          break;
        }
        case CellKind::gru: {
          const Mat& z = gates_[t][0];
          const Mat& r = gates_[t][1];
          const Mat& n = gates_[t][2];
          const Mat& rh = gates_[t][3];
          Mat dz = dh.cwiseProduct(h - n);
          Mat dn = dh.cwiseProduct((1.0 - z.array()).matrix());
          Mat dh_prev = dh.cwiseProduct(z);
          Mat dan = dn.cwiseProduct((1.0 - n.array().square()).matrix());
          Mat drh = accumulate(2, dan, x, rh);
          dh_prev += drh.cwiseProduct(r);
          Mat dar = drh.cwiseProduct(h).cwiseProduct((r.array() * (1.0 - r.array())).matrix());
          dh_prev += accumulate(1, dar, x, h);
          Mat daz = dz.cwiseProduct((z.array() * (1.0 - z.array())).matrix());
          dh_prev += accumulate(0, daz, x, h);
          dh = std::move(dh_prev);
          break;
        }
        case CellKind::lstm: {
          const Mat& i = gates_[t][0];
          const Mat& f = gates_[t][1];
          const Mat& g = gates_[t][2];
          const Mat& o = gates_[t][3];
          const Mat& tc = tanh_c_[t];
          Mat d_o = dh.cwiseProduct(tc);
          Mat dct = dc + dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix());
          Mat df = dct.cwiseProduct(cs_[t]);
          Mat di = dct.cwiseProduct(g);
          Mat dg = dct.cwiseProduct(i);
          dc = dct.cwiseProduct(f);
          Mat dh_prev = accumulate(0, di.cwiseProduct((i.array() * (1.0 - i.array())).matrix()), x, h);
          dh_prev += accumulate(1, df.cwiseProduct((f.array() * (1.0 - f.array())).matrix()), x, h);
          dh_prev += accumulate(2, dg.cwiseProduct((1.0 - g.array().square()).matrix()), x, h);
          dh_prev += accumulate(3, d_o.cwiseProduct((o.array() * (1.0 - o.array())).matrix()), x, h);
          dh = std::move(dh_prev);
          break;
        }
        case CellKind::feedforward: break;
      }
    }
  }

 private:
  const BaselineModel& model_;
  const std::vector<Mat>& xs_;
  CellLayout cell_;
  std::vector<Mat> hs_;
  std::vector<Mat> cs_;
  std::vector<std::vector<Mat>> gates_;
  std::vector<Mat> tanh_c_;
};

class FeedforwardTape {
 public:
  FeedforwardTape(const BaselineModel& model, const Mat& x) : model_(model), x_(x) {}

  Mat forward() {
    const auto& sizes = model_.layer_sizes();
    const Vec& w = model_.weights();
    acts_.assign(1, x_);
    Index off = 0;
    for (std::size_t l = 1; l < sizes.size(); ++l) {
      const auto fan_in = static_cast<Index>(sizes[l - 1]);
      const auto fan_out = static_cast<Index>(sizes[l]);
      ConstRowMap wm(w.data() + off, fan_out, fan_in);
      Mat a = wm * acts_.back();
      a.colwise() += w.segment(off + fan_out * fan_in, fan_out);
      off += fan_out * fan_in + fan_out;
      acts_.push_back(l + 1 == sizes.size() ? std::move(a) : tanh_of(a));
    }
    return acts_.back();
  }

  void backward(const Mat& d_out, Vec& grad) const {
    const auto& sizes = model_.layer_sizes();
    const Vec& w = model_.weights();
    std::vector<Index> offsets(sizes.size(), 0);
    for (std::size_t l = 1; l < sizes.size(); ++l) {
      offsets[l] = offsets[l - 1] +
                   (l > 1 ? static_cast<Index>(sizes[l - 2] * sizes[l - 1] + sizes[l - 1]) : 0);
    }
    Mat d = d_out;
    for (std::size_t l = sizes.size() - 1; l >= 1; --l) {
      const auto fan_in = static_cast<Index>(sizes[l - 1]);
      const auto fan_out = static_cast<Index>(sizes[l]);
      const Index off = offsets[l];
      RowMap(grad.data() + off, fan_out, fan_in).noalias() += d * acts_[l - 1].transpose();
      grad.segment(off + fan_out * fan_in, fan_out) += d.rowwise().sum();
      if (l == 1) break;
      ConstRowMap wm(w.data() + off, fan_out, fan_in);
      Mat up = wm.transpose() * d;
      d = up.cwiseProduct((1.0 - acts_[l - 1].array().square()).matrix());
    }
  }

 private:
  const BaselineModel& model_;
  const Mat& x_;
  std::vector<Mat> acts_;
};

// Per-step input matrices (step input x batch) for recurrent kinds; a single
// flattened matrix for feedforward.
std::vector<Mat> batch_inputs(const BaselineModel& model,
                              std::span<const WindowedSample* const> batch) {
  const WindowLayout& lay = model.layout();
  const auto cols = static_cast<Index>(batch.size());
  for (const WindowedSample* s : batch) {
    if (static_cast<std::size_t>(s->input.size()) != lay.flat_dim()) {
      throw Error(ErrorKind::shape, "window has length " + std::to_string(s->input.size()) +
                                        ", model expects " + std::to_string(lay.flat_dim()));
    }
    if (static_cast<std::size_t>(s->target.size()) != model.output_size()) {
      throw Error(ErrorKind::shape, "target width does not match the model");
    }
  }
  if (!model.is_recurrent()) {
    Mat x(static_cast<Index>(lay.flat_dim()), cols);
    for (Index b = 0; b < cols; ++b) x.col(b) = batch[static_cast<std::size_t>(b)]->input;
    return {std::move(x)};
  }
  const auto sd = static_cast<Index>(lay.step_dim);
  const auto st = static_cast<Index>(lay.static_dim);
  std::vector<Mat> xs(lay.steps, Mat(sd + st, cols));
  for (Index b = 0; b < cols; ++b) {
    const Vec& in = batch[static_cast<std::size_t>(b)]->input;
    for (std::size_t t = 0; t < lay.steps; ++t) {
      xs[t].col(b).head(sd) = in.segment(static_cast<Index>(t) * sd, sd);
      if (st > 0) xs[t].col(b).tail(st) = in.tail(st);
    }
  }
  return xs;
}

Mat forward_batch(const BaselineModel& model, const std::vector<Mat>& xs) {
  if (model.is_recurrent()) {
    RecurrentTape tape(model, xs);
    return tape.forward();
  }
  FeedforwardTape tape(model, xs.front());
  return tape.forward();
}

}  // namespace

std::string_view to_string(CellKind kind) noexcept {
  switch (kind) {
    case CellKind::feedforward: return "feedforward";
    case CellKind::simple_rnn: return "rnn";
    case CellKind::gru: return "gru";
    case CellKind::lstm: return "lstm";
  }
  return "feedforward";
}

CellKind cell_kind_from_string(std::string_view name) {
  if (name == "feedforward") return CellKind::feedforward;
  if (name == "rnn" || name == "simple_rnn") return CellKind::simple_rnn;
  if (name == "gru") return CellKind::gru;
  if (name == "lstm") return CellKind::lstm;
  throw Error(ErrorKind::config, "unknown cell kind '" + std::string(name) + "'");
}

void OptimConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::config, "learning_rate must be > 0");
  if (!(l1_lambda >= 0.0)) throw Error(ErrorKind::config, "l1_lambda must be >= 0");
  if (batch_size == 0) throw Error(ErrorKind::config, "batch_size must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw Error(ErrorKind::config, "Adam moment decay rates must lie in (0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw Error(ErrorKind::config, "adam_epsilon must be > 0");
}

std::size_t BaselineModel::weight_count(CellKind kind, const std::vector<std::size_t>& sizes) {
  if (kind == CellKind::feedforward) {
    std::size_t n = 0;
    for (std::size_t l = 1; l < sizes.size(); ++l) n += sizes[l - 1] * sizes[l] + sizes[l];
    return n;
  }
  const std::size_t in = sizes[0], hid = sizes[1], out = sizes[2];
  return gate_count(kind) * (hid * in + hid * hid + hid) + out * hid + out;
}

std::vector<std::size_t> BaselineModel::default_layer_sizes(CellKind kind, const WindowLayout& layout,
                                                            std::size_t hidden, std::size_t outputs) {
  if (kind == CellKind::feedforward) return {layout.flat_dim(), hidden, outputs};
  return {layout.step_input_dim(), hidden, outputs};
}

BaselineModel::BaselineModel(CellKind kind, WindowLayout layout, std::vector<std::size_t> layer_sizes,
                             std::uint64_t seed)
    : kind_(kind), layout_(layout), layer_sizes_(std::move(layer_sizes)), seed_(seed) {
  if (layer_sizes_.size() < 2) throw Error(ErrorKind::config, "layer_sizes needs at least two widths");
  for (std::size_t w : layer_sizes_) {
    if (w == 0) throw Error(ErrorKind::config, "layer widths must be positive");
  }
  if (layout_.steps == 0) throw Error(ErrorKind::config, "window must have at least one step");
  if (kind_ == CellKind::feedforward) {
    if (layer_sizes_.front() != layout_.flat_dim()) {
      throw Error(ErrorKind::config, "feedforward input width must equal the flattened window");
    }
  } else {
    if (layer_sizes_.size() != 3) {
      throw Error(ErrorKind::config, "recurrent baselines take [step input, hidden, outputs]");
    }
    if (layer_sizes_.front() != layout_.step_input_dim()) {
      throw Error(ErrorKind::config, "recurrent input width must equal step_dim + static_dim");
    }
  }
  weights_ = Vec::Zero(static_cast<Index>(weight_count(kind_, layer_sizes_)));
}

BaselineModel BaselineModel::with_weights(Vec weights) const {
  if (weights.size() != weights_.size()) {
    throw Error(ErrorKind::shape, "weight vector has length " + std::to_string(weights.size()) +
                                      ", model expects " + std::to_string(weights_.size()));
  }
  if (!all_finite(weights)) throw Error(ErrorKind::input, "weight vector contains NaN or Inf");
  BaselineModel copy = *this;
  copy.weights_ = std::move(weights);
  return copy;
}

Vec BaselineModel::predict(const Vec& flat_window) const {
  if (!all_finite(flat_window)) throw Error(ErrorKind::input, "window contains NaN or Inf");
  WindowedSample s{flat_window, Vec::Zero(static_cast<Index>(output_size())), {}, 0};
  const WindowedSample* ptr = &s;
  return forward_batch(*this, batch_inputs(*this, std::span(&ptr, 1))).col(0);
}

Vec BaselineModel::predict_steps(std::span<const Vec> steps) const {
  if (!is_recurrent()) {
    if (steps.size() != 1) throw Error(ErrorKind::shape, "feedforward models take one flattened window");
    return predict(steps.front());
  }
  if (steps.size() != layout_.steps) {
    throw Error(ErrorKind::shape, "window has " + std::to_string(steps.size()) + " steps, model expects " +
                                      std::to_string(layout_.steps));
  }
  std::vector<Mat> xs;
  for (const Vec& s : steps) {
    if (static_cast<std::size_t>(s.size()) != layout_.step_input_dim()) {
      throw Error(ErrorKind::shape, "step input width does not match the model");
    }
    if (!all_finite(s)) throw Error(ErrorKind::input, "window contains NaN or Inf");
    xs.emplace_back(s);
  }
  return forward_batch(*this, xs).col(0);
}

BaselineModel init_baseline(CellKind kind, const WindowLayout& layout,
                            std::vector<std::size_t> layer_sizes, double init_std,
                            std::uint64_t seed) {
  if (!(init_std >= 0.0)) throw Error(ErrorKind::config, "init_std must be >= 0");
  BaselineModel model(kind, layout, std::move(layer_sizes), seed);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec w(static_cast<Index>(model.num_weights()));
  for (Index i = 0; i < w.size(); ++i) w[i] = init_std * normal(gen);
  if (kind == CellKind::lstm) {
    CellLayout cell(model.layer_sizes(), 4);
    w.segment(cell.b(1), cell.hid).array() += 1.0;
  }
  return model.with_weights(std::move(w));
}

CellStep cell_step(const BaselineModel& model, const Vec& x, const Vec& h, const Vec& c) {
  if (!model.is_recurrent()) throw Error(ErrorKind::config, "feedforward models have no cell");
  CellLayout cell(model.layer_sizes(), gate_count(model.kind()));
  if (x.size() != cell.in || h.size() != cell.hid ||
      (model.kind() == CellKind::lstm && c.size() != cell.hid)) {
    throw Error(ErrorKind::shape, "cell_step operand sizes do not match the model");
  }
  const Vec& w = model.weights();
  auto affine = [&](Index g, const Vec& hv) {
    ConstRowMap wm(w.data() + cell.w(g), cell.hid, cell.in);
    ConstRowMap um(w.data() + cell.u(g), cell.hid, cell.hid);
    return Vec(wm * x + um * hv + w.segment(cell.b(g), cell.hid));
  };
  CellStep out;
  switch (model.kind()) {
    case CellKind::simple_rnn:
      out.h = affine(0, h).array().tanh().matrix();
      break;
    case CellKind::gru: {
      Vec z = sigmoid(affine(0, h));
      Vec r = sigmoid(affine(1, h));
      Vec n = affine(2, r.cwiseProduct(h)).array().tanh().matrix();
      out.h = (1.0 - z.array()).matrix().cwiseProduct(n) + z.cwiseProduct(h);
      out.gates = {z, r};
      break;
    }
    case CellKind::lstm: {
      Vec i = sigmoid(affine(0, h));
      Vec f = sigmoid(affine(1, h));
      Vec g = affine(2, h).array().tanh().matrix();
      Vec o = sigmoid(affine(3, h));
      out.c = f.cwiseProduct(c) + i.cwiseProduct(g);
      out.h = o.cwiseProduct(Vec(out.c.array().tanh().matrix()));
      out.gates = {i, f, o};
      break;
    }
    case CellKind::feedforward: break;
  }
  return out;
}

double batch_loss(const BaselineModel& model, std::span<const WindowedSample* const> batch,
                  double l1_lambda, Vec* gradient) {
  if (batch.empty()) throw Error(ErrorKind::input, "empty batch");
  const std::vector<Mat> xs = batch_inputs(model, batch);
  const auto cols = static_cast<Index>(batch.size());
  const auto n_y = static_cast<Index>(model.output_size());
  Mat targets(n_y, cols);
  for (Index b = 0; b < cols; ++b) targets.col(b) = batch[static_cast<std::size_t>(b)]->target;

  const double scale = 1.0 / static_cast<double>(cols * n_y);
  const Vec& w = model.weights();
  auto finish = [&](const Mat& pred) {
    const Mat err = pred - targets;
    return scale * err.squaredNorm() + l1_lambda * w.lpNorm<1>();
  };

  if (gradient == nullptr) return finish(forward_batch(model, xs));

  gradient->setZero(w.size());
  double loss = 0.0;
  if (model.is_recurrent()) {
    RecurrentTape tape(model, xs);
    const Mat pred = tape.forward();
    loss = finish(pred);
    tape.backward(2.0 * scale * (pred - targets), *gradient);
  } else {
    FeedforwardTape tape(model, xs.front());
    const Mat pred = tape.forward();
    loss = finish(pred);
    tape.backward(2.0 * scale * (pred - targets), *gradient);
  }
  if (l1_lambda > 0.0) {
    // Subgradient 0 at exactly zero.
    *gradient += l1_lambda * w.unaryExpr([](double v) { return double((v > 0.0) - (v < 0.0)); });
  }
  return loss;
}

BaselineFitResult sgd_fit(const BaselineModel& model, std::span<const SampleSequence> demos,
                          const OptimConfig& cfg) {
  cfg.validate();
  std::vector<const WindowedSample*> samples;
  for (const auto& d : demos) {
    for (const auto& s : d.samples) samples.push_back(&s);
  }
  if (samples.empty()) throw Error(ErrorKind::input, "training set is empty");

  BaselineModel current = model;
  Vec w = model.weights();
  Vec m1 = Vec::Zero(w.size());
  Vec m2 = Vec::Zero(w.size());
  Vec grad(w.size());
  std::uint64_t step = 0;
  std::mt19937_64 rng(cfg.seed);
  TrainingLog log;
  const auto n_y = static_cast<Index>(model.output_size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(samples.begin(), samples.end(), rng);
    double loss_sum = 0.0;
    double max_abs = 0.0;
    for (std::size_t start = 0; start < samples.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, samples.size() - start);
      std::span<const WindowedSample* const> batch(samples.data() + start, count);

      const double loss = batch_loss(current, batch, cfg.l1_lambda, &grad);
      if (!std::isfinite(loss) || !all_finite(grad)) {
        throw Error(ErrorKind::divergence, "epoch " + std::to_string(epoch) + ", batch starting at " +
                                               std::to_string(start) + ": non-finite loss");
      }
      // Residual bookkeeping from the data term: loss without the penalty is
      // the mean over components, so scale back to per-sample squared norms.
      const double data_loss = loss - cfg.l1_lambda * current.weights().lpNorm<1>();
      loss_sum += data_loss * static_cast<double>(count * static_cast<std::size_t>(n_y));

      ++step;
      m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad;
      m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      w.array() -= cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + cfg.adam_epsilon);
      if (!all_finite(w)) {
        throw Error(ErrorKind::divergence, "epoch " + std::to_string(epoch) + ": weights became non-finite");
      }
      current = current.with_weights(w);
    }
    // Max residual measured with the end-of-epoch weights.
    for (std::size_t start = 0; start < samples.size(); start += 256) {
      const std::size_t count = std::min<std::size_t>(256, samples.size() - start);
      std::span<const WindowedSample* const> batch(samples.data() + start, count);
      const Mat pred = forward_batch(current, batch_inputs(current, batch));
      for (std::size_t b = 0; b < count; ++b) {
        max_abs = std::max(max_abs, (pred.col(static_cast<Index>(b)) - batch[b]->target).cwiseAbs().maxCoeff());
      }
    }
    log.epochs.push_back({epoch, loss_sum / static_cast<double>(samples.size()), max_abs});
  }
  return BaselineFitResult{std::move(current), std::move(log)};
}

}  // namespace dlfd
