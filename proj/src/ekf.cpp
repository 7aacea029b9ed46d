#include "dlfd/ekf.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "dlfd/error.hpp"

namespace dlfd {

void EkfConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(ErrorKind::config, "epsilon must be > 0");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw Error(ErrorKind::config, "eta must be > 0");
  if (!(q >= 0.0 && q < 0.1)) throw Error(ErrorKind::config, "q must lie in [0, 0.1)");
}

KalmanState init_filter(const RmlpNetwork& net, const EkfConfig& cfg) {
  cfg.validate();
  const auto n_w = static_cast<Eigen::Index>(net.num_weights());
  const auto n_y = static_cast<Eigen::Index>(net.output_size());
  KalmanState s;
  s.weights = net.weights();
  s.covariance = Mat::Identity(n_w, n_w) / cfg.epsilon;
  s.measurement_noise = Mat::Identity(n_y, n_y) / cfg.eta;
  s.process_noise = Vec::Constant(n_w, cfg.q);
  s.step_count = 0;
  return s;
}

namespace {

// Reads and writes only the lower triangle of P; the strict upper triangle is
// refreshed when `mirror` is set.
EkfStepResult step_lower(KalmanState filter, const RmlpNetwork& net, const RecurrentState& recurrent,
                         const Vec& input, const Vec& target, bool mirror) {
  const auto n_w = static_cast<Eigen::Index>(net.num_weights());
  const auto n_y = static_cast<Eigen::Index>(net.output_size());
  if (filter.weights.size() != n_w || filter.covariance.rows() != n_w ||
      filter.covariance.cols() != n_w || filter.process_noise.size() != n_w ||
      filter.measurement_noise.rows() != n_y || filter.measurement_noise.cols() != n_y) {
    throw Error(ErrorKind::shape, "Kalman state is not bound to this network");
  }
  if (target.size() != n_y) {
    throw Error(ErrorKind::shape, "target has length " + std::to_string(target.size()) +
                                      ", network outputs " + std::to_string(n_y));
  }
  if (!all_finite(target)) throw Error(ErrorKind::input, "target contains NaN or Inf");

  RmlpNetwork current = net.with_weights(filter.weights);
  StepOutput fwd = current.forward_step(recurrent, input);
  const Mat jac = current.output_jacobian(recurrent, input);
  Vec residual = target - fwd.output;
  if (!all_finite(residual)) throw Error(ErrorKind::divergence, "non-finite network output");

  Mat& p = filter.covariance;
  // P H using the lower triangle; P is exactly symmetric so this equals P*H.
  const Mat ph = p.selfadjointView<Eigen::Lower>() * jac;
  const Mat innovation = filter.measurement_noise + jac.transpose() * ph;
  Eigen::LLT<Mat> llt(innovation);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(innovation, Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "R + H^T P H is not positive definite (smallest eigenvalue "
        << eig.eigenvalues().minCoeff() << ", step " << filter.step_count << ")";
    throw Error(ErrorKind::numerical, msg.str());
  }
  const Mat scaling = llt.solve(Mat::Identity(n_y, n_y));  // A
  const Mat gain = ph * scaling;                             // K = P H A
  filter.weights += gain * residual;

  // (I - K H^T) P = P - (P H) A (P H)^T, applied as a symmetric rank-n_y
  // downdate with A = L^-T L^-1.
  const Mat factor = llt.matrixL().solve(ph.transpose()).transpose();
  p.selfadjointView<Eigen::Lower>().rankUpdate(factor, -1.0);
  p.diagonal() += filter.process_noise;
  if (mirror) p.triangularView<Eigen::StrictlyUpper>() = p.transpose();

  if (!all_finite(filter.weights) || !all_finite(p.diagonal())) {
    throw Error(ErrorKind::divergence,
                "filter state became non-finite at step " + std::to_string(filter.step_count));
  }
  ++filter.step_count;

  RmlpNetwork updated = net.with_weights(filter.weights);
  return EkfStepResult{std::move(filter), std::move(updated), std::move(fwd.next_state),
                       std::move(residual)};
}

}  // namespace

EkfStepResult ekf_step(KalmanState filter, const RmlpNetwork& net, const RecurrentState& recurrent,
                       const Vec& input, const Vec& target) {
  return step_lower(std::move(filter), net, recurrent, input, target, true);
}

EkfFitResult fit_ekf(const RmlpNetwork& net, std::span<const SampleSequence> demos,
                     const EkfConfig& cfg) {
  cfg.validate();
  if (demos.empty()) throw Error(ErrorKind::input, "training set is empty");
  std::size_t total = 0;
  for (const auto& d : demos) total += d.samples.size();
  if (total == 0) throw Error(ErrorKind::input, "training set has no samples");

  KalmanState filter = init_filter(net, cfg);
  TrainingLog log;
  std::vector<std::size_t> order(demos.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle_demos) std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    double max_abs = 0.0;
    std::size_t step = 0;
    for (std::size_t d : order) {
      RecurrentState recurrent = net.zero_state();
      for (const auto& sample : demos[d].samples) {
        try {
          EkfStepResult r = step_lower(std::move(filter), net, recurrent, sample.input, sample.target, false);
          filter = std::move(r.filter);
          recurrent = std::move(r.recurrent);
          loss_sum += r.residual.squaredNorm();
          max_abs = std::max(max_abs, r.residual.cwiseAbs().maxCoeff());
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::shape || e.kind() == ErrorKind::input) throw;
          throw Error(ErrorKind::divergence, "epoch " + std::to_string(epoch) + ", step " +
                                                 std::to_string(step) + " (demo " +
                                                 demos[d].demo_id + "): " + e.what());
        }
        ++step;
      }
    }
    const double mean = loss_sum / static_cast<double>(total);
    if (!std::isfinite(mean)) {
      throw Error(ErrorKind::divergence, "epoch " + std::to_string(epoch) + ": non-finite loss");
    }
    log.epochs.push_back({epoch, mean, max_abs});
  }

  filter.covariance.triangularView<Eigen::StrictlyUpper>() = filter.covariance.transpose();
  RmlpNetwork trained = net.with_weights(filter.weights);
  return EkfFitResult{std::move(trained), std::move(filter), std::move(log)};
}

}  // namespace dlfd
