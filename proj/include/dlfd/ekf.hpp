#pragma once

#include <cstdint>
#include <span>

#include "dlfd/linalg.hpp"
#include "dlfd/rmlp.hpp"
#include "dlfd/samples.hpp"
#include "dlfd/training_log.hpp"

namespace dlfd {

/// Extended Kalman filter training of RMLP weights.
///
/// The weights are the filter state with a random-walk process model; the
/// network output is the measurement. Initial covariance is I/epsilon,
/// measurement noise I/eta (eta acts as a learning rate) and process noise q*I.
struct EkfConfig {
  double epsilon = 0.1;
  double eta = 0.01;
  double q = 0.01;
  std::size_t epochs = 1;
  bool shuffle_demos = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct KalmanState {
  Vec weights;              // current estimate of the network weights
  Mat covariance;           // P, n_w x n_w, kept exactly symmetric
  Mat measurement_noise;    // R, n_y x n_y
  Vec process_noise;        // diagonal of Q
  std::uint64_t step_count = 0;
};

KalmanState init_filter(const RmlpNetwork& net, const EkfConfig& cfg);

struct EkfStepResult {
  KalmanState filter;
  RmlpNetwork network;
  RecurrentState recurrent;
  Vec residual;
};

/// One filter update on a single (input, target) pair:
///   xi = y - y_hat, A = (R + H^T P H)^-1, K = P H A,
///   w += K xi, P = (I - K H^T) P + Q.
/// The forward pass and Jacobian use `filter.weights`; `net` supplies the
/// topology. Throws numerical errors when R + H^T P H is not positive definite
/// and divergence errors on non-finite results.
EkfStepResult ekf_step(KalmanState filter, const RmlpNetwork& net, const RecurrentState& recurrent,
                       const Vec& input, const Vec& target);

struct EkfFitResult {
  RmlpNetwork network;
  KalmanState filter;
  TrainingLog log;
};

/// Sequential training over whole demonstrations. Samples within a demo are
/// processed in order with the recurrent state carried along; the state is
/// reset between demos. Demo order is reshuffled each epoch when enabled.
EkfFitResult fit_ekf(const RmlpNetwork& net, std::span<const SampleSequence> demos,
                     const EkfConfig& cfg);

}  // namespace dlfd
