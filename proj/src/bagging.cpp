#include "dlfd/bagging.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <optional>
#include <string>
#include <thread>

namespace dlfd {

std::vector<std::vector<std::size_t>> bootstrap_indices(std::size_t n, std::size_t m,
                                                        std::uint64_t base_seed) {
  if (n == 0) throw Error(ErrorKind::input, "cannot resample an empty dataset");
  if (m == 0) throw Error(ErrorKind::config, "ensemble size must be >= 1");
  std::vector<std::vector<std::size_t>> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::mt19937_64 rng(base_seed + i + 1);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    out[i].resize(n);
    for (auto& idx : out[i]) idx = pick(rng);
  }
  return out;
}

Prediction aggregate(std::span<const Vec> member_outputs, double z_value) {
  if (member_outputs.empty()) throw Error(ErrorKind::input, "no member predictions to aggregate");
  const auto m = static_cast<double>(member_outputs.size());
  const Eigen::Index dim = member_outputs.front().size();
  Prediction p;
  p.mean = Vec::Zero(dim);
  for (const Vec& v : member_outputs) {
    if (v.size() != dim) throw Error(ErrorKind::shape, "member predictions differ in width");
    p.mean += v;
  }
  p.mean /= m;
  p.std = Vec::Zero(dim);
  if (member_outputs.size() > 1) {
    for (const Vec& v : member_outputs) p.std += (v - p.mean).cwiseAbs2();
    p.std = (p.std / (m - 1.0)).cwiseSqrt();
  }
  const Vec half = z_value * p.std / std::sqrt(m);
  p.ci_low = p.mean - half;
  p.ci_high = p.mean + half;
  return p;
}

void Ensemble::validate() const {
  if (members.empty()) throw Error(ErrorKind::config, "ensemble has no members");
  if (member_seeds.size() != members.size()) {
    throw Error(ErrorKind::config, "ensemble seeds do not match its members");
  }
  for (const auto& p : members) {
    if (p.input_size() != members.front().input_size() ||
        p.output_size() != members.front().output_size() || p.kind() != members.front().kind()) {
      throw Error(ErrorKind::shape, "ensemble members are not homogeneous");
    }
  }
  if (!(z_value > 0.0)) throw Error(ErrorKind::config, "z_value must be > 0");
}

Prediction Ensemble::predict_with_ci(const Vec& window) const {
  std::vector<Vec> outs;
  outs.reserve(members.size());
  for (const auto& p : members) outs.push_back(p.predict_window(window));
  return aggregate(outs, z_value);
}

std::vector<Prediction> Ensemble::predict_sequence_with_ci(const SampleSequence& seq) const {
  std::vector<std::vector<Vec>> per_member;
  per_member.reserve(members.size());
  for (const auto& p : members) per_member.push_back(p.predict_sequence(seq));
  std::vector<Prediction> out;
  out.reserve(seq.samples.size());
  std::vector<Vec> column(members.size());
  for (std::size_t t = 0; t < seq.samples.size(); ++t) {
    for (std::size_t i = 0; i < members.size(); ++i) column[i] = per_member[i][t];
    out.push_back(aggregate(column, z_value));
  }
  return out;
}

EnsembleFit fit_ensemble(const TrainerSpec& spec, std::span<const SampleSequence> demos,
                         std::size_t m, std::uint64_t base_seed, std::size_t workers,
                         double z_value) {
  spec.validate();
  const auto resamples = bootstrap_resample(demos, m, base_seed);

  std::vector<std::optional<TrainedPolicy>> trained(m);
  std::vector<std::exception_ptr> errors(m);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < m; i = next++) {
      try {
        trained[i] = train_policy(spec, resamples[i], base_seed + i + 1);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(workers, m));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw with_context(e, "ensemble member " + std::to_string(i));
    }
  }

  EnsembleFit fit;
  fit.ensemble.z_value = z_value;
  for (std::size_t i = 0; i < m; ++i) {
    fit.ensemble.members.push_back(std::move(trained[i]->policy));
    fit.ensemble.member_seeds.push_back(base_seed + i + 1);
    fit.logs.push_back(std::move(trained[i]->log));
  }
  return fit;
}

}  // namespace dlfd
