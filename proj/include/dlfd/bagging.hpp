#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "dlfd/error.hpp"
#include "dlfd/policy.hpp"

namespace dlfd {

/// `m` index lists of length n drawn uniformly with replacement; list i
/// (1-based) uses seed base_seed + i.
std::vector<std::vector<std::size_t>> bootstrap_indices(std::size_t n, std::size_t m,
                                                        std::uint64_t base_seed);

/// Resamples whole items (demonstrations) with replacement.
template <class T>
std::vector<std::vector<T>> bootstrap_resample(std::span<const T> items, std::size_t m,
                                               std::uint64_t base_seed) {
  if (items.empty()) throw Error(ErrorKind::input, "cannot resample an empty dataset");
  std::vector<std::vector<T>> out;
  for (const auto& picks : bootstrap_indices(items.size(), m, base_seed)) {
    std::vector<T>& set = out.emplace_back();
    set.reserve(picks.size());
    for (std::size_t i : picks) set.push_back(items[i]);
  }
  return out;
}

struct Prediction {
  Vec mean;
  Vec std;  // sample standard deviation across members (0 for a single member)
  Vec ci_low;
  Vec ci_high;
};

/// mean +- z * std / sqrt(m) over member outputs.
Prediction aggregate(std::span<const Vec> member_outputs, double z_value);

struct Ensemble {
  std::vector<Policy> members;
  std::vector<std::uint64_t> member_seeds;
  double z_value = 1.96;

  void validate() const;
  Prediction predict_with_ci(const Vec& window) const;
  std::vector<Prediction> predict_sequence_with_ci(const SampleSequence& seq) const;
};

struct EnsembleFit {
  Ensemble ensemble;
  std::vector<TrainingLog> logs;
};

/// Trains one member per bootstrap resample of `demos`, member i on resample
/// i with seed base_seed + i. Members are independent, so up to `workers`
/// threads train them concurrently; results are ordered by member index.
EnsembleFit fit_ensemble(const TrainerSpec& spec, std::span<const SampleSequence> demos,
                         std::size_t m, std::uint64_t base_seed, std::size_t workers = 1,
                         double z_value = 1.96);

}  // namespace dlfd
