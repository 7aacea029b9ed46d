#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "dlfd/dataset.hpp"
#include "dlfd/linalg.hpp"
#include "dlfd/normalizer.hpp"
#include "dlfd/pipeline.hpp"
#include "dlfd/samples.hpp"
#include "dlfd/tasksim.hpp"

namespace dlfd::testing {

/// |a - f| / max(|a|, |f|, 1e-6)
inline double rel_err(double a, double f) {
  return std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-6});
}

inline double max_rel_err(const Mat& a, const Mat& f) {
  double worst = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) worst = std::max(worst, rel_err(a.data()[i], f.data()[i]));
  return worst;
}

/// Removes itself on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("dlfd_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

inline Eigen::Vector4d random_unit_quaternion(std::mt19937_64& rng) {
  Eigen::Vector4d q = random_vec(rng, 4);
  return q / q.norm();
}

/// A small valid demonstration with `z_dim` features and `len` records.
inline Demonstration toy_demo(const std::string& id, std::size_t len, std::size_t z_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Demonstration d;
  d.demo_id = id;
  for (std::size_t t = 0; t < len; ++t) {
    DemonstrationRecord r;
    r.t = t;
    r.z = random_vec(rng, static_cast<Eigen::Index>(z_dim));
    r.ee_l.p = random_vec(rng, 3);
    r.ee_l.q = random_unit_quaternion(rng);
    r.ee_r.p = random_vec(rng, 3);
    r.ee_r.q = random_unit_quaternion(rng);
    r.a.dp = random_vec(rng, 3, 0.01);
    r.a.q = random_unit_quaternion(rng);
    d.records.push_back(std::move(r));
  }
  return d;
}

inline Dataset toy_dataset(std::size_t demos, std::size_t len, std::size_t z_dim, std::uint64_t seed) {
  Dataset ds;
  for (std::size_t i = 0; i < demos; ++i) {
    ds.demos.push_back(toy_demo("demo_" + std::to_string(100 + i), len, z_dim, seed * 1000 + i));
  }
  return ds;
}

/// Simulated needle demonstrations, seeds seed*1000 + i.
inline Dataset needle_dataset(std::size_t demos, std::uint64_t seed, std::size_t steps = 140) {
  Dataset ds;
  for (std::size_t i = 0; i < demos; ++i) {
    SimConfig c;
    c.seed = seed * 1000 + i;
    c.noise_std = 1e-5;
    c.steps = steps;
    ds.demos.push_back(simulate_demo(c));
  }
  return ds;
}

/// Standardized fit-partition windows of a needle dataset.
inline std::vector<SampleSequence> needle_fit_sequences(std::size_t demos, std::uint64_t seed,
                                                        std::size_t window = 3) {
  const PreparedData pd = prepare_data(needle_dataset(demos, seed), window, seed);
  return normalize(pd.fit, fit_input_normalizer(pd.fit), fit_target_scaler(pd.fit));
}

/// y = a x + b per sample, with optional Gaussian noise on the target.
inline std::vector<SampleSequence> linear_sequences(const Mat& a, const Vec& b, std::size_t demos,
                                                    std::size_t len, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<SampleSequence> out;
  for (std::size_t d = 0; d < demos; ++d) {
    SampleSequence seq;
    seq.demo_id = "lin_" + std::to_string(d);
    for (std::size_t t = 0; t < len; ++t) {
      WindowedSample s;
      s.input = random_vec(rng, a.cols());
      s.target = a * s.input + b;
      if (noise > 0) s.target += random_vec(rng, b.size(), noise);
      s.demo_id = seq.demo_id;
      s.t = t;
      seq.samples.push_back(std::move(s));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace dlfd::testing
