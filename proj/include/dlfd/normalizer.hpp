#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dlfd/linalg.hpp"
#include "dlfd/samples.hpp"

namespace dlfd {

/// Per-component affine standardization x' = (x - mean) / std. Components
/// with std below 1e-12 are passed through with std = 1.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(Vec mean, Vec std);

  static Normalizer fit(const std::vector<Vec>& rows);

  Vec apply(const Vec& x) const;
  Vec invert(const Vec& x) const;
  /// Scales a difference (no offset), e.g. an error vector back to raw units.
  Vec invert_scale(const Vec& dx) const;

  const Vec& mean() const noexcept { return mean_; }
  const Vec& stddev() const noexcept { return std_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(mean_.size()); }

  std::string serialize() const;
  static Normalizer parse(std::string_view text);
  void save(const std::filesystem::path& file) const;
  static Normalizer load(const std::filesystem::path& file);

 private:
  Vec mean_;
  Vec std_;
};

inline constexpr double kMinStd = 1e-12;

/// Statistics over every sample input / target in `seqs`.
Normalizer fit_input_normalizer(const std::vector<SampleSequence>& seqs);
Normalizer fit_target_scaler(const std::vector<SampleSequence>& seqs);

/// Returns copies with inputs and/or targets mapped through the normalizers.
std::vector<SampleSequence> normalize(const std::vector<SampleSequence>& seqs, const Normalizer& inputs,
                                      const Normalizer& targets);

}  // namespace dlfd
