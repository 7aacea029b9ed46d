#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dlfd/linalg.hpp"

namespace dlfd {

/// One supervised example cut from a demonstration.
struct WindowedSample {
  Vec input;
  Vec target;
  std::string demo_id;
  std::size_t t = 0;
};

/// All samples of one demonstration, in temporal order.
struct SampleSequence {
  std::string demo_id;
  std::vector<WindowedSample> samples;
};

/// Shape of a flattened window: `steps` blocks of `step_dim` values followed
/// by `static_dim` values shared by every step (calibration).
struct WindowLayout {
  std::size_t steps = 1;
  std::size_t step_dim = 0;
  std::size_t static_dim = 0;

  std::size_t flat_dim() const noexcept { return steps * step_dim + static_dim; }
  std::size_t step_input_dim() const noexcept { return step_dim + static_dim; }
  bool operator==(const WindowLayout&) const = default;
};

inline std::size_t total_samples(const std::vector<SampleSequence>& seqs) {
  std::size_t n = 0;
  for (const auto& s : seqs) n += s.samples.size();
  return n;
}

}  // namespace dlfd
