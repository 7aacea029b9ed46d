#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "dlfd/bagging.hpp"
#include "dlfd/dataset.hpp"
#include "dlfd/normalizer.hpp"
#include "dlfd/policy.hpp"

namespace dlfd {

/// Plain-text model file: `dlfd-model v1`, `key value...` lines, then
/// `weights <n>` followed by one weight per line.
std::string format_policy(const Policy& policy);
Policy parse_policy(std::string_view text);
void save_policy(const Policy& policy, const std::filesystem::path& file);
Policy load_policy(const std::filesystem::path& file);

/// A trained model directory: members, normalizers and the settings needed to
/// rebuild the evaluation data (window length, split seed).
struct ModelBundle {
  ModelKind kind = ModelKind::kf_rmlp;
  bool is_ensemble = false;
  Ensemble ensemble;  // one member for a single model
  Normalizer input_normalizer;
  Normalizer target_scaler;
  std::size_t window = 3;
  FeatureSelection features;
  std::uint64_t split_seed = 0;
  std::uint64_t seed = 0;
  /// Free-form training settings recorded for provenance.
  std::map<std::string, std::string> settings;
};

inline constexpr int kModelManifestVersion = 1;
inline constexpr const char* kModelManifestName = "model_manifest.json";

/// Writes model_manifest.json, member_<i>.model, normalizer.txt and
/// target_scaler.txt into `dir`.
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir);
ModelBundle load_bundle(const std::filesystem::path& dir);

}  // namespace dlfd
