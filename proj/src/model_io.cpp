#include "dlfd/model_io.hpp"

#include <json.hpp>

#include "dlfd/error.hpp"
#include "dlfd/text_io.hpp"

namespace dlfd {

namespace fs = std::filesystem;

namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view kMagic = "dlfd-model v1";
constexpr const char* kManifestSchema = "dlfd-model-manifest";

std::string join_sizes(const std::vector<std::size_t>& sizes) {
  std::string out;
  for (std::size_t s : sizes) out += " " + std::to_string(s);
  return out;
}

std::vector<std::size_t> parse_sizes(const std::vector<std::string_view>& fields) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < fields.size(); ++i) out.push_back(static_cast<std::size_t>(text::parse_uint(fields[i])));
  return out;
}

}  // namespace

std::string format_policy(const Policy& policy) {
  std::string out(kMagic);
  out += "\nkind " + std::string(to_string(policy.kind())) + "\n";
  const Vec* weights = nullptr;
  if (const auto* net = policy.rmlp()) {
    const auto& cfg = net->config();
    out += "layer_sizes" + join_sizes(cfg.layer_sizes) + "\n";
    out += "hidden_activation " + std::string(to_string(cfg.hidden_activation)) + "\n";
    out += "output_activation " + std::string(to_string(cfg.output_activation)) + "\n";
    out += "recurrent_layers" + join_sizes({cfg.recurrent_layers.begin(), cfg.recurrent_layers.end()}) + "\n";
    out += "bptt_depth " + std::to_string(cfg.bptt_depth) + "\n";
    out += "init_std " + text::format_double(cfg.init_std) + "\n";
    out += "seed " + std::to_string(cfg.seed) + "\n";
    weights = &net->weights();
  } else {
    const auto* m = policy.baseline();
    out += "layer_sizes" + join_sizes(m->layer_sizes()) + "\n";
    const auto& lay = m->layout();
    out += "window " + std::to_string(lay.steps) + " " + std::to_string(lay.step_dim) + " " +
           std::to_string(lay.static_dim) + "\n";
    out += "seed " + std::to_string(m->seed()) + "\n";
    weights = &m->weights();
  }
  out += "weights " + std::to_string(weights->size()) + "\n";
  for (Eigen::Index i = 0; i < weights->size(); ++i) out += text::format_double((*weights)[i]) + "\n";
  return out;
}

Policy parse_policy(std::string_view content) {
  const auto lines = text::split(content, '\n');
  std::size_t pos = 0;
  auto next = [&]() -> std::string_view {
    while (pos < lines.size() && text::trim(lines[pos]).empty()) ++pos;
    if (pos >= lines.size()) throw Error(ErrorKind::parse, "model file ends early");
    return text::trim(lines[pos++]);
  };
  if (next() != kMagic) throw Error(ErrorKind::parse, "expected '" + std::string(kMagic) + "'");

  std::map<std::string, std::vector<std::string_view>, std::less<>> fields;
  std::vector<std::string_view> weight_header;
  while (true) {
    const std::string_view line = next();
    auto parts = text::split_whitespace(line);
    if (parts.front() == "weights") {
      weight_header = parts;
      break;
    }
    fields[std::string(parts.front())] = parts;
  }
  auto field = [&](const char* key) -> const std::vector<std::string_view>& {
    auto it = fields.find(key);
    if (it == fields.end()) throw Error(ErrorKind::parse, std::string("model file lacks '") + key + "'");
    return it->second;
  };
  auto single = [&](const char* key) -> std::string_view {
    const auto& f = field(key);
    if (f.size() != 2) throw Error(ErrorKind::parse, std::string("model field '") + key + "' needs one value");
    return f[1];
  };

  if (weight_header.size() != 2) throw Error(ErrorKind::parse, "malformed weights line");
  const auto n = static_cast<Eigen::Index>(text::parse_uint(weight_header[1]));
  Vec weights(n);
  for (Eigen::Index i = 0; i < n; ++i) weights[i] = text::parse_double(next());
  while (pos < lines.size()) {
    if (!text::trim(lines[pos++]).empty()) throw Error(ErrorKind::parse, "trailing content after weights");
  }

  const ModelKind kind = model_kind_from_string(single("kind"));
  const auto sizes = parse_sizes(field("layer_sizes"));
  const std::uint64_t seed = text::parse_uint(single("seed"));
  if (kind == ModelKind::kf_rmlp) {
    RmlpConfig cfg;
    cfg.layer_sizes = sizes;
    cfg.hidden_activation = activation_from_string(single("hidden_activation"));
    cfg.output_activation = activation_from_string(single("output_activation"));
    for (std::size_t l : parse_sizes(field("recurrent_layers"))) cfg.recurrent_layers.insert(l);
    cfg.bptt_depth = static_cast<std::size_t>(text::parse_uint(single("bptt_depth")));
    cfg.init_std = text::parse_double(single("init_std"));
    cfg.seed = seed;
    return Policy(RmlpNetwork(std::move(cfg), std::move(weights)));
  }
  const auto& w = field("window");
  if (w.size() != 4) throw Error(ErrorKind::parse, "model field 'window' needs steps, step_dim, static_dim");
  WindowLayout layout{static_cast<std::size_t>(text::parse_uint(w[1])), static_cast<std::size_t>(text::parse_uint(w[2])),
                      static_cast<std::size_t>(text::parse_uint(w[3]))};
  BaselineModel model(cell_kind_of(kind), layout, sizes, seed);
  return Policy(model.with_weights(std::move(weights)));
}

void save_policy(const Policy& policy, const fs::path& file) { text::write_file(file, format_policy(policy)); }

Policy load_policy(const fs::path& file) {
  try {
    return parse_policy(text::read_file(file));
  } catch (const Error& e) {
    throw with_context(e, file.string());
  }
}

void save_bundle(const ModelBundle& bundle, const fs::path& dir) {
  bundle.ensemble.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create '" + dir.string() + "': " + ec.message());

  json members = json::array();
  for (std::size_t i = 0; i < bundle.ensemble.members.size(); ++i) {
    const std::string file = "member_" + std::to_string(i) + ".model";
    save_policy(bundle.ensemble.members[i], dir / file);
    members.push_back({{"file", file}, {"seed", bundle.ensemble.member_seeds[i]}});
  }
  bundle.input_normalizer.save(dir / "normalizer.txt");
  bundle.target_scaler.save(dir / "target_scaler.txt");

  json settings = json::object();
  for (const auto& [k, v] : bundle.settings) settings[k] = v;
  json doc{{"schema", kManifestSchema},
           {"version", kModelManifestVersion},
           {"kind", std::string(to_string(bundle.kind))},
           {"ensemble", bundle.is_ensemble},
           {"z_value", bundle.ensemble.z_value},
           {"window", bundle.window},
           {"input_features", {{"step", bundle.features.step}, {"static", bundle.features.fixed}}},
           {"split_seed", bundle.split_seed},
           {"seed", bundle.seed},
           {"members", members},
           {"input_normalizer", "normalizer.txt"},
           {"target_scaler", "target_scaler.txt"},
           {"settings", settings}};
  text::write_file(dir / kModelManifestName, doc.dump(2) + "\n");
}

ModelBundle load_bundle(const fs::path& dir) {
  const fs::path manifest = dir / kModelManifestName;
  json doc;
  try {
    doc = json::parse(text::read_file(manifest));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, manifest.string() + ": " + e.what());
  }
  try {
    if (doc.at("schema").get<std::string>() != kManifestSchema) {
      throw Error(ErrorKind::parse, manifest.string() + ": not a model manifest");
    }
    if (doc.at("version").get<int>() != kModelManifestVersion) {
      throw Error(ErrorKind::parse, manifest.string() + ": unsupported manifest version");
    }
    ModelBundle b;
    b.kind = model_kind_from_string(doc.at("kind").get<std::string>());
    b.is_ensemble = doc.at("ensemble").get<bool>();
    b.ensemble.z_value = doc.at("z_value").get<double>();
    b.window = doc.at("window").get<std::size_t>();
    b.features.step = doc.at("input_features").at("step").get<std::vector<std::size_t>>();
    b.features.fixed = doc.at("input_features").at("static").get<std::vector<std::size_t>>();
    b.split_seed = doc.at("split_seed").get<std::uint64_t>();
    b.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& m : doc.at("members")) {
      b.ensemble.members.push_back(load_policy(dir / m.at("file").get<std::string>()));
      b.ensemble.member_seeds.push_back(m.at("seed").get<std::uint64_t>());
    }
    b.input_normalizer = Normalizer::load(dir / doc.at("input_normalizer").get<std::string>());
    b.target_scaler = Normalizer::load(dir / doc.at("target_scaler").get<std::string>());
    for (const auto& [k, v] : doc.at("settings").items()) b.settings[k] = v.get<std::string>();
    b.ensemble.validate();
    for (const auto& m : b.ensemble.members) {
      if (m.kind() != b.kind) throw Error(ErrorKind::parse, manifest.string() + ": member kind differs from manifest");
    }
    return b;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, manifest.string() + ": " + e.what());
  }
}

}  // namespace dlfd
