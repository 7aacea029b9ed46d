#include "dlfd/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "dlfd/error.hpp"
#include "dlfd/text_io.hpp"

namespace dlfd {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kDatasetMagic = "# dlfd-dataset v1";
constexpr std::string_view kCalibMagic = "# dlfd-calib v1";

bool unit_quaternion(const Eigen::Vector4d& q) {
  return std::abs(q.norm() - 1.0) <= kUnitQuaternionTolerance;
}

// "th_l3" -> ("th_l", 3); returns false when the name has no numeric suffix.
bool split_column(std::string_view name, std::string& prefix, std::size_t& index) {
  std::size_t cut = name.size();
  while (cut > 0 && std::isdigit(static_cast<unsigned char>(name[cut - 1]))) --cut;
  if (cut == name.size() || cut == 0) return false;
  prefix = std::string(name.substr(0, cut));
  index = static_cast<std::size_t>(text::parse_uint(name.substr(cut)));
  return true;
}

struct Lines {
  explicit Lines(const std::string& content) : content_(content) {}
  bool next(std::string_view& line) {
    if (pos_ >= content_.size()) return false;
    auto end = content_.find('\n', pos_);
    if (end == std::string::npos) end = content_.size();
    line = std::string_view(content_.data() + pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++number_;
    return true;
  }
  std::size_t number() const { return number_; }

 private:
  const std::string& content_;
  std::size_t pos_ = 0;
  std::size_t number_ = 0;
};

template <std::size_t N>
void append_array(std::string& out, const std::array<double, N>& values) {
  for (double v : values) {
    out += ',';
    out += text::format_double(v);
  }
}

std::vector<CalibBlock> load_calib(const fs::path& file) {
  const std::string content = text::read_file(file);
  Lines lines(content);
  std::string_view line;
  std::vector<CalibBlock> out;
  if (!lines.next(line) || text::trim(line) != kCalibMagic) {
    throw Error(ErrorKind::parse, file.string() + ":1: expected '" + std::string(kCalibMagic) + "'");
  }
  while (lines.next(line)) {
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, ',');
    if (fields.size() != kCalibDim) {
      throw Error(ErrorKind::parse, file.string() + ":" + std::to_string(lines.number()) +
                                        ": calibration rows need 12 values");
    }
    CalibBlock block{};
    try {
      for (std::size_t i = 0; i < kCalibDim; ++i) block[i] = text::parse_double(fields[i]);
    } catch (const Error& e) {
      throw with_context(e, file.string() + ":" + std::to_string(lines.number()));
    }
    out.push_back(block);
  }
  return out;
}

}  // namespace

Vec Action::to_vector() const {
  Vec v(7);
  v << dp, q;
  return v;
}

Action Action::from_vector(const Vec& v) {
  if (v.size() != 7) throw Error(ErrorKind::shape, "an action has 7 components");
  Action a;
  a.dp = v.head<3>();
  a.q = v.tail<4>();
  return a;
}

Vec DemonstrationRecord::state_vector() const {
  Vec s(static_cast<Eigen::Index>(kStateDim));
  s << ee_l.p, ee_l.q, ee_r.p, ee_r.q;
  return s;
}

bool DemonstrationRecord::operator==(const DemonstrationRecord& o) const {
  return t == o.t && z.size() == o.z.size() && z == o.z && ee_l == o.ee_l && ee_r == o.ee_r &&
         a == o.a && theta_l == o.theta_l && theta_r == o.theta_r && g == o.g && h == o.h;
}

void Demonstration::validate() const {
  if (records.empty()) throw Error(ErrorKind::input, "demonstration '" + demo_id + "' is empty");
  const auto& first = records.front();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string where = "demonstration '" + demo_id + "' record " + std::to_string(i);
    if (r.t != i) throw Error(ErrorKind::input, where + ": t must run 0,1,2,...");
    if (r.z.size() != first.z.size()) throw Error(ErrorKind::input, where + ": feature width changes");
    if (!all_finite(r.z) || !all_finite(r.state_vector()) || !all_finite(r.a.to_vector())) {
      throw Error(ErrorKind::input, where + ": non-finite value");
    }
    if (!unit_quaternion(r.ee_l.q) || !unit_quaternion(r.ee_r.q) || !unit_quaternion(r.a.q)) {
      throw Error(ErrorKind::input, where + ": quaternion is not unit-norm");
    }
    if (r.theta_l.has_value() != first.theta_l.has_value() ||
        r.theta_r.has_value() != first.theta_r.has_value() || r.g.has_value() != first.g.has_value() ||
        r.h.has_value() != first.h.has_value()) {
      throw Error(ErrorKind::input, where + ": optional fields must be present in every record or none");
    }
  }
}

std::string format_demonstration(const Demonstration& demo) {
  demo.validate();
  const auto& first = demo.records.front();
  const auto nz = static_cast<std::size_t>(first.z.size());
  std::string out(kDatasetMagic);
  out += "\nt";
  for (std::size_t i = 0; i < nz; ++i) out += ",z" + std::to_string(i);
  for (std::size_t i = 0; i < kStateDim; ++i) out += ",s" + std::to_string(i);
  for (std::size_t i = 0; i < kActionDim; ++i) out += ",a" + std::to_string(i);
  if (first.theta_l) for (std::size_t i = 0; i < 6; ++i) out += ",th_l" + std::to_string(i);
  if (first.theta_r) for (std::size_t i = 0; i < 6; ++i) out += ",th_r" + std::to_string(i);
  if (first.g) for (std::size_t i = 0; i < 12; ++i) out += ",g" + std::to_string(i);
  if (first.h) for (std::size_t i = 0; i < 3; ++i) out += ",h" + std::to_string(i);
  out += '\n';

  for (const auto& r : demo.records) {
    out += std::to_string(r.t);
    auto put = [&out](const auto& vec) {
      for (Eigen::Index i = 0; i < vec.size(); ++i) {
        out += ',';
        out += text::format_double(vec[i]);
      }
    };
    put(r.z);
    put(r.state_vector());
    put(r.a.to_vector());
    if (r.theta_l) append_array(out, *r.theta_l);
    if (r.theta_r) append_array(out, *r.theta_r);
    if (r.g) append_array(out, *r.g);
    if (r.h) append_array(out, *r.h);
    out += '\n';
  }
  return out;
}

Demonstration load_demonstration(const fs::path& file) {
  const std::string content = text::read_file(file);
  const std::string name = file.string();
  Lines lines(content);
  std::string_view line;
  if (!lines.next(line) || text::trim(line) != kDatasetMagic) {
    throw Error(ErrorKind::parse, name + ":1: expected version header '" + std::string(kDatasetMagic) + "'");
  }
  if (!lines.next(line)) throw Error(ErrorKind::parse, name + ":2: missing column header");

  const auto header = text::split(line, ',');
  std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> groups;  // prefix -> (index, column)
  std::optional<std::size_t> t_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string_view col = text::trim(header[c]);
    if (col == "t") {
      t_col = c;
      continue;
    }
    std::string prefix;
    std::size_t index = 0;
    if (!split_column(col, prefix, index) ||
        !(prefix == "z" || prefix == "s" || prefix == "a" || prefix == "th_l" || prefix == "th_r" ||
          prefix == "g" || prefix == "h")) {
      throw Error(ErrorKind::parse, name + ":2: unknown column '" + std::string(col) + "'");
    }
    groups[prefix].emplace_back(index, c);
  }
  if (!t_col) throw Error(ErrorKind::parse, name + ":2: missing required column 't'");

  // Resolves a prefix group to columns ordered by index, requiring 0..n-1.
  auto resolve = [&](const std::string& prefix, std::size_t expected,
                     bool required) -> std::optional<std::vector<std::size_t>> {
    auto it = groups.find(prefix);
    std::vector<std::size_t> cols;
    if (it != groups.end()) {
      auto entries = it->second;
      std::sort(entries.begin(), entries.end());
      for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].first != i) {
          throw Error(ErrorKind::parse, name + ":2: missing required column '" + prefix + std::to_string(i) + "'");
        }
        cols.push_back(entries[i].second);
      }
    }
    if (expected > 0 && cols.size() != expected) {
      if (cols.empty() && !required) return std::nullopt;
      if (cols.size() < expected) {
        throw Error(ErrorKind::parse,
                    name + ":2: missing required column '" + prefix + std::to_string(cols.size()) + "'");
      }
      throw Error(ErrorKind::parse, name + ":2: too many '" + prefix + "' columns");
    }
    return cols;
  };

  const auto z_cols = *resolve("z", 0, true);
  const auto s_cols = *resolve("s", kStateDim, true);
  const auto a_cols = *resolve("a", kActionDim, true);
  const auto thl_cols = resolve("th_l", 6, false);
  const auto thr_cols = resolve("th_r", 6, false);
  const auto g_cols = resolve("g", 12, false);
  const auto h_cols = resolve("h", 3, false);

  Demonstration demo;
  demo.demo_id = file.stem().string();
  while (lines.next(line)) {
    if (text::trim(line).empty()) continue;
    const std::string where = name + ":" + std::to_string(lines.number());
    const auto fields = text::split(line, ',');
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::parse, where + ": expected " + std::to_string(header.size()) + " fields, got " +
                                        std::to_string(fields.size()));
    }
    try {
      DemonstrationRecord r;
      r.t = static_cast<std::size_t>(text::parse_uint(fields[*t_col]));
      r.z.resize(static_cast<Eigen::Index>(z_cols.size()));
      for (std::size_t i = 0; i < z_cols.size(); ++i) r.z[static_cast<Eigen::Index>(i)] = text::parse_double(fields[z_cols[i]]);
      double s[kStateDim];
      for (std::size_t i = 0; i < kStateDim; ++i) s[i] = text::parse_double(fields[s_cols[i]]);
      r.ee_l.p = {s[0], s[1], s[2]};
      r.ee_l.q = {s[3], s[4], s[5], s[6]};
      r.ee_r.p = {s[7], s[8], s[9]};
      r.ee_r.q = {s[10], s[11], s[12], s[13]};
      double a[kActionDim];
      for (std::size_t i = 0; i < kActionDim; ++i) a[i] = text::parse_double(fields[a_cols[i]]);
      r.a.dp = {a[0], a[1], a[2]};
      r.a.q = {a[3], a[4], a[5], a[6]};
      auto fill = [&](const std::optional<std::vector<std::size_t>>& cols, auto& target) {
        if (!cols) return;
        typename std::decay_t<decltype(target)>::value_type arr{};
        for (std::size_t i = 0; i < cols->size(); ++i) arr[i] = text::parse_double(fields[(*cols)[i]]);
        target = arr;
      };
      fill(thl_cols, r.theta_l);
      fill(thr_cols, r.theta_r);
      fill(g_cols, r.g);
      fill(h_cols, r.h);
      if (!unit_quaternion(r.ee_l.q) || !unit_quaternion(r.ee_r.q) || !unit_quaternion(r.a.q)) {
        throw Error(ErrorKind::parse, "quaternion is not unit-norm within 1e-9");
      }
      demo.records.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, where + ": " + e.what());
    }
  }

  const fs::path calib = fs::path(file).replace_extension(".calib");
  if (fs::exists(calib)) demo.calib = load_calib(calib);

  try {
    demo.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::parse, name + ": " + e.what());
  }
  return demo;
}

Dataset load_dataset(const fs::path& path) {
  Dataset ds;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) ds.demos.push_back(load_demonstration(f));
    if (ds.demos.empty()) throw Error(ErrorKind::input, "no demonstration files in '" + path.string() + "'");
  } else if (fs::is_regular_file(path)) {
    ds.demos.push_back(load_demonstration(path));
  } else {
    throw Error(ErrorKind::io, "dataset path '" + path.string() + "' does not exist");
  }
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create '" + dir.string() + "': " + ec.message());
  for (const auto& demo : ds.demos) {
    text::write_file(dir / (demo.demo_id + ".csv"), format_demonstration(demo));
    if (!demo.calib.empty()) {
      std::string out(kCalibMagic);
      out += '\n';
      for (const auto& block : demo.calib) {
        for (std::size_t i = 0; i < block.size(); ++i) {
          if (i) out += ',';
          out += text::format_double(block[i]);
        }
        out += '\n';
      }
      text::write_file(dir / (demo.demo_id + ".calib"), out);
    }
  }
}

DatasetSplit split_dataset(const Dataset& ds, std::uint64_t seed) {
  const std::size_t n = ds.demos.size();
  if (n < 5) {
    throw Error(ErrorKind::input, "splitting needs at least 5 demonstrations, got " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n_test = n / 5;  // floor(0.2 n)
  const std::size_t n_train = n - n_test;
  const std::size_t n_val = (n_train * 3) / 10;  // floor(0.3 n_train)

  DatasetSplit split;
  split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                   order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  split.fit.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), order.end());
  std::sort(split.fit.begin(), split.fit.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset out;
  for (std::size_t i : indices) {
    if (i >= ds.demos.size()) throw Error(ErrorKind::input, "demonstration index out of range");
    out.demos.push_back(ds.demos[i]);
  }
  return out;
}

WindowLayout window_layout(const Dataset& ds, std::size_t n) {
  if (ds.demos.empty()) throw Error(ErrorKind::input, "dataset is empty");
  if (n == 0) throw Error(ErrorKind::config, "memory window N must be >= 1");
  const auto& first = ds.demos.front();
  first.validate();
  WindowLayout lay;
  lay.steps = n;
  lay.step_dim = static_cast<std::size_t>(first.records.front().z.size()) + kStateDim;
  lay.static_dim = first.calib.size() * kCalibDim;
  for (const auto& d : ds.demos) {
    d.validate();
    if (static_cast<std::size_t>(d.records.front().z.size()) + kStateDim != lay.step_dim ||
        d.calib.size() * kCalibDim != lay.static_dim) {
      throw Error(ErrorKind::input, "demonstration '" + d.demo_id + "' has a different feature layout");
    }
  }
  return lay;
}

std::vector<SampleSequence> make_windows(const Dataset& ds, std::size_t n) {
  const WindowLayout lay = window_layout(ds, n);
  std::vector<SampleSequence> out;
  out.reserve(ds.demos.size());
  for (const auto& d : ds.demos) {
    const std::size_t len = d.records.size();
    if (len <= n) {
      throw Error(ErrorKind::input, "demonstration '" + d.demo_id + "' has " + std::to_string(len) +
                                        " records; memory window " + std::to_string(n) + " needs at least " +
                                        std::to_string(n + 1));
    }
    Vec calib(static_cast<Eigen::Index>(lay.static_dim));
    for (std::size_t c = 0; c < d.calib.size(); ++c) {
      for (std::size_t i = 0; i < kCalibDim; ++i) calib[static_cast<Eigen::Index>(c * kCalibDim + i)] = d.calib[c][i];
    }
    SampleSequence seq;
    seq.demo_id = d.demo_id;
    seq.samples.reserve(len - n);
    for (std::size_t t = n; t < len; ++t) {
      WindowedSample s;
      s.input.resize(static_cast<Eigen::Index>(lay.flat_dim()));
      Eigen::Index off = 0;
      for (std::size_t k = t - n; k < t; ++k) {
        const auto& r = d.records[k];
        s.input.segment(off, r.z.size()) = r.z;
        off += r.z.size();
        s.input.segment(off, static_cast<Eigen::Index>(kStateDim)) = r.state_vector();
        off += static_cast<Eigen::Index>(kStateDim);
      }
      s.input.tail(static_cast<Eigen::Index>(lay.static_dim)) = calib;
      s.target = d.records[t].a.to_vector();
      s.demo_id = d.demo_id;
      s.t = t;
      seq.samples.push_back(std::move(s));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

FeatureSelection varying_features(const Dataset& ds) {
  const WindowLayout lay = window_layout(ds, 1);
  std::vector<bool> step_varies(lay.step_dim, false), fixed_varies(lay.static_dim, false);
  const Vec first_step = [&] {
    const auto& r = ds.demos.front().records.front();
    Vec v(static_cast<Eigen::Index>(lay.step_dim));
    v << r.z, r.state_vector();
    return v;
  }();
  const auto& first_calib = ds.demos.front().calib;
  for (const auto& d : ds.demos) {
    for (const auto& r : d.records) {
      Vec v(static_cast<Eigen::Index>(lay.step_dim));
      v << r.z, r.state_vector();
      for (std::size_t i = 0; i < lay.step_dim; ++i) {
        if (v[static_cast<Eigen::Index>(i)] != first_step[static_cast<Eigen::Index>(i)]) step_varies[i] = true;
      }
    }
    for (std::size_t c = 0; c < d.calib.size(); ++c) {
      for (std::size_t i = 0; i < kCalibDim; ++i) {
        if (d.calib[c][i] != first_calib[c][i]) fixed_varies[c * kCalibDim + i] = true;
      }
    }
  }
  FeatureSelection sel;
  for (std::size_t i = 0; i < lay.step_dim; ++i)
    if (step_varies[i]) sel.step.push_back(i);
  for (std::size_t i = 0; i < lay.static_dim; ++i)
    if (fixed_varies[i]) sel.fixed.push_back(i);
  if (sel.step.empty() && sel.fixed.empty()) throw Error(ErrorKind::input, "every input feature is constant");
  return sel;
}

std::vector<SampleSequence> select_features(const std::vector<SampleSequence>& seqs, const WindowLayout& layout,
                                            const FeatureSelection& sel, WindowLayout* reduced) {
  for (std::size_t i : sel.step)
    if (i >= layout.step_dim) throw Error(ErrorKind::shape, "selected step feature out of range");
  for (std::size_t i : sel.fixed)
    if (i >= layout.static_dim) throw Error(ErrorKind::shape, "selected static feature out of range");
  WindowLayout out_layout{layout.steps, sel.step.size(), sel.fixed.size()};
  std::vector<SampleSequence> out = seqs;
  for (auto& seq : out) {
    for (auto& s : seq.samples) {
      if (static_cast<std::size_t>(s.input.size()) != layout.flat_dim()) {
        throw Error(ErrorKind::shape, "window width does not match its layout");
      }
      Vec x(static_cast<Eigen::Index>(out_layout.flat_dim()));
      Eigen::Index k = 0;
      for (std::size_t step = 0; step < layout.steps; ++step) {
        for (std::size_t i : sel.step) x[k++] = s.input[static_cast<Eigen::Index>(step * layout.step_dim + i)];
      }
      for (std::size_t i : sel.fixed) x[k++] = s.input[static_cast<Eigen::Index>(layout.steps * layout.step_dim + i)];
      s.input = std::move(x);
    }
  }
  if (reduced) *reduced = out_layout;
  return out;
}

}  // namespace dlfd
