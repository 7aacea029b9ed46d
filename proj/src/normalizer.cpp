#include "dlfd/normalizer.hpp"

#include <cmath>

#include "dlfd/error.hpp"
#include "dlfd/text_io.hpp"

namespace dlfd {

namespace {

constexpr std::string_view kMagic = "dlfd-normalizer v1";

void check_size(const Vec& x, Eigen::Index n) {
  if (x.size() != n) {
    throw Error(ErrorKind::shape,
                "normalizer expects " + std::to_string(n) + " components, got " + std::to_string(x.size()));
  }
}

}  // namespace

Normalizer::Normalizer(Vec mean, Vec std) : mean_(std::move(mean)), std_(std::move(std)) {
  check_size(std_, mean_.size());
  for (Eigen::Index i = 0; i < std_.size(); ++i) {
    if (!std::isfinite(std_[i]) || std_[i] < kMinStd) std_[i] = 1.0;
  }
  if (!all_finite(mean_)) throw Error(ErrorKind::input, "normalizer mean is not finite");
}

Normalizer Normalizer::fit(const std::vector<Vec>& rows) {
  if (rows.empty()) throw Error(ErrorKind::input, "cannot fit a normalizer on zero rows");
  const Eigen::Index d = rows.front().size();
  Vec mean = Vec::Zero(d);
  for (const auto& r : rows) {
    check_size(r, d);
    mean += r;
  }
  mean /= static_cast<double>(rows.size());
  Vec var = Vec::Zero(d);
  for (const auto& r : rows) var += (r - mean).cwiseAbs2();
  var /= static_cast<double>(rows.size());
  return Normalizer(mean, var.cwiseSqrt());
}

Vec Normalizer::apply(const Vec& x) const {
  check_size(x, mean_.size());
  return (x - mean_).cwiseQuotient(std_);
}

Vec Normalizer::invert(const Vec& x) const {
  check_size(x, mean_.size());
  return x.cwiseProduct(std_) + mean_;
}

Vec Normalizer::invert_scale(const Vec& dx) const {
  check_size(dx, mean_.size());
  return dx.cwiseProduct(std_);
}

std::string Normalizer::serialize() const {
  std::string out(kMagic);
  out += "\n" + std::to_string(mean_.size()) + "\n";
  for (Eigen::Index i = 0; i < mean_.size(); ++i) {
    out += text::format_double(mean_[i]) + " " + text::format_double(std_[i]) + "\n";
  }
  return out;
}

Normalizer Normalizer::parse(std::string_view content) {
  std::vector<std::string_view> lines;
  for (auto line : text::split(content, '\n')) {
    if (!text::trim(line).empty()) lines.push_back(text::trim(line));
  }
  if (lines.empty() || lines[0] != kMagic) {
    throw Error(ErrorKind::parse, "normalizer: expected '" + std::string(kMagic) + "'");
  }
  if (lines.size() < 2) throw Error(ErrorKind::parse, "normalizer: missing size");
  const auto n = static_cast<Eigen::Index>(text::parse_uint(lines[1]));
  if (static_cast<Eigen::Index>(lines.size()) != n + 2) {
    throw Error(ErrorKind::parse, "normalizer: expected " + std::to_string(n) + " rows");
  }
  Vec mean(n), sd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto f = text::split_whitespace(lines[static_cast<std::size_t>(i) + 2]);
    if (f.size() != 2) throw Error(ErrorKind::parse, "normalizer: row " + std::to_string(i) + " needs mean and std");
    mean[i] = text::parse_double(f[0]);
    sd[i] = text::parse_double(f[1]);
  }
  return Normalizer(mean, sd);
}

void Normalizer::save(const std::filesystem::path& file) const { text::write_file(file, serialize()); }

Normalizer Normalizer::load(const std::filesystem::path& file) {
  try {
    return parse(text::read_file(file));
  } catch (const Error& e) {
    throw with_context(e, file.string());
  }
}

Normalizer fit_input_normalizer(const std::vector<SampleSequence>& seqs) {
  std::vector<Vec> rows;
  for (const auto& s : seqs)
    for (const auto& x : s.samples) rows.push_back(x.input);
  return Normalizer::fit(rows);
}

Normalizer fit_target_scaler(const std::vector<SampleSequence>& seqs) {
  std::vector<Vec> rows;
  for (const auto& s : seqs)
    for (const auto& x : s.samples) rows.push_back(x.target);
  return Normalizer::fit(rows);
}

std::vector<SampleSequence> normalize(const std::vector<SampleSequence>& seqs, const Normalizer& inputs,
                                      const Normalizer& targets) {
  auto out = seqs;
  for (auto& s : out) {
    for (auto& x : s.samples) {
      x.input = inputs.apply(x.input);
      x.target = targets.apply(x.target);
    }
  }
  return out;
}

}  // namespace dlfd
