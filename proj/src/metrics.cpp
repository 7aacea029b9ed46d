#include "dlfd/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "dlfd/error.hpp"
#include "dlfd/text_io.hpp"

namespace dlfd {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kSchema = "dlfd-report";

json stats_json(const ErrorStats& s) {
  return json{{"MAE", s.mae}, {"AE", s.ae}, {"Loss", s.loss}, {"E>0.01", s.pct_gt_threshold}};
}

ErrorStats stats_from(const json& j) {
  ErrorStats s;
  s.mae = j.at("MAE").get<double>();
  s.ae = j.at("AE").get<double>();
  s.loss = j.at("Loss").get<double>();
  s.pct_gt_threshold = j.at("E>0.01").get<double>();
  return s;
}

void check_unit(const Eigen::Vector4d& q) {
  if (!q.allFinite() || std::abs(q.norm() - 1.0) > 1e-6) {
    throw Error(ErrorKind::input, "quaternion is not unit-norm within 1e-6");
  }
}

}  // namespace

MetricsReport regression_metrics(const Mat& preds, const Mat& targets, double threshold) {
  if (preds.rows() != targets.rows() || preds.cols() != targets.cols()) {
    throw Error(ErrorKind::shape, "predictions are " + std::to_string(preds.rows()) + "x" +
                                      std::to_string(preds.cols()) + " but targets are " +
                                      std::to_string(targets.rows()) + "x" + std::to_string(targets.cols()));
  }
  if (preds.size() == 0) throw Error(ErrorKind::input, "metrics need at least one element");
  // Sequential sums in sample order so results do not depend on vectorization.
  double max_abs = 0, sum_abs = 0, sum_sq = 0;
  std::size_t above = 0;
  for (Eigen::Index i = 0; i < preds.rows(); ++i) {
    for (Eigen::Index j = 0; j < preds.cols(); ++j) {
      const double e = std::abs(preds(i, j) - targets(i, j));
      max_abs = std::max(max_abs, e);
      sum_abs += e;
      sum_sq += e * e;
      if (e > threshold) ++above;
    }
  }
  const auto n = static_cast<double>(preds.size());
  MetricsReport r;
  r.threshold = threshold;
  r.sample_count = static_cast<std::size_t>(preds.rows());
  r.stats.mae = max_abs;
  r.stats.ae = sum_abs / n;
  r.stats.loss = sum_sq / n;
  r.stats.pct_gt_threshold = 100.0 * static_cast<double>(above) / n;
  return r;
}

double quaternion_distance(const Eigen::Vector4d& q1, const Eigen::Vector4d& q2) {
  check_unit(q1);
  check_unit(q2);
  return 2.0 * std::acos(std::min(1.0, std::abs(q1.dot(q2))));
}

double pose_error(const Action& pred, const Action& truth) {
  return (pred.dp - truth.dp).norm() + quaternion_distance(pred.q, truth.q);
}

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> columns{"Model", "MAE", "AE", "Loss", "E>0.01"};
  return columns;
}

std::string format_report(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw Error(ErrorKind::input, "a report needs at least one model");
  json models = json::array();
  for (const auto& r : reports) {
    json m{{"Model", r.model_name}};
    m.update(stats_json(r.stats));
    m["threshold"] = r.threshold;
    m["pose_error_mean"] = r.pose_error_mean ? json(*r.pose_error_mean) : json(nullptr);
    m["sample_count"] = r.sample_count;
    m["standardized"] = r.standardized ? stats_json(*r.standardized) : json(nullptr);
    models.push_back(std::move(m));
  }
  json doc{{"schema", kSchema}, {"version", kReportVersion}, {"columns", report_columns()}, {"models", models}};
  return doc.dump(2) + "\n";
}

std::vector<MetricsReport> parse_report(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("report is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("schema").get<std::string>() != kSchema) throw Error(ErrorKind::parse, "not a report file");
    const int version = doc.at("version").get<int>();
    if (version != kReportVersion) {
      throw Error(ErrorKind::parse, "report schema version " + std::to_string(version) + " is not supported (expected " +
                                        std::to_string(kReportVersion) + ")");
    }
    std::vector<MetricsReport> out;
    for (const auto& m : doc.at("models")) {
      MetricsReport r;
      r.model_name = m.at("Model").get<std::string>();
      r.stats = stats_from(m);
      r.threshold = m.at("threshold").get<double>();
      if (!m.at("pose_error_mean").is_null()) r.pose_error_mean = m.at("pose_error_mean").get<double>();
      r.sample_count = m.at("sample_count").get<std::size_t>();
      if (!m.at("standardized").is_null()) r.standardized = stats_from(m.at("standardized"));
      out.push_back(std::move(r));
    }
    if (out.empty()) throw Error(ErrorKind::parse, "report has no models");
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("malformed report: ") + e.what());
  }
}

void export_report(const std::vector<MetricsReport>& reports, const std::filesystem::path& path) {
  text::write_file(path, format_report(reports));
}

std::vector<MetricsReport> load_report(const std::filesystem::path& path) {
  try {
    return parse_report(text::read_file(path));
  } catch (const Error& e) {
    throw with_context(e, path.string());
  }
}

std::string format_trajectories(const std::vector<TrajectoryRow>& rows) {
  if (rows.empty()) throw Error(ErrorKind::input, "no trajectory rows");
  const Eigen::Index d = rows.front().truth.size();
  std::string out = "demo_id,t";
  for (const char* name : {"truth", "pred", "ci_low", "ci_high"}) {
    for (Eigen::Index i = 0; i < d; ++i) out += "," + std::string(name) + std::to_string(i);
  }
  out += '\n';
  for (const auto& r : rows) {
    if (r.truth.size() != d || r.prediction.size() != d || r.ci_low.size() != d || r.ci_high.size() != d) {
      throw Error(ErrorKind::shape, "trajectory rows have inconsistent widths");
    }
    out += r.demo_id + "," + std::to_string(r.t);
    for (const Vec* v : {&r.truth, &r.prediction, &r.ci_low, &r.ci_high}) {
      for (Eigen::Index i = 0; i < d; ++i) out += "," + text::format_double((*v)[i]);
    }
    out += '\n';
  }
  return out;
}

void export_trajectories(const std::vector<TrajectoryRow>& rows, const std::filesystem::path& path) {
  text::write_file(path, format_trajectories(rows));
}

}  // namespace dlfd
