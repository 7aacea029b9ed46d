#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "dlfd/error.hpp"
#include "dlfd/metrics.hpp"
#include "dlfd/text_io.hpp"
#include "support.hpp"

using namespace dlfd;
using dlfd::testing::random_unit_quaternion;
using dlfd::testing::TempDir;

namespace {

// Plain loops over every element, accumulated in row-major order.
ErrorStats brute_force(const Mat& p, const Mat& y, double threshold) {
  ErrorStats s;
  double sum = 0, sq = 0;
  long above = 0;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      const double e = std::abs(p(r, c) - y(r, c));
      s.mae = std::max(s.mae, e);
      sum += e;
      sq += e * e;
      if (e > threshold) ++above;
    }
  }
  const double n = static_cast<double>(p.size());
  s.ae = sum / n;
  s.loss = sq / n;
  s.pct_gt_threshold = 100.0 * static_cast<double>(above) / n;
  return s;
}

Eigen::Vector4d about_z(double angle) { return {std::cos(angle / 2), 0, 0, std::sin(angle / 2)}; }

}  // namespace

TEST_CASE("hand example") {
  Mat p(1, 3);
  p << 0.1, 0.0, -0.02;
  const MetricsReport r = regression_metrics(p, Mat::Zero(1, 3));
  CHECK(std::abs(r.stats.mae - 0.1) < 1e-12);
  CHECK(std::abs(r.stats.ae - 0.04) < 1e-12);
  CHECK(std::abs(r.stats.loss - 0.0104 / 3.0) < 1e-12);
  CHECK(std::abs(r.stats.loss - 0.0034667) < 1e-7);
  CHECK(std::abs(r.stats.pct_gt_threshold - 200.0 / 3.0) < 1e-12);
  CHECK(r.sample_count == 1);
}

TEST_CASE("threshold is strict and identical inputs give zeros") {
  const Mat y = Mat::Constant(4, 2, 0.5);
  const MetricsReport zero = regression_metrics(y, y);
  CHECK(zero.stats == ErrorStats{});
  // 0.25 and 0.125 are exact in binary, so every error is exactly 0.125.
  const MetricsReport edge = regression_metrics(Mat::Constant(4, 2, 0.375), Mat::Constant(4, 2, 0.25), 0.125);
  CHECK(edge.stats.mae == 0.125);
  CHECK(edge.stats.pct_gt_threshold == 0.0);
}

TEST_CASE("metrics agree with a brute-force scan") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> dim(1, 12);
  std::normal_distribution<double> nd(0.0, 0.02);
  for (int trial = 0; trial < 1000; ++trial) {
    const int rows = dim(rng), cols = dim(rng);
    const Mat p = Mat::NullaryExpr(rows, cols, [&] { return nd(rng); });
    const Mat y = Mat::NullaryExpr(rows, cols, [&] { return nd(rng); });
    const ErrorStats want = brute_force(p, y, 0.01);
    const ErrorStats got = regression_metrics(p, y).stats;
    REQUIRE(got.mae == want.mae);
    REQUIRE(got.pct_gt_threshold == want.pct_gt_threshold);
    REQUIRE(got.ae == want.ae);
    REQUIRE(got.loss == want.loss);
  }
}

TEST_CASE("shape and emptiness errors") {
  CHECK_THROWS_AS(regression_metrics(Mat::Zero(2, 3), Mat::Zero(3, 2)), Error);
  try {
    regression_metrics(Mat::Zero(0, 3), Mat::Zero(0, 3));
    FAIL("expected an input error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::input);
  }
}

TEST_CASE("quaternion distance") {
  const Eigen::Vector4d id(1, 0, 0, 0);
  CHECK(quaternion_distance(id, id) == 0.0);
  CHECK(quaternion_distance(id, -id) == 0.0);
  CHECK(quaternion_distance(id, about_z(std::numbers::pi / 2)) == doctest::Approx(std::numbers::pi / 2));
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector4d a = random_unit_quaternion(rng), b = random_unit_quaternion(rng),
                          c = random_unit_quaternion(rng);
    const double ab = quaternion_distance(a, b);
    CHECK(ab >= 0.0);
    CHECK(ab <= std::numbers::pi + 1e-12);
    CHECK(ab == quaternion_distance(b, a));
    CHECK(ab == doctest::Approx(quaternion_distance(a, -b)));
    // Rotation angle is a metric on SO(3).
    CHECK(quaternion_distance(a, c) <= ab + quaternion_distance(b, c) + 1e-9);
  }
  CHECK_THROWS_AS(quaternion_distance(id, Eigen::Vector4d(1, 0, 0, 0.01)), Error);
}

TEST_CASE("pose error") {
  Action a;
  Action b = a;
  CHECK(pose_error(a, b) == 0.0);
  b.dp = Eigen::Vector3d(0.3, 0.4, 0.0);
  CHECK(pose_error(a, b) == doctest::Approx(0.5));
  b = a;
  b.q = about_z(std::numbers::pi / 2);
  CHECK(pose_error(a, b) == doctest::Approx(std::numbers::pi / 2));
}

TEST_CASE("report round trip") {
  TempDir dir("metrics");
  MetricsReport a = regression_metrics(Mat::Constant(2, 2, 0.3), Mat::Zero(2, 2));
  a.model_name = "gru";
  a.pose_error_mean = 0.125;
  a.standardized = ErrorStats{1.0, 0.5, 0.25, 10.0};
  MetricsReport b = regression_metrics(Mat::Constant(3, 1, 0.1), Mat::Zero(3, 1));
  b.model_name = "kf_rmlp";
  export_report({a, b}, dir / "r.json");
  const auto back = load_report(dir / "r.json");
  REQUIRE(back.size() == 2);
  CHECK(back[0] == a);
  CHECK(back[1] == b);
  CHECK(report_columns() == std::vector<std::string>{"Model", "MAE", "AE", "Loss", "E>0.01"});
  CHECK_THROWS_AS(format_report({}), Error);
}

TEST_CASE("report parse errors") {
  MetricsReport a = regression_metrics(Mat::Ones(1, 1), Mat::Zero(1, 1));
  std::string text = format_report({a});
  const auto pos = text.find("\"version\": 1");
  REQUIRE(pos != std::string::npos);
  std::string future = text;
  future.replace(pos, 12, "\"version\": 2");
  try {
    parse_report(future);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parse);
    CHECK(std::string(e.what()).find("version 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_report("{"), Error);
  CHECK_THROWS_AS(parse_report("{\"schema\": \"other\", \"version\": 1}"), Error);
  CHECK_THROWS_AS(load_report("/nonexistent/dir/r.json"), Error);
}

TEST_CASE("trajectory export has one row per timestep") {
  TrajectoryRow r{"demo_001", 4, Vec::Ones(2), Vec::Zero(2), Vec::Constant(2, -1), Vec::Constant(2, 1)};
  const std::string csv = format_trajectories({r, r});
  const auto lines = text::split(text::trim(csv), '\n');
  REQUIRE(lines.size() == 3);
  CHECK(std::string(lines[0]).rfind("demo_id,t,", 0) == 0);
  CHECK(text::split(lines[0], ',').size() == 2 + 4 * 2);
  CHECK(std::string(lines[1]).rfind("demo_001,4,", 0) == 0);
}
