// Acceptance gate. Prints one PASS/FAIL line per criterion; `--only N[,M...]`
// restricts the run. Exit status is nonzero when any selected criterion fails.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dlfd/bagging.hpp"
#include "dlfd/baselines.hpp"
#include "dlfd/dataset.hpp"
#include "dlfd/ekf.hpp"
#include "dlfd/metrics.hpp"
#include "dlfd/pipeline.hpp"
#include "dlfd/rmlp.hpp"
#include "dlfd/tasksim.hpp"
#include "dlfd/text_io.hpp"

namespace fs = std::filesystem;
using namespace dlfd;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Vec gaussian(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vec v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

double rel_err(double a, double f) { return std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-6}); }

// --- 1 -------------------------------------------------------------------

Outcome rls_oracle() {
  const auto t0 = Clock::now();
  const Eigen::Index n_in = 4, n_y = 2;
  RmlpConfig rc;
  rc.layer_sizes = {4, 2};
  const RmlpNetwork net(rc);
  EkfConfig cfg;
  cfg.q = 0.0;
  KalmanState f = init_filter(net, cfg);

  std::mt19937_64 rng(2024);
  const Mat a = Mat::NullaryExpr(n_y, n_in, [&] { return std::normal_distribution<double>()(rng); });
  Mat x(200, n_in + 1), y(200, n_y);
  for (int t = 0; t < 200; ++t) {
    const Vec in = gaussian(rng, n_in);
    const Vec out = a * in + gaussian(rng, n_y, 0.1);
    f = ekf_step(std::move(f), net, net.zero_state(), in, out).filter;
    x.row(t) << in.transpose(), 1.0;
    y.row(t) = out.transpose();
  }
  // argmin sum ||y - W x - b||^2 + (epsilon/eta) ||(W, b)||^2, one output at a time.
  const Mat gram = x.transpose() * x + (cfg.epsilon / cfg.eta) * Mat::Identity(n_in + 1, n_in + 1);
  const Mat coef = gram.ldlt().solve(x.transpose() * y);
  Vec want(f.weights.size());
  for (Eigen::Index j = 0; j < n_y; ++j) {
    want.segment(j * n_in, n_in) = coef.col(j).head(n_in);
    want[n_y * n_in + j] = coef(n_in, j);
  }
  const double err = (f.weights - want).cwiseAbs().maxCoeff();
  const double secs = seconds_since(t0);
  return {err < 1e-8 && secs < 1.0, fmt("max |w - w_ls| = %.2e (< 1e-8), %.3f s (< 1 s)", err, secs)};
}

// --- 2 -------------------------------------------------------------------

Outcome scalar_recursion() {
  RmlpConfig rc;
  rc.layer_sizes = {1, 1};
  const RmlpNetwork net(rc);
  EkfConfig cfg;
  cfg.epsilon = 1.0;
  cfg.eta = 1.0;
  cfg.q = 0.0;
  KalmanState f = init_filter(net, cfg);
  f.covariance(1, 1) = 0.0;  // y = w x: the bias never moves
  const double want_w[] = {0.5, 2.0 / 3.0}, want_p[] = {0.5, 1.0 / 3.0};
  double worst = 0.0;
  for (int k = 0; k < 2; ++k) {
    f = ekf_step(std::move(f), net, net.zero_state(), Vec::Ones(1), Vec::Ones(1)).filter;
    worst = std::max({worst, std::abs(f.weights[0] - want_w[k]) / want_w[k],
                      std::abs(f.covariance(0, 0) - want_p[k]) / want_p[k]});
  }
  const double ulps = worst / std::numeric_limits<double>::epsilon();
  return {ulps <= 4.0, fmt("w = %.17g, P = %.17g; worst deviation %.1f ulp (<= 4)", f.weights[0], f.covariance(0, 0), ulps)};
}

// --- 3 -------------------------------------------------------------------

Vec replay(const RmlpNetwork& net, const RecurrentState& state, const Vec& input) {
  RecurrentState s;
  if (state.history.empty()) {
    s.activations = state.activations;
  } else {
    s.activations = state.history.front().activations_before;
    for (const auto& snap : state.history) s = net.forward_step(s, snap.input).next_state;
  }
  return net.forward_step(s, input).output;
}

double rmlp_check(std::mt19937_64& rng, const RmlpConfig& base) {
  RmlpConfig cfg = base;
  cfg.seed = rng();
  const RmlpNetwork net = init_network(cfg);
  RecurrentState state = net.zero_state();
  const auto n_in = static_cast<Eigen::Index>(cfg.layer_sizes.front());
  for (int t = 0; t < 4; ++t) state = net.forward_step(state, gaussian(rng, n_in)).next_state;
  const Vec x = gaussian(rng, n_in);
  const Mat jac = net.output_jacobian(state, x);
  const double h = 1e-6;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < jac.rows(); ++i) {
    Vec wp = net.weights(), wm = net.weights();
    wp[i] += h;
    wm[i] -= h;
    const Vec d = (replay(net.with_weights(wp), state, x) - replay(net.with_weights(wm), state, x)) / (2 * h);
    for (Eigen::Index j = 0; j < jac.cols(); ++j) worst = std::max(worst, rel_err(jac(i, j), d[j]));
  }
  return worst;
}

double baseline_check(std::mt19937_64& rng, CellKind kind, const WindowLayout& layout, std::size_t hidden) {
  const auto sizes = BaselineModel::default_layer_sizes(kind, layout, hidden, 2);
  const BaselineModel model = init_baseline(kind, layout, sizes, 0.5, rng());
  std::vector<WindowedSample> batch(3);
  std::vector<const WindowedSample*> ptrs;
  for (auto& s : batch) {
    s.input = gaussian(rng, static_cast<Eigen::Index>(layout.flat_dim()));
    s.target = gaussian(rng, 2);
    ptrs.push_back(&s);
  }
  Vec grad;
  batch_loss(model, ptrs, 0.0, &grad);
  const double h = 1e-6;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    Vec wp = model.weights(), wm = model.weights();
    wp[i] += h;
    wm[i] -= h;
    const double d =
        (batch_loss(model.with_weights(wp), ptrs, 0.0, nullptr) - batch_loss(model.with_weights(wm), ptrs, 0.0, nullptr)) /
        (2 * h);
    worst = std::max(worst, rel_err(grad[i], d));
  }
  return worst;
}

Outcome derivative_checks() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  std::vector<RmlpConfig> archs;
  for (std::size_t bptt : {1u, 2u, 3u, 5u}) {
    for (Activation act : {Activation::tanh, Activation::logistic}) {
      RmlpConfig c = RmlpConfig::elman(5, 6, 3);
      c.bptt_depth = bptt;
      c.hidden_activation = act;
      c.init_std = 0.6;
      archs.push_back(c);
      RmlpConfig deep;
      deep.layer_sizes = {3, 5, 4, 2};
      deep.recurrent_layers = {1, 2};
      deep.bptt_depth = bptt;
      deep.hidden_activation = act;
      deep.init_std = 0.6;
      archs.push_back(deep);
    }
  }
  double worst_rmlp = 0.0;
  int n_rmlp = 0;
  for (int rep = 0; rep < 3; ++rep)
    for (const auto& a : archs) {
      worst_rmlp = std::max(worst_rmlp, rmlp_check(rng, a));
      ++n_rmlp;
    }
  std::map<CellKind, double> worst_cell;
  int n_cell = 0;
  for (CellKind kind : {CellKind::feedforward, CellKind::simple_rnn, CellKind::gru, CellKind::lstm}) {
    for (int rep = 0; rep < 20; ++rep) {
      const WindowLayout layout{1 + static_cast<std::size_t>(rep % 3), 3, static_cast<std::size_t>(rep % 2) * 2};
      worst_cell[kind] = std::max(worst_cell[kind], baseline_check(rng, kind, layout, 3 + rep % 3));
      ++n_cell;
    }
  }
  double worst = worst_rmlp;
  for (const auto& [k, v] : worst_cell) worst = std::max(worst, v);
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 30.0,
          fmt("RMLP %d instances worst %.1e; FF/RNN/GRU/LSTM 20 each worst %.1e/%.1e/%.1e/%.1e (< 1e-4); %.1f s (< 30 s)",
              n_rmlp, worst_rmlp, worst_cell[CellKind::feedforward], worst_cell[CellKind::simple_rnn],
              worst_cell[CellKind::gru], worst_cell[CellKind::lstm], secs)};
}

// --- 4, 5 ----------------------------------------------------------------

// 60 demonstrations for dataset seed s; demo i uses simulator seed 1000 s + i.
Dataset needle_dataset(int s) {
  Dataset ds;
  for (int i = 0; i < 60; ++i) {
    SimConfig c;
    c.seed = static_cast<std::uint64_t>(s * 1000 + i);
    c.noise_std = 1e-5;
    Demonstration d = simulate_demo(c);
    d.demo_id = fmt("demo_%03d", i);
    ds.demos.push_back(std::move(d));
  }
  return ds;
}

const std::vector<double>& grid_for(ModelKind kind) {
  static const std::vector<double> q_grid{0.01, 0.001, 1e-4, 0.0};
  static const std::vector<double> l1_grid{0.1, 0.01, 0.001, 0.0};
  return kind == ModelKind::kf_rmlp ? q_grid : l1_grid;
}

TrainRequest request(ModelKind kind, int s, double hyper) {
  TrainRequest req;
  req.spec.kind = kind;
  req.window = 3;
  req.seed = static_cast<std::uint64_t>(s);
  req.split_seed = static_cast<std::uint64_t>(s);
  req.spec.ekf.q = hyper;
  req.spec.optim.l1_lambda = hyper;
  return req;
}

struct Selected {
  double hyper = 0;
  double val_loss = 0;
  double test_loss = 0;  // standardized units
  double test_loss_physical = 0;
};

// Picks the grid value with the lowest validation Loss; reports its test Loss.
Selected select_on_validation(const PreparedData& data, ModelKind kind, int s) {
  Selected best;
  best.val_loss = std::numeric_limits<double>::infinity();
  for (double h : grid_for(kind)) {
    const TrainOutcome out = train_on_prepared(data, request(kind, s, h));
    const double val = evaluate_bundle(out.bundle, data.val, "v").report.standardized->loss;
    if (val < best.val_loss) {
      const MetricsReport test = evaluate_bundle(out.bundle, data.test, "t").report;
      best = {h, val, test.standardized->loss, test.stats.loss};
    }
  }
  return best;
}

Outcome ordering_claim() {
  const auto t0 = Clock::now();
  const ModelKind kinds[] = {ModelKind::kf_rmlp, ModelKind::rnn, ModelKind::feedforward, ModelKind::gru, ModelKind::lstm};
  std::map<ModelKind, std::vector<double>> test;
  std::ostringstream per_seed;
  for (int s = 1; s <= 3; ++s) {
    const PreparedData data = prepare_data(needle_dataset(s), 3, static_cast<std::uint64_t>(s));
    per_seed << " seed" << s << "[";
    for (ModelKind k : kinds) {
      const Selected sel = select_on_validation(data, k, s);
      test[k].push_back(sel.test_loss);
      per_seed << fmt("%s %.5f@%g ", std::string(to_string(k)).c_str(), sel.test_loss, sel.hyper);
    }
    per_seed.seekp(-1, std::ios_base::cur);
    per_seed << "]";
  }
  std::map<ModelKind, double> med;
  for (auto& [k, v] : test) med[k] = median(v);
  const bool kf_le_rnn = med[ModelKind::kf_rmlp] <= med[ModelKind::rnn];
  const bool rnn_le_ff = med[ModelKind::rnn] <= med[ModelKind::feedforward];
  bool recurrent_beat_ff = true;
  for (ModelKind k : {ModelKind::kf_rmlp, ModelKind::rnn, ModelKind::gru, ModelKind::lstm})
    recurrent_beat_ff = recurrent_beat_ff && med[k] < med[ModelKind::feedforward];
  const double secs = seconds_since(t0);
  const bool pass = kf_le_rnn && rnn_le_ff && recurrent_beat_ff && secs < 600.0;
  return {pass, fmt("median standardized test Loss kf_rmlp %.5f rnn %.5f feedforward %.5f gru %.5f lstm %.5f; "
                    "kf<=rnn %s, rnn<=ff %s, all recurrent<ff %s; %.0f s (< 600 s);",
                    med[ModelKind::kf_rmlp], med[ModelKind::rnn], med[ModelKind::feedforward], med[ModelKind::gru],
                    med[ModelKind::lstm], kf_le_rnn ? "yes" : "no", rnn_le_ff ? "yes" : "no",
                    recurrent_beat_ff ? "yes" : "no", secs) +
                    per_seed.str()};
}

Outcome bagging_claims() {
  // Part 1: i.i.d. weak learners with variance sigma^2 = 4.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> learner(1.0, 2.0);
  std::ostringstream law;
  bool law_ok = true;
  for (std::size_t m : {2u, 4u, 5u}) {
    double sum = 0, sq = 0;
    std::vector<Vec> outs(m);
    for (int t = 0; t < 10000; ++t) {
      for (auto& v : outs) v = Vec::Constant(1, learner(rng));
      const double mean = aggregate(outs, 1.96).mean[0];
      sum += mean;
      sq += mean * mean;
    }
    const double var = sq / 10000 - (sum / 10000) * (sum / 10000);
    const double want = 4.0 / static_cast<double>(m);
    const double rel = std::abs(var - want) / want;
    law_ok = law_ok && rel < 0.10;
    law << fmt("m=%zu var %.4f vs %.4f (%.1f%%) ", m, var, want, 100 * rel);
  }

  // Part 2: GRU ensemble of 5 against the single GRU, both at the GRU's
  // validation-selected L1 weight.
  std::vector<double> single, ensemble;
  for (int s = 1; s <= 3; ++s) {
    const PreparedData data = prepare_data(needle_dataset(s), 3, static_cast<std::uint64_t>(s));
    const Selected sel = select_on_validation(data, ModelKind::gru, s);
    single.push_back(sel.test_loss);
    TrainRequest req = request(ModelKind::gru, s, sel.hyper);
    req.ensemble_size = 5;
    req.workers = 1;
    if (const char* w = std::getenv("DLFD_WORKERS")) req.workers = std::max(1, std::atoi(w));
    const TrainOutcome out = train_on_prepared(data, req);
    ensemble.push_back(evaluate_bundle(out.bundle, data.test, "e").report.standardized->loss);
  }
  const double ms = median(single), me = median(ensemble);
  const bool ens_ok = me <= ms;
  return {law_ok && ens_ok,
          law.str() + fmt("(< 10%%); median standardized test Loss GRU-ensemble %.5f vs GRU %.5f "
                          "(per seed %.5f/%.5f %.5f/%.5f %.5f/%.5f)",
                          me, ms, ensemble[0], single[0], ensemble[1], single[1], ensemble[2], single[2])};
}

// --- 6 -------------------------------------------------------------------

Outcome metric_correctness() {
  Mat p(1, 3);
  p << 0.1, 0.0, -0.02;
  const ErrorStats ex = regression_metrics(p, Mat::Zero(1, 3)).stats;
  const bool example_ok = std::abs(ex.mae - 0.1) < 1e-12 && std::abs(ex.ae - 0.04) < 1e-12 &&
                          std::abs(ex.loss - 0.0104 / 3) < 1e-12 && std::abs(ex.pct_gt_threshold - 200.0 / 3) < 1e-12;

  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> dim(1, 20);
  std::normal_distribution<double> nd(0.0, 0.02);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int rows = dim(rng), cols = dim(rng);
    const Mat a = Mat::NullaryExpr(rows, cols, [&] { return nd(rng); });
    const Mat b = Mat::NullaryExpr(rows, cols, [&] { return nd(rng); });
    double mae = 0, sum = 0, sq = 0;
    long above = 0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const double e = std::abs(a(r, c) - b(r, c));
        mae = std::max(mae, e);
        sum += e;
        sq += e * e;
        above += e > 0.01;
      }
    const double n = rows * cols;
    const ErrorStats got = regression_metrics(a, b).stats;
    const bool same = got.mae == mae && got.pct_gt_threshold == 100.0 * static_cast<double>(above) / n &&
                      got.ae == sum / n && got.loss == sq / n;
    mismatches += !same;
  }
  return {example_ok && mismatches == 0,
          fmt("example mae %.17g ae %.17g loss %.17g pct %.17g; brute-force mismatches %d/1000", ex.mae, ex.ae,
              ex.loss, ex.pct_gt_threshold, mismatches)};
}

// --- 7 -------------------------------------------------------------------

Outcome simulator_competence() {
  const auto t0 = Clock::now();
  int competent = 0, ablation_worse = 0;
  double worst = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    SimConfig c;
    c.seed = s;
    const SimResult with = simulate(c);
    c.expert_gain = 0.0;
    const SimResult frozen = simulate(c);
    competent += with.final_exit_error < 0.01 * c.needle_radius;
    ablation_worse += frozen.final_exit_error > with.final_exit_error;
    worst = std::max(worst, with.final_exit_error);
  }
  const double secs = seconds_since(t0);
  return {competent >= 95 && ablation_worse >= 95 && secs < 120.0,
          fmt("exit error < 1%% of radius in %d/100 (worst %.2e m); frozen arm worse in %d/100; %.1f s (< 120 s)",
              competent, worst, ablation_worse, secs)};
}

// --- 8 -------------------------------------------------------------------

int shell(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == "runs.jsonl") continue;
    files[fs::relative(e.path(), root).string()] = text::read_file(e.path());
  }
  return files;
}

Outcome pipeline_determinism() {
  const fs::path base = fs::temp_directory_path() / fmt("dlfd_accept_%lld", static_cast<long long>(
                                                                                  Clock::now().time_since_epoch().count()));
  const std::string exe = DLFD_CLI_PATH;
  std::vector<std::map<std::string, std::string>> runs;
  // Same commands, same paths, run twice from scratch.
  for (int k = 0; k < 2; ++k) {
    const fs::path dir = base / "run";
    fs::remove_all(dir);
    const std::string d = (dir / "data").string(), m = (dir / "model").string(), e = (dir / "eval").string(),
                      m2 = (dir / "ens").string(), e2 = (dir / "eval_ens").string();
    const int rc = shell(exe + " simulate --demos 8 --steps 40 --seed 11 --out " + d) |
                   shell(exe + " train --model kf_rmlp --hidden 6 --data " + d + " --out " + m + " --seed 2") |
                   shell(exe + " eval --model-dir " + m + " --data " + d + " --out " + e) |
                   shell(exe + " train --model lstm --hidden 4 --epochs 2 --ensemble 3 --workers 3 --data " + d +
                         " --out " + m2 + " --seed 2") |
                   shell(exe + " eval --model-dir " + m2 + " --data " + d + " --out " + e2);
    if (rc != 0) {
      fs::remove_all(base);
      return {false, "a pipeline command failed"};
    }
    runs.push_back(snapshot(dir));
  }
  fs::remove_all(base);
  std::size_t differing = 0;
  for (const auto& [name, bytes] : runs[0]) differing += !runs[1].count(name) || runs[1].at(name) != bytes;
  const bool same_set = runs[0].size() == runs[1].size();
  return {differing == 0 && same_set && !runs[0].empty(),
          fmt("%zu artifacts compared, %zu differ (runs.jsonl excluded)", runs[0].size(), differing)};
}

// --- 9 -------------------------------------------------------------------

Outcome split_arithmetic() {
  Dataset ds;
  for (int i = 0; i < 60; ++i) {
    Demonstration d;
    d.demo_id = fmt("d%02d", i);
    d.records.resize(2);
    d.records[1].t = 1;
    for (auto& r : d.records) r.z = Vec::Zero(1);
    ds.demos.push_back(std::move(d));
  }
  bool ok = true;
  std::set<std::size_t> seen;
  for (std::uint64_t seed : {0u, 1u, 2u, 3u}) {
    const DatasetSplit s = split_dataset(ds, seed);
    ok = ok && s.test.size() == 12 && s.val.size() == 14 && s.fit.size() == 34;
    std::set<std::size_t> all(s.fit.begin(), s.fit.end());
    all.insert(s.val.begin(), s.val.end());
    all.insert(s.test.begin(), s.test.end());
    ok = ok && all.size() == 60;
  }
  const DatasetSplit s = split_dataset(ds, 0);
  return {ok, fmt("test/val/fit = %zu/%zu/%zu (want 12/14/34), disjoint and covering for 4 seeds", s.test.size(),
                  s.val.size(), s.fit.size())};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "RLS oracle", rls_oracle},
      {2, "scalar Kalman recursion", scalar_recursion},
      {3, "Jacobian and gradient checks", derivative_checks},
      {4, "ordering on the needle task", ordering_claim},
      {5, "bagging variance and GRU ensemble", bagging_claims},
      {6, "metric correctness", metric_correctness},
      {7, "simulator expert competence", simulator_competence},
      {8, "pipeline determinism", pipeline_determinism},
      {9, "split arithmetic", split_arithmetic},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--only" && i + 1 < argc) {
      std::stringstream ids(argv[++i]);
      for (std::string tok; std::getline(ids, tok, ',');) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: acceptance [--only N[,M...]]\n";
      return 2;
    }
  }
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << c.id << " [" << (o.pass ? "PASS" : "FAIL") << "] " << c.name << ": " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
