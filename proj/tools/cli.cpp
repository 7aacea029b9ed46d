#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "dlfd/dataset.hpp"
#include "dlfd/error.hpp"
#include "dlfd/metrics.hpp"
#include "dlfd/model_io.hpp"
#include "dlfd/pipeline.hpp"
#include "dlfd/tasksim.hpp"
#include "dlfd/text_io.hpp"

namespace dlfd::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

fs::path resolve_out(const std::string& out) {
  const fs::path p(out);
  if (const char* root = std::getenv("DLFD_OUT_ROOT"); root && *root && p.is_relative()) return fs::path(root) / p;
  return p;
}

std::size_t default_workers() {
  if (const char* w = std::getenv("DLFD_WORKERS"); w && *w) {
    try {
      return std::max<std::size_t>(1, static_cast<std::size_t>(text::parse_uint(w)));
    } catch (const Error&) {
      throw UsageError("DLFD_WORKERS must be a positive integer");
    }
  }
  return 1;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create '" + dir.string() + "': " + ec.message());
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

/// Appends one line to <out>/runs.jsonl.
class RunRecorder {
 public:
  RunRecorder(std::string command, fs::path out_dir)
      : command_(std::move(command)), out_dir_(std::move(out_dir)), start_(std::chrono::steady_clock::now()) {}

  json config = json::object();
  json seeds = json::object();
  json inputs = json::array();
  std::vector<fs::path> outputs;

  void write() const {
    json hashes = json::object();
    json outs = json::array();
    for (const auto& p : outputs) {
      outs.push_back(p.string());
      hashes[p.string()] = text::fnv1a_hex(text::read_file(p));
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json rec{{"command", command_}, {"config", config},         {"seeds", seeds},
             {"inputs", inputs},    {"outputs", outs},          {"artifact_hashes", hashes},
             {"started_at", started_}, {"duration_s", seconds}};
    const fs::path log = out_dir_ / "runs.jsonl";
    std::string existing;
    if (fs::exists(log)) existing = text::read_file(log);
    text::write_file(log, existing + rec.dump() + "\n");
  }

 private:
  std::string command_;
  fs::path out_dir_;
  std::chrono::steady_clock::time_point start_;
  std::string started_ = utc_now();
};

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::size_t demos = 60;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t steps = 140;
  double noise_std = 1e-5;
  double expert_gain = SimConfig{}.expert_gain;
  std::size_t workers = 0;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& err) {
  const fs::path out = resolve_out(a.out);
  SimConfig base;
  base.steps = a.steps;
  base.noise_std = a.noise_std;
  base.expert_gain = a.expert_gain;
  base.validate();
  make_dir(out);

  const std::size_t workers = a.workers > 0 ? a.workers : default_workers();
  std::vector<std::optional<SimResult>> results(a.demos);
  std::vector<std::string> failures(a.demos);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < a.demos; i = next++) {
      SimConfig cfg = base;
      cfg.seed = splitmix64(a.seed + i);
      try {
        results[i] = simulate(cfg);
        results[i]->demo.demo_id = [&] {
          std::ostringstream s;
          s << "demo_" << std::setw(3) << std::setfill('0') << i;
          return s.str();
        }();
      } catch (const Error& e) {
        failures[i] = "demo " + std::to_string(i) + ": " + e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(workers, a.demos); ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& f : failures) {
    if (!f.empty()) throw Error(ErrorKind::simulation, f);
  }

  RunRecorder rec("simulate", out);
  Dataset ds;
  json demo_rows = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto& r = results[i];
    demo_rows.push_back({{"demo_id", r->demo.demo_id},
                         {"seed", splitmix64(a.seed + i)},
                         {"final_exit_error", r->final_exit_error}});
    ds.demos.push_back(std::move(r->demo));
  }
  save_dataset(ds, out);
  json manifest{{"schema", "dlfd-sim-manifest"},
                {"version", 1},
                {"demos", a.demos},
                {"seed", a.seed},
                {"steps", a.steps},
                {"noise_std", a.noise_std},
                {"expert_gain", a.expert_gain},
                {"feature_dim", feature_dim(base)},
                {"records", demo_rows}};
  text::write_file(out / "sim_manifest.json", manifest.dump(2) + "\n");

  rec.config = {{"demos", a.demos}, {"steps", a.steps}, {"noise_std", a.noise_std}, {"expert_gain", a.expert_gain}};
  rec.seeds = {{"seed", a.seed}};
  for (const auto& d : ds.demos) rec.outputs.push_back(out / (d.demo_id + ".csv"));
  rec.outputs.push_back(out / "sim_manifest.json");
  rec.write();
  err << "wrote " << a.demos << " demonstrations to " << out.string() << "\n";
  return kOk;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string model;
  std::string data;
  std::string out;
  std::size_t window = 3;
  std::optional<std::size_t> epochs;
  std::size_t ensemble = 0;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> split_seed;
  std::size_t hidden = 16;
  std::optional<std::size_t> bptt;
  double lr = OptimConfig{}.learning_rate;
  double l1 = OptimConfig{}.l1_lambda;
  std::size_t batch_size = OptimConfig{}.batch_size;
  double epsilon = EkfConfig{}.epsilon;
  double eta = EkfConfig{}.eta;
  double q = EkfConfig{}.q;
  std::size_t workers = 0;
};

int cmd_train(const TrainArgs& a, std::ostream& err) {
  TrainRequest req;
  try {
    req.spec.kind = model_kind_from_string(a.model);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  req.spec.hidden = a.hidden;
  if (a.bptt) req.spec.bptt_depth = *a.bptt;
  req.spec.ekf.epsilon = a.epsilon;
  req.spec.ekf.eta = a.eta;
  req.spec.ekf.q = a.q;
  req.spec.optim.learning_rate = a.lr;
  req.spec.optim.l1_lambda = a.l1;
  req.spec.optim.batch_size = a.batch_size;
  if (a.epochs) {
    req.spec.ekf.epochs = *a.epochs;
    req.spec.optim.epochs = *a.epochs;
  }
  req.window = a.window;
  req.ensemble_size = a.ensemble;
  req.seed = a.seed;
  req.split_seed = a.split_seed.value_or(a.seed);
  req.workers = a.workers > 0 ? a.workers : default_workers();

  const fs::path out = resolve_out(a.out);
  const Dataset ds = load_dataset(a.data);
  const PreparedData data = prepare_data(ds, req.window, req.split_seed);
  TrainOutcome trained = train_on_prepared(data, req);

  auto& settings = trained.bundle.settings;
  settings["model"] = a.model;
  settings["data"] = a.data;
  settings["window"] = std::to_string(a.window);
  settings["hidden"] = std::to_string(a.hidden);
  settings["ensemble"] = std::to_string(a.ensemble);
  if (req.spec.kind == ModelKind::kf_rmlp) {
    settings["epochs"] = std::to_string(req.spec.ekf.epochs);
    settings["epsilon"] = text::format_double(a.epsilon);
    settings["eta"] = text::format_double(a.eta);
    settings["q"] = text::format_double(a.q);
  } else {
    settings["epochs"] = std::to_string(req.spec.optim.epochs);
    settings["learning_rate"] = text::format_double(a.lr);
    settings["l1_lambda"] = text::format_double(a.l1);
    settings["batch_size"] = std::to_string(a.batch_size);
  }
  save_bundle(trained.bundle, out);

  RunRecorder rec("train", out);
  const std::size_t members = trained.logs.size();
  for (std::size_t i = 0; i < members; ++i) {
    const fs::path log =
        out / (trained.bundle.is_ensemble ? "training_log_member_" + std::to_string(i) + ".csv" : "training_log.csv");
    trained.logs[i].write_csv(log);
    rec.outputs.push_back(log);
    rec.outputs.push_back(out / ("member_" + std::to_string(i) + ".model"));
  }
  rec.outputs.push_back(out / "normalizer.txt");
  rec.outputs.push_back(out / "target_scaler.txt");
  rec.outputs.push_back(out / kModelManifestName);
  rec.config = json(settings);
  rec.seeds = {{"seed", req.seed}, {"split_seed", req.split_seed}};
  rec.inputs.push_back(a.data);
  rec.write();

  const Evaluation val = evaluate_bundle(trained.bundle, data.val, a.model);
  err << "trained " << a.model << (trained.bundle.is_ensemble ? " ensemble" : "") << " on "
      << total_samples(data.fit) << " windows from " << data.fit.size() << " demonstrations; validation Loss "
      << val.report.stats.loss << "\n";
  return kOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string model_dir;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> split_seed;
  std::string partition = "test";
  bool allow_train = false;
  std::string name;
};

int cmd_eval(const EvalArgs& a, std::ostream& err) {
  const Partition part = [&] {
    try {
      return partition_from_string(a.partition);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }();
  if (part != Partition::test && !a.allow_train) {
    throw UsageError("evaluating on the '" + a.partition + "' partition overlaps training data; pass --allow-train");
  }
  const ModelBundle bundle = load_bundle(a.model_dir);
  if (a.split_seed && *a.split_seed != bundle.split_seed) {
    throw UsageError("--split-seed " + std::to_string(*a.split_seed) + " does not match the model's split seed " +
                     std::to_string(bundle.split_seed) + "; refusing to evaluate on a different partition");
  }
  const Dataset ds = load_dataset(a.data);
  const PreparedData data = prepare_data(ds, bundle.window, bundle.split_seed, &bundle.features);
  std::string name = a.name;
  if (name.empty()) name = std::string(to_string(bundle.kind)) + (bundle.is_ensemble ? "_ensemble" : "");
  const Evaluation ev = evaluate_bundle(bundle, data.partition(part), name);

  const fs::path out = resolve_out(a.out);
  make_dir(out);
  export_report({ev.report}, out / "report.json");
  export_trajectories(ev.trajectories, out / "trajectories.csv");

  RunRecorder rec("eval", out);
  rec.config = {{"partition", a.partition}, {"name", name}, {"window", bundle.window}};
  rec.seeds = {{"split_seed", bundle.split_seed}, {"seed", bundle.seed}};
  rec.inputs = {a.model_dir, a.data};
  rec.outputs = {out / "report.json", out / "trajectories.csv"};
  rec.write();
  err << name << " on " << a.partition << ": MAE " << ev.report.stats.mae << " AE " << ev.report.stats.ae << " Loss "
      << ev.report.stats.loss << " E>" << ev.report.threshold << " " << ev.report.stats.pct_gt_threshold << "%\n";
  return kOk;
}

// ---- compare ----------------------------------------------------------------

struct CompareArgs {
  std::vector<std::string> reports;
  std::string out;
};

int cmd_compare(const CompareArgs& a, std::ostream& out_stream, std::ostream& err) {
  if (a.reports.size() < 2) throw UsageError("compare needs at least two report files");
  std::vector<MetricsReport> rows;
  for (const auto& path : a.reports) {
    for (auto& r : load_report(path)) rows.push_back(std::move(r));
  }
  std::map<std::string, std::size_t> seen;
  for (auto& r : rows) {
    const std::size_t count = ++seen[r.model_name];
    if (count > 1) r.model_name += "#" + std::to_string(count);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const MetricsReport& x, const MetricsReport& y) { return x.stats.loss < y.stats.loss; });

  const fs::path out = resolve_out(a.out);
  make_dir(out);
  export_report(rows, out / "comparison.json");

  std::ostringstream table;
  table << std::left << std::setw(24) << "Model" << std::right;
  for (std::size_t c = 1; c < report_columns().size(); ++c) table << std::setw(14) << report_columns()[c];
  table << "\n";
  for (const auto& r : rows) {
    table << std::left << std::setw(24) << r.model_name << std::right << std::setprecision(6);
    table << std::setw(14) << r.stats.mae << std::setw(14) << r.stats.ae << std::setw(14) << r.stats.loss
          << std::setw(14) << r.stats.pct_gt_threshold << "\n";
  }
  text::write_file(out / "comparison.txt", table.str());
  out_stream << table.str();

  RunRecorder rec("compare", out);
  for (const auto& r : a.reports) rec.inputs.push_back(r);
  rec.outputs = {out / "comparison.json", out / "comparison.txt"};
  rec.write();
  err << "compared " << rows.size() << " models\n";
  return kOk;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return kUsage;
    case ErrorKind::numerical:
    case ErrorKind::divergence: return kDivergence;
    default: return kDataError;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learning from demonstration with Kalman-filter trained recurrent networks"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate synthetic needle-insertion demonstrations");
  simulate->add_option("--demos", sim.demos, "Number of demonstrations")->check(CLI::Range(1, 1000000));
  simulate->add_option("--seed", sim.seed, "Base seed");
  simulate->add_option("--out", sim.out, "Output dataset directory")->required();
  simulate->add_option("--steps", sim.steps, "Records per demonstration")->check(CLI::PositiveNumber);
  simulate->add_option("--noise-std", sim.noise_std, "Expert action jitter (m)")->check(CLI::NonNegativeNumber);
  simulate->add_option("--expert-gain", sim.expert_gain, "Manipulator correction gain")->check(CLI::NonNegativeNumber);
  simulate->add_option("--workers", sim.workers, "Parallel simulations (default DLFD_WORKERS or 1)");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a policy on a dataset");
  train->add_option("--model", tr.model, "kf_rmlp, feedforward, rnn, gru or lstm")->required();
  train->add_option("--data", tr.data, "Dataset directory")->required();
  train->add_option("--out", tr.out, "Model directory")->required();
  train->add_option("--N", tr.window, "Memory window")->check(CLI::PositiveNumber);
  train->add_option("--epochs", tr.epochs, "Training epochs");
  train->add_option("--ensemble", tr.ensemble, "Bagging ensemble size (0 = single model)");
  train->add_option("--seed", tr.seed, "Training seed");
  train->add_option("--split-seed", tr.split_seed, "Dataset split seed (default: --seed)");
  train->add_option("--hidden", tr.hidden, "Hidden width")->check(CLI::PositiveNumber);
  train->add_option("--bptt", tr.bptt, "KF-RMLP Jacobian truncation depth (default: N)");
  train->add_option("--lr", tr.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  train->add_option("--l1", tr.l1, "L1 penalty")->check(CLI::NonNegativeNumber);
  train->add_option("--batch-size", tr.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  train->add_option("--epsilon", tr.epsilon, "KF-RMLP initial covariance scale (P0 = I/epsilon)");
  train->add_option("--eta", tr.eta, "KF-RMLP learning rate (R = I/eta)");
  train->add_option("--q", tr.q, "KF-RMLP process noise");
  train->add_option("--workers", tr.workers, "Parallel ensemble members (default DLFD_WORKERS or 1)");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Evaluate a trained model");
  eval->add_option("--model-dir", ev.model_dir, "Model directory")->required();
  eval->add_option("--data", ev.data, "Dataset directory")->required();
  eval->add_option("--out", ev.out, "Report directory")->required();
  eval->add_option("--split-seed", ev.split_seed, "Must match the model's split seed");
  eval->add_option("--partition", ev.partition, "test (default), val, fit, train or all");
  eval->add_flag("--allow-train", ev.allow_train, "Permit partitions that overlap training data");
  eval->add_option("--name", ev.name, "Model name in the report");

  CompareArgs cmp;
  auto* compare = app.add_subcommand("compare", "Merge reports into one table sorted by Loss");
  compare->add_option("--reports", cmp.reports, "Report files")->required();
  compare->add_option("--out", cmp.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim, err);
    if (*train) return cmd_train(tr, err);
    if (*eval) return cmd_eval(ev, err);
    if (*compare) return cmd_compare(cmp, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace dlfd::cli
