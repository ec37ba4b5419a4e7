#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>

#include "iclcp/checkpoint.hpp"
#include "iclcp/config_json.hpp"
#include "iclcp/conformal.hpp"
#include "iclcp/csv.hpp"
#include "iclcp/errors.hpp"
#include "iclcp/eval.hpp"
#include "iclcp/lsa_model.hpp"
#include "iclcp/parallel.hpp"
#include "iclcp/scaling.hpp"

#ifndef ICLCP_VERSION
#define ICLCP_VERSION "0.0.0"
#endif

namespace iclcp::cli {
namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const json& config) { return fmt::format("{:016x}", fnv1a(config.dump())); }

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  unsigned workers = 0;
  std::string checkpoint;
  std::string input;
};

template <typename T>
void get(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

struct EvalSection {
  ExperimentConfig base;
  WdistConfig wdist;
  std::vector<double> ood_a;
  std::vector<double> ood_sigma_w;
  WdistMode ood_mode = WdistMode::kPredictivePmf;
  BenchConfig bench;
  std::vector<Method> bench_methods;
  int point_run = 0;
  int point_test = 0;
};

struct ScalingSection {
  std::vector<json> sweep;
  std::uint64_t train_seed = 0;
  double lambda_asym = 0.1;
  int n_starts = 64;
  std::vector<double> budgets;
  std::string flops_model = "lsa";
  double flops_k = 6.0;
  int contour_points = 0;
  double contour_decades = 2.0;
  std::string datapoints;
  std::string fit;
};

struct Settings {
  json doc;
  std::string hash;
  GenConfig gen;
  json train_json = json::object();
  TrainConfig train;
  EvalSection eval;
  ScalingSection scaling;
};

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "': " + e.what());
  }
}

std::uint64_t parse_seed(const std::string& text, const char* source) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(text, &pos, 0);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string(source) + ": '" + text + "' is not an unsigned 64-bit integer");
  }
}

TrainConfig parse_train(const json& train_json, const GenConfig& gen) {
  if (train_json.contains("gen")) {
    throw ConfigError("train.gen is not accepted; use the top-level gen section");
  }
  TrainConfig cfg;
  from_json(train_json, cfg);
  cfg.gen = gen;
  return cfg;
}

WdistMode parse_wdist_mode(const std::string& name) {
  if (name == "predictive_pmf") return WdistMode::kPredictivePmf;
  if (name == "typicalness_values") return WdistMode::kTypicalnessValues;
  throw ConfigError("W1 mode must be predictive_pmf or typicalness_values");
}

Method parse_method_config(const std::string& name, const std::string& where) {
  try {
    return parse_method(name);
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

EvalSection parse_experiment(const json& j, const GenConfig& gen) {
  reject_unknown_keys(j,
                      {"runs", "tests_per_run", "alpha", "method", "grid_size", "lambda",
                       "split_train_fraction", "shift", "wdist", "ood", "bench", "point"},
                      "experiment");
  EvalSection s;
  ExperimentConfig& e = s.base;
  e.gen = gen;
  get(j, "runs", e.runs, "experiment");
  get(j, "tests_per_run", e.tests_per_run, "experiment");
  get(j, "alpha", e.alpha, "experiment");
  get(j, "grid_size", e.grid_size, "experiment");
  get(j, "split_train_fraction", e.split_train_fraction, "experiment");
  if (j.contains("method")) {
    std::string m;
    get(j, "method", m, "experiment");
    e.method = parse_method_config(m, "experiment.method");
  }
  if (j.contains("lambda") && !j.at("lambda").is_null()) {
    double v = 0.0;
    get(j, "lambda", v, "experiment");
    e.lambda = v;
  }
  if (j.contains("shift") && !j.at("shift").is_null()) {
    const json& sj = j.at("shift");
    reject_unknown_keys(sj, {"a_inf", "sigma_w_inf"}, "experiment.shift");
    DistributionShift shift;
    get(sj, "a_inf", shift.a_inf, "experiment.shift");
    get(sj, "sigma_w_inf", shift.sigma_w_inf, "experiment.shift");
    e.shift = shift;
  }
  e.validate();

  WdistConfig& w = s.wdist;
  w.runs = std::min(e.runs, 100);
  w.tests_per_run = std::min(e.tests_per_run, 20);
  for (const double ratio : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const int n = static_cast<int>(std::lround(gen.d / ratio));
    if (n >= 1) w.shapes.emplace_back(gen.d, n);
  }
  if (j.contains("wdist")) {
    const json& wj = j.at("wdist");
    reject_unknown_keys(wj, {"shapes", "runs", "tests_per_run", "mode"}, "experiment.wdist");
    get(wj, "shapes", w.shapes, "experiment.wdist");
    get(wj, "runs", w.runs, "experiment.wdist");
    get(wj, "tests_per_run", w.tests_per_run, "experiment.wdist");
    if (wj.contains("mode")) {
      std::string mode;
      get(wj, "mode", mode, "experiment.wdist");
      w.mode = parse_wdist_mode(mode);
    }
  }
  w.alpha = e.alpha;
  w.grid_size = e.grid_size;
  w.gen = gen;

  s.ood_a = log_spaced(0.25, 4.0, 9);
  s.ood_sigma_w = log_spaced(0.25, 4.0, 9);
  if (j.contains("ood")) {
    const json& oj = j.at("ood");
    reject_unknown_keys(oj, {"a_values", "sigma_w_values", "mode"}, "experiment.ood");
    get(oj, "a_values", s.ood_a, "experiment.ood");
    get(oj, "sigma_w_values", s.ood_sigma_w, "experiment.ood");
    if (oj.contains("mode")) {
      std::string mode;
      get(oj, "mode", mode, "experiment.ood");
      s.ood_mode = parse_wdist_mode(mode);
    }
  }

  BenchConfig& b = s.bench;
  b.gen = gen;
  b.grid_size = e.grid_size;
  b.alpha = e.alpha;
  b.lambda = e.lambda;
  b.split_train_fraction = e.split_train_fraction;
  if (j.contains("bench")) {
    const json& bj = j.at("bench");
    reject_unknown_keys(bj, {"context_sizes", "repetitions", "warmup", "tests_per_batch", "methods"},
                        "experiment.bench");
    get(bj, "context_sizes", b.context_sizes, "experiment.bench");
    get(bj, "repetitions", b.repetitions, "experiment.bench");
    get(bj, "warmup", b.warmup, "experiment.bench");
    get(bj, "tests_per_batch", b.tests_per_batch, "experiment.bench");
    std::vector<std::string> names;
    get(bj, "methods", names, "experiment.bench");
    for (const auto& name : names) {
      s.bench_methods.push_back(parse_method_config(name, "experiment.bench.methods"));
    }
  }

  if (j.contains("point")) {
    const json& pj = j.at("point");
    reject_unknown_keys(pj, {"run", "test"}, "experiment.point");
    get(pj, "run", s.point_run, "experiment.point");
    get(pj, "test", s.point_test, "experiment.point");
    if (s.point_run < 0 || s.point_test < 0 || s.point_test >= e.tests_per_run) {
      throw ConfigError("experiment.point: run must be >= 0 and test in [0, tests_per_run)");
    }
  }
  return s;
}

ScalingSection parse_scaling(const json& j, const GenConfig& gen) {
  reject_unknown_keys(j,
                      {"sweep", "train_seed", "lambda_asym", "n_starts", "budgets", "flops_model",
                       "flops_k", "contour_points", "contour_decades", "datapoints", "fit"},
                      "scaling");
  ScalingSection s;
  s.train_seed = gen.seed;
  s.budgets = log_spaced(1e8, 1e9, 5);
  get(j, "sweep", s.sweep, "scaling");
  get(j, "train_seed", s.train_seed, "scaling");
  get(j, "lambda_asym", s.lambda_asym, "scaling");
  get(j, "n_starts", s.n_starts, "scaling");
  get(j, "budgets", s.budgets, "scaling");
  get(j, "flops_model", s.flops_model, "scaling");
  get(j, "flops_k", s.flops_k, "scaling");
  get(j, "contour_points", s.contour_points, "scaling");
  get(j, "contour_decades", s.contour_decades, "scaling");
  get(j, "datapoints", s.datapoints, "scaling");
  get(j, "fit", s.fit, "scaling");
  if (s.flops_model != "lsa" && s.flops_model != "bilinear") {
    throw ConfigError("scaling.flops_model must be lsa or bilinear");
  }
  if (!(s.lambda_asym > 0.0)) throw ConfigError("scaling.lambda_asym must be > 0");
  if (s.n_starts < 1) throw ConfigError("scaling.n_starts must be >= 1");
  if (s.contour_points < 0) throw ConfigError("scaling.contour_points must be >= 0");
  for (const double c : s.budgets) {
    if (!(c > 0.0)) throw ConfigError("scaling.budgets must be positive");
  }
  for (const auto& o : s.sweep) {
    if (!o.is_object()) throw ConfigError("scaling.sweep entries must be objects");
  }
  return s;
}

Settings load_settings(const Options& opt) {
  Settings s;
  json doc = opt.config_path.empty() ? json::object() : read_json_file(opt.config_path);
  reject_unknown_keys(doc, {"gen", "train", "experiment", "scaling"}, "config");

  if (doc.contains("gen")) from_json(doc.at("gen"), s.gen);
  if (const char* env = std::getenv("ICLCP_SEED"); env && *env) {
    s.gen.seed = parse_seed(env, "ICLCP_SEED");
  }
  if (opt.seed) s.gen.seed = *opt.seed;
  s.gen.validate();

  if (doc.contains("train")) s.train_json = doc.at("train");
  s.train = parse_train(s.train_json, s.gen);
  s.train.validate();
  s.eval = parse_experiment(doc.contains("experiment") ? doc.at("experiment") : json::object(), s.gen);
  s.scaling = parse_scaling(doc.contains("scaling") ? doc.at("scaling") : json::object(), s.gen);

  doc["gen"] = s.gen;
  s.doc = doc;
  s.hash = config_hash(doc);
  return s;
}

std::string timestamp_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
}

// Output directory plus the list of files written, for the manifest.
class Artifacts {
 public:
  Artifacts(fs::path dir, std::string command, const Settings& settings)
      : dir_(std::move(dir)), command_(std::move(command)), settings_(settings),
        started_(timestamp_now()) {
    fs::create_directories(dir_);
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(path(name), std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path(name).string() + "'");
    out << content;
    record(name);
  }

  void write_table(const std::string& name, const csv::Table& table) {
    std::ostringstream ss;
    csv::write(ss, table);
    write(name, ss.str());
  }

  void record(const std::string& name) { outputs_.push_back(name); }

  std::string finish() {
    json m;
    m["command"] = command_;
    m["config_hash"] = settings_.hash;
    m["seed"] = settings_.gen.seed;
    m["version"] = std::string("iclcp ") + ICLCP_VERSION;
    m["started_at"] = started_;
    m["finished_at"] = timestamp_now();
    m["outputs"] = outputs_;
    m["config"] = settings_.doc;
    const std::string name = "manifest_" + command_ + ".json";
    std::ofstream out(path(name), std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path(name).string() + "'");
    out << m.dump(2) << '\n';
    return name;
  }

 private:
  fs::path dir_;
  std::string command_;
  const Settings& settings_;
  std::string started_;
  std::vector<std::string> outputs_;
};

fs::path out_dir(const Options& opt) {
  if (!opt.out_dir.empty()) return opt.out_dir;
  if (const char* env = std::getenv("ICLCP_OUT"); env && *env) return env;
  return "out";
}

unsigned workers(const Options& opt) { return opt.workers == 0 ? default_workers() : opt.workers; }

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::string fmtd(double v) { return fmt::format("{:.6g}", v); }

std::vector<std::string> summary_row(const std::string& experiment, const std::string& hash,
                                     const std::string& metric, const Aggregate& a) {
  return {experiment, hash, metric, csv::format_double(a.median), csv::format_double(a.lo),
          csv::format_double(a.hi)};
}

csv::Table summary_table() {
  csv::Table t;
  t.header = {"experiment", "config_hash", "metric", "median", "lo", "hi"};
  return t;
}

std::shared_ptr<const IclPredictor> load_icl(const Options& opt, const Settings& s,
                                             const char* what) {
  if (opt.checkpoint.empty()) {
    throw ConfigError(std::string(what) + " needs a trained model; pass --checkpoint PATH");
  }
  Checkpoint ck = load_checkpoint(opt.checkpoint, s.gen.d);
  return std::make_shared<const IclPredictor>(std::move(ck.params));
}

// ---------------------------------------------------------------- train

int cmd_train(const Options& opt, std::ostream& out) {
  const Settings s = load_settings(opt);
  Artifacts art(out_dir(opt), "train", s);
  const TrainReport report = train(s.train);

  CheckpointHeader header;
  header.d = s.gen.d;
  header.n_trained = s.gen.n;
  header.layers = s.train.layers;
  header.init_seed = s.gen.seed;
  header.train_config = s.train;
  const fs::path ck_path = opt.checkpoint.empty() ? art.path("checkpoint.bin") : fs::path(opt.checkpoint);
  if (ck_path.has_parent_path()) fs::create_directories(ck_path.parent_path());
  save_checkpoint(ck_path, report.final_params, header);
  art.record(ck_path.string());

  json r;
  r["config_hash"] = s.hash;
  r["steps_executed"] = report.steps_executed;
  r["flops_per_step"] = report.flops_per_step;
  r["flops_total"] = report.flops_total;
  r["parameter_count"] = report.parameter_count;
  r["data_points"] = report.data_points;
  r["final_loss"] = report.loss_curve.empty() ? json(nullptr) : json(report.loss_curve.back().second);
  r["checkpoint"] = ck_path.string();
  art.write("train_report.json", r.dump(2) + "\n");

  csv::Table curve;
  curve.header = {"step", "loss"};
  for (const auto& [step, loss] : report.loss_curve) {
    curve.rows.push_back({std::to_string(step), csv::format_double(loss)});
  }
  art.write_table("loss_curve.csv", curve);
  const std::string manifest = art.finish();

  out << fmt::format("trained {} steps, N={}, D={}, FLOPs={}, final loss {}\n", report.steps_executed,
                     report.parameter_count, report.data_points, report.flops_total,
                     report.loss_curve.empty() ? std::string("n/a")
                                               : fmtd(report.loss_curve.back().second));
  out << "checkpoint: " << ck_path.string() << "\nmanifest: " << art.path(manifest).string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- eval

int cmd_eval_coverage(const Options& opt, std::ostream& out) {
  const Settings s = load_settings(opt);
  ExperimentConfig exp = s.eval.base;
  exp.workers = workers(opt);
  std::shared_ptr<const Predictor> predictor;
  switch (exp.method) {
    case Method::kCpIcl:
      predictor = load_icl(opt, s, "method cp_icl");
      break;
    case Method::kCpRidge:
      predictor = std::make_shared<const RidgeOraclePredictor>(exp.ridge_lambda());
      break;
    case Method::kSplitCpRidge:
      break;
  }
  Artifacts art(out_dir(opt), "eval_coverage", s);
  const EvalResult result = run_coverage_experiment(exp, predictor.get());
  const std::string experiment = "coverage_" + to_string(exp.method);

  csv::Table summary = summary_table();
  summary.rows.push_back(summary_row(experiment, s.hash, "coverage", result.coverage));
  summary.rows.push_back(summary_row(experiment, s.hash, "width", result.width));
  art.write_table("coverage.csv", summary);

  csv::Table runs;
  runs.header = {"run", "coverage", "median_width", "empty_sets"};
  csv::Table timing;
  timing.header = {"run", "seconds"};
  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    const RunResult& rr = result.runs[r];
    runs.rows.push_back({std::to_string(r), csv::format_double(rr.coverage),
                         csv::format_double(rr.median_width), std::to_string(rr.empty_sets)});
    timing.rows.push_back({std::to_string(r), csv::format_double(rr.seconds)});
  }
  art.write_table("coverage_runs.csv", runs);
  art.write_table("coverage_timing.csv", timing);
  art.finish();

  out << fmt::format("{}: coverage median {} [{}, {}], width median {}\n", to_string(exp.method),
                     fmtd(result.coverage.median), fmtd(result.coverage.lo), fmtd(result.coverage.hi),
                     fmtd(result.width.median));
  return kOk;
}

int cmd_eval_wdist(const Options& opt, std::ostream& out) {
  const Settings s = load_settings(opt);
  const auto icl = load_icl(opt, s, "eval wdist");
  WdistConfig cfg = s.eval.wdist;
  cfg.workers = workers(opt);
  for (const auto& [d, n] : cfg.shapes) {
    if (d != icl->params().dim()) {
      throw ConfigError(fmt::format("experiment.wdist.shapes: d={} does not match the checkpoint (d={})",
                                    d, icl->params().dim()));
    }
    if (n < 1) throw ConfigError("experiment.wdist.shapes: n must be >= 1");
  }
  const double lambda = s.eval.base.ridge_lambda();
  const PredictorFactory icl_factory = [&](int, int) -> std::shared_ptr<const Predictor> { return icl; };
  const PredictorFactory ridge_factory = [&](int, int) -> std::shared_ptr<const Predictor> {
    return std::make_shared<const RidgeOraclePredictor>(lambda);
  };
  Artifacts art(out_dir(opt), "eval_wdist", s);
  const auto rows = run_wdist_experiment(cfg, icl_factory, ridge_factory);

  csv::Table t;
  t.header = {"config_hash", "d", "n", "ratio", "mean_w1", "skipped"};
  for (const auto& r : rows) {
    t.rows.push_back({s.hash, std::to_string(r.d), std::to_string(r.n), csv::format_double(r.ratio),
                      csv::format_double(r.mean_w1), std::to_string(r.skipped)});
    out << fmt::format("d/n={:<8} W1={}\n", fmtd(r.ratio), fmtd(r.mean_w1));
  }
  art.write_table("wdist.csv", t);
  art.finish();
  return kOk;
}

int cmd_eval_ood(const Options& opt, std::ostream& out) {
  const Settings s = load_settings(opt);
  const auto icl = load_icl(opt, s, "eval ood");
  OodConfig cfg;
  cfg.base = s.eval.base;
  cfg.base.workers = workers(opt);
  cfg.a_values = s.eval.ood_a;
  cfg.sigma_w_values = s.eval.ood_sigma_w;
  cfg.mode = s.eval.ood_mode;
  const RidgeOraclePredictor ridge(cfg.base.ridge_lambda());
  Artifacts art(out_dir(opt), "eval_ood", s);
  const auto rows = run_ood_experiment(cfg, *icl, ridge);

  csv::Table t;
  t.header = {"config_hash", "parameter", "value", "coverage_median", "coverage_lo", "coverage_hi",
              "mean_w1"};
  for (const auto& r : rows) {
    t.rows.push_back({s.hash, r.parameter, csv::format_double(r.value),
                      csv::format_double(r.coverage.median), csv::format_double(r.coverage.lo),
                      csv::format_double(r.coverage.hi), csv::format_double(r.mean_w1)});
    out << fmt::format("{}={:<8} coverage={} W1={}\n", r.parameter, fmtd(r.value),
                       fmtd(r.coverage.median), fmtd(r.mean_w1));
  }
  art.write_table("ood.csv", t);
  art.finish();
  return kOk;
}

int cmd_eval_bench(const Options& opt, std::ostream& out) {
  const Settings s = load_settings(opt);
  std::vector<Method> kinds = s.eval.bench_methods;
  if (kinds.empty()) {
    if (!opt.checkpoint.empty()) kinds.push_back(Method::kCpIcl);
    kinds.push_back(Method::kCpRidge);
    kinds.push_back(Method::kSplitCpRidge);
  }
  BenchConfig cfg = s.eval.bench;
  const double lambda = s.eval.base.ridge_lambda();
  cfg.lambda = lambda;
  std::vector<BenchMethod> methods;
  for (const Method m : kinds) {
    BenchMethod bm;
    bm.kind = m;
    if (m == Method::kCpIcl) bm.predictor = load_icl(opt, s, "bench method cp_icl");
    if (m == Method::kCpRidge) bm.predictor = std::make_shared<const RidgeOraclePredictor>(lambda);
    methods.push_back(bm);
  }
  Artifacts art(out_dir(opt), "eval_bench", s);
  const auto rows = benchmark_time(cfg, methods);
  csv::Table t;
  t.header = {"method", "n", "median", "lo", "hi"};
  for (const auto& r : rows) {
    t.rows.push_back({r.method, std::to_string(r.n), csv::format_double(r.median),
                      csv::format_double(r.lo), csv::format_double(r.hi)});
    out << fmt::format("{:<16} n={:<5} median {:.6f} s [{:.6f}, {:.6f}]\n", r.method, r.n, r.median,
                       r.lo, r.hi);
  }
  art.write_table("bench_timing.csv", t);
  art.finish();
  return kOk;
}

int cmd_eval_point(const Options& opt, std::ostream& out) {
  const Settings s = load_settings(opt);
  const auto icl = load_icl(opt, s, "eval point");
  const ExperimentConfig& exp = s.eval.base;
  const RidgeOraclePredictor ridge(exp.ridge_lambda());
  const RunData data = sample_run(exp, s.eval.point_run);
  const Eigen::VectorXd x = data.X_test.row(s.eval.point_test).transpose();
  const double y_true = data.y_test(s.eval.point_test);
  const Grid grid = build_grid(data.y_ctx, exp.grid_size);
  const PredictionSet a = full_cp(*icl, data.X_ctx, data.y_ctx, x, exp.alpha, grid);
  const PredictionSet b = full_cp(ridge, data.X_ctx, data.y_ctx, x, exp.alpha, grid);

  Artifacts art(out_dir(opt), "eval_point", s);
  csv::Table t;
  t.header = {"z", "pi_icl", "pi_ridge"};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    t.rows.push_back({csv::format_double(grid[k]), csv::format_double(a.typicalness[k]),
                      csv::format_double(b.typicalness[k])});
  }
  art.write_table("point.csv", t);

  auto interval_json = [](const PredictionSet& p) {
    return p.interval ? json{{"lo", p.interval->lo}, {"hi", p.interval->hi}} : json(nullptr);
  };
  json meta;
  meta["config_hash"] = s.hash;
  meta["run"] = s.eval.point_run;
  meta["test"] = s.eval.point_test;
  meta["x"] = std::vector<double>(x.data(), x.data() + x.size());
  meta["y_true"] = y_true;
  meta["interval_icl"] = interval_json(a);
  meta["interval_ridge"] = interval_json(b);
  art.write("point_meta.json", meta.dump(2) + "\n");
  art.finish();

  out << fmt::format("y_true={} icl={} ridge={}\n", fmtd(y_true),
                     a.interval ? fmt::format("[{}, {}]", fmtd(a.interval->lo), fmtd(a.interval->hi)) : "empty",
                     b.interval ? fmt::format("[{}, {}]", fmtd(b.interval->lo), fmtd(b.interval->hi)) : "empty");
  return kOk;
}

// ---------------------------------------------------------------- scaling

int cmd_scaling_sweep(const Options& opt, std::ostream& out) {
  const Settings s = load_settings(opt);
  if (s.scaling.sweep.empty()) throw ConfigError("scaling.sweep lists no training configs");
  std::vector<TrainConfig> configs;
  for (const json& o : s.scaling.sweep) {
    json merged = s.train_json;
    merged.merge_patch(o);
    TrainConfig cfg = parse_train(merged, s.gen);
    cfg.validate();
    configs.push_back(cfg);
  }
  ScalingEvalConfig eval_cfg;
  eval_cfg.experiment = s.eval.base;
  eval_cfg.experiment.workers = workers(opt);
  eval_cfg.train_seed = s.scaling.train_seed;

  Artifacts art(out_dir(opt), "scaling_sweep", s);
  const auto outcomes = collect_scaling_data(configs, eval_cfg);

  std::vector<ScalingDatapoint> points;
  csv::Table status;
  status.header = {"config_hash", "index", "layers", "steps", "batch_size", "status", "N", "D", "loss",
                   "flops", "coverage"};
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    std::vector<std::string> row{s.hash, std::to_string(i), std::to_string(o.config.layers),
                                 std::to_string(o.config.steps), std::to_string(o.config.batch_size),
                                 sanitize(o.status)};
    if (o.point) {
      points.push_back(*o.point);
      for (const double v : {o.point->N, o.point->D, o.point->loss, o.point->flops, o.coverage}) {
        row.push_back(csv::format_double(v));
      }
    } else {
      row.insert(row.end(), 5, "");
    }
    status.rows.push_back(row);
    out << fmt::format("config {}: {}\n", i, o.status);
  }
  std::ostringstream dp;
  csv::write_datapoints(dp, points);
  art.write("datapoints.csv", dp.str());
  art.write_table("sweep.csv", status);
  art.finish();
  if (points.empty()) {
    throw BudgetError("no sweep config produced a datapoint");
  }
  return kOk;
}

json fit_to_json(const ScalingFit& fit, const std::string& hash) {
  auto params = [](const ScalingParams& p) {
    return json{{"alpha", p.alpha}, {"beta", p.beta}, {"A", p.A}, {"B", p.B}, {"E", p.E}};
  };
  json j;
  j["config_hash"] = hash;
  j["params"] = params(fit.params);
  j["a"] = fit.a;
  j["b"] = fit.b;
  j["objective"] = fit.fit_loss;
  json restarts = json::array();
  for (const auto& r : fit.restarts) {
    restarts.push_back({{"start", params(r.start)},
                        {"result", params(r.result)},
                        {"objective", r.finite ? json(r.objective) : json(nullptr)},
                        {"iterations", r.iterations},
                        {"finite", r.finite}});
  }
  j["restarts"] = restarts;
  return j;
}

ScalingFit fit_from_json(const json& j, const std::string& where) {
  try {
    const json& p = j.at("params");
    ScalingParams sp;
    sp.alpha = p.at("alpha").get<double>();
    sp.beta = p.at("beta").get<double>();
    sp.A = p.at("A").get<double>();
    sp.B = p.at("B").get<double>();
    sp.E = p.at("E").get<double>();
    return ScalingFit::from_params(sp);
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

fs::path input_path(const Options& opt, const std::string& configured, const fs::path& fallback) {
  if (!opt.input.empty()) return opt.input;
  if (!configured.empty()) return configured;
  return fallback;
}

int cmd_scaling_fit(const Options& opt, std::ostream& out) {
  const Settings s = load_settings(opt);
  const fs::path data_path = input_path(opt, s.scaling.datapoints, out_dir(opt) / "datapoints.csv");
  std::ifstream in(data_path);
  if (!in) throw ConfigError("cannot open datapoint CSV '" + data_path.string() + "'");
  const auto points = csv::read_datapoints(in);
  ScalingFitOptions options;
  options.lambda_asym = s.scaling.lambda_asym;
  options.n_starts = s.scaling.n_starts;
  options.workers = workers(opt);
  const ScalingFit fit = fit_scaling_law(points, options);

  Artifacts art(out_dir(opt), "scaling_fit", s);
  art.write("fit.json", fit_to_json(fit, s.hash).dump(2) + "\n");
  art.finish();
  out << fmt::format("alpha={} beta={} A={} B={} E={} a={} b={} objective={}\n", fmtd(fit.params.alpha),
                     fmtd(fit.params.beta), fmtd(fit.params.A), fmtd(fit.params.B), fmtd(fit.params.E),
                     fmtd(fit.a), fmtd(fit.b), fmtd(fit.fit_loss));
  return kOk;
}

int cmd_scaling_allocate(const Options& opt, std::ostream& out) {
  const Settings s = load_settings(opt);
  const fs::path fit_path = input_path(opt, s.scaling.fit, out_dir(opt) / "fit.json");
  const ScalingFit fit = fit_from_json(read_json_file(fit_path), fit_path.string());
  const FlopsModel model = s.scaling.flops_model == "lsa"
                               ? lsa_flops_model(s.gen.d, s.gen.n, s.train.batch_size)
                               : bilinear_flops_model(s.scaling.flops_k);

  Artifacts art(out_dir(opt), "scaling_allocate", s);
  csv::Table t;
  t.header = {"C", "N", "D", "loss"};
  csv::Table contour;
  contour.header = {"C", "N", "D", "loss"};
  for (const double C : s.scaling.budgets) {
    const Allocation a = optimal_allocation(fit, C, model);
    t.rows.push_back({csv::format_double(C), csv::format_double(a.N), csv::format_double(a.D),
                      csv::format_double(a.loss)});
    out << fmt::format("C={:.6g} N_hat={:.6g} D_hat={:.6g} loss={:.6g}\n", C, a.N, a.D, a.loss);
    if (s.scaling.contour_points > 0) {
      for (const auto& p : isoflop_contour(fit, C, model, s.scaling.contour_points,
                                           s.scaling.contour_decades)) {
        contour.rows.push_back({csv::format_double(C), csv::format_double(p.N),
                                csv::format_double(p.D), csv::format_double(p.loss)});
      }
    }
  }
  art.write_table("allocation.csv", t);
  if (s.scaling.contour_points > 0) art.write_table("contour.csv", contour);
  art.finish();
  return kOk;
}

void add_common(CLI::App* app, Options& opt, bool with_checkpoint, bool with_input) {
  app->add_option("--config", opt.config_path, "JSON config with sections gen, train, experiment, scaling");
  app->add_option("--seed", opt.seed, "Overrides gen.seed (and ICLCP_SEED)");
  app->add_option("--out", opt.out_dir, "Output directory (default: $ICLCP_OUT or ./out)");
  app->add_option("--workers", opt.workers, "Worker threads (0 = all cores)");
  if (with_checkpoint) app->add_option("--checkpoint", opt.checkpoint, "Model checkpoint path");
  if (with_input) app->add_option("--input", opt.input, "Input file (datapoint CSV or fit JSON)");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conformal prediction with in-context learning"};
  app.name(args.empty() ? "iclcp" : fs::path(args.front()).filename().string());
  app.set_version_flag("--version", std::string("iclcp ") + ICLCP_VERSION);
  app.require_subcommand(1);
  Options opt;

  std::function<int()> action;
  auto bind = [&](CLI::App* sub, int (*fn)(const Options&, std::ostream&)) {
    sub->callback([&action, &opt, &out, fn] { action = [&opt, &out, fn] { return fn(opt, out); }; });
  };

  auto* train_cmd = app.add_subcommand("train", "Pre-train an LSA model and write a checkpoint");
  add_common(train_cmd, opt, true, false);
  bind(train_cmd, cmd_train);

  auto* eval_cmd = app.add_subcommand("eval", "Conformal evaluation experiments");
  eval_cmd->require_subcommand(1);
  const std::pair<const char*, int (*)(const Options&, std::ostream&)> evals[] = {
      {"coverage", cmd_eval_coverage}, {"wdist", cmd_eval_wdist}, {"ood", cmd_eval_ood},
      {"bench", cmd_eval_bench},       {"point", cmd_eval_point}};
  for (const auto& [name, fn] : evals) {
    auto* sub = eval_cmd->add_subcommand(name);
    add_common(sub, opt, true, false);
    bind(sub, fn);
  }

  auto* scaling_cmd = app.add_subcommand("scaling", "Scaling-law data collection, fit and allocation");
  scaling_cmd->require_subcommand(1);
  const std::pair<const char*, int (*)(const Options&, std::ostream&)> scalings[] = {
      {"sweep", cmd_scaling_sweep}, {"fit", cmd_scaling_fit}, {"allocate", cmd_scaling_allocate}};
  for (const auto& [name, fn] : scalings) {
    auto* sub = scaling_cmd->add_subcommand(name);
    add_common(sub, opt, false, std::string(name) != "sweep");
    bind(sub, fn);
  }

  std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    return action ? action() : kUsage;
  } catch (const BudgetError& e) {
    err << "budget error: " << e.what() << '\n';
    return kBudget;
  } catch (const FitError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const RankDeficiencyError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const DegeneracyError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "unexpected error: " << e.what() << '\n';
    return kUnexpected;
  }
}

}  // namespace iclcp::cli
