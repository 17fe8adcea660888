// Command-line front end: simulate -> train -> detect -> diagnose -> report.
// Exit codes: 0 success, 2 input error, 3 numerical failure/non-convergence.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vbspca/awe_sim.hpp"
#include "vbspca/core_data.hpp"
#include "vbspca/diagnosis.hpp"
#include "vbspca/errors.hpp"
#include "vbspca/monitoring.hpp"
#include "vbspca/serialize.hpp"
#include "vbspca/sparse_var.hpp"
#include "vbspca/vbspca_gaussian.hpp"
#include "vbspca/vbspca_laplace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vbspca;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

bool verbose() {
  const char* env = std::getenv("VBSPCA_LOG");
  return env != nullptr && std::string(env) != "" && std::string(env) != "0" &&
         std::string(env) != "quiet";
}

void log_line(const std::string& msg) {
  if (verbose()) std::cerr << "[vbspca] " << msg << '\n';
}

void write_json_atomic(const json& doc, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw InputError("cannot write " + tmp);
    out << doc.dump(2) << '\n';
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw InputError("cannot rename " + tmp + " to " + path);
  }
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw InputError("malformed JSON in " + path + ": " + e.what());
  }
  return doc;
}

struct RunConfig {
  std::string variant = "gaussian";
  std::string train_csv;
  std::string model_out = "model.json";
  std::string report_out;
  std::uint64_t seed = 1;
  GaussianHyper gaussian;
  LaplaceHyper laplace;
  int tau = 2;
  std::optional<double> lambda;  // nullopt = choose by CV
  double alpha = 0.95;
};

RunConfig parse_run_config(const std::string& path) {
  const json doc = read_json(path);
  RunConfig cfg;
  try {
    cfg.variant = doc.value("variant", "gaussian");
    if (cfg.variant != "gaussian" && cfg.variant != "laplace") {
      throw InputError("variant must be gaussian or laplace");
    }
    cfg.train_csv = doc.at("train_csv").get<std::string>();
    cfg.model_out = doc.value("model_out", "model.json");
    cfg.report_out = doc.value("report_out", "");
    cfg.seed = doc.value("seed", std::uint64_t{1});
    if (doc.contains("gaussian")) {
      const auto& g = doc["gaussian"];
      cfg.gaussian.a0 = g.value("a0", cfg.gaussian.a0);
      cfg.gaussian.b0 = g.value("b0", cfg.gaussian.b0);
      cfg.gaussian.r_max = g.value("r_max", cfg.gaussian.r_max);
      cfg.gaussian.max_iters = g.value("max_iters", cfg.gaussian.max_iters);
      cfg.gaussian.tol = g.value("tol", cfg.gaussian.tol);
      cfg.gaussian.prune_threshold =
          g.value("prune_threshold", cfg.gaussian.prune_threshold);
    }
    if (doc.contains("laplace")) {
      const auto& l = doc["laplace"];
      cfg.laplace.varphi = l.value("varphi", cfg.laplace.varphi);
      cfg.laplace.c0 = l.value("c0", cfg.laplace.c0);
      cfg.laplace.d0 = l.value("d0", cfg.laplace.d0);
      cfg.laplace.varsigma = l.value("varsigma", cfg.laplace.varsigma);
      cfg.laplace.r = l.value("r", cfg.laplace.r);
      cfg.laplace.max_iters = l.value("max_iters", cfg.laplace.max_iters);
      cfg.laplace.tol = l.value("tol", cfg.laplace.tol);
    }
    if (doc.contains("var")) {
      const auto& v = doc["var"];
      cfg.tau = v.value("tau", 2);
      if (v.contains("lambda") && v["lambda"].is_number()) {
        cfg.lambda = v["lambda"].get<double>();
      }
    }
    if (doc.contains("monitor")) {
      cfg.alpha = doc["monitor"].value("alpha", 0.95);
    }
  } catch (const json::exception& e) {
    throw InputError("invalid config: " + std::string(e.what()));
  }
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
    throw InputError("alpha must lie in (0,1)");
  }
  return cfg;
}

int run_simulate(const std::string& scenario_path, const std::string& preset,
                 const std::string& out_dir, std::optional<std::uint64_t> seed) {
  Scenario scenario = !preset.empty() ? preset_scenario(preset)
                                      : load_scenario(scenario_path);
  if (seed) scenario.process.seed = *seed;
  fs::create_directories(out_dir);

  log_line("simulating " + scenario.name + " (seed " +
           std::to_string(scenario.process.seed) + ")");
  // One continuous record of the same plant; the test window follows the
  // training window in time and the faults land inside it.
  const DataMatrix full =
      simulate_normal(scenario.process, scenario.n_train + scenario.n_test);
  DataMatrix train;
  train.tags = full.tags;
  train.sample_period = full.sample_period;
  train.values = full.values.leftCols(scenario.n_train);
  DataMatrix test;
  test.tags = full.tags;
  test.sample_period = full.sample_period;
  test.values = full.values.rightCols(scenario.n_test);
  json truth_faults = json::array();
  std::vector<int> faulty_sensors;
  int min_onset = scenario.n_test + 1;
  for (std::size_t i = 0; i < scenario.faults.size(); ++i) {
    const FaultSpec& fault = scenario.faults[i];
    test = inject_fault(test, fault, scenario.process.seed + 100 + i);
    truth_faults.push_back({{"kind", to_string(fault.kind)},
                            {"sensors", fault.sensors},
                            {"onset", fault.onset},
                            {"magnitude", fault.magnitude},
                            {"duration", fault.duration}});
    for (int s : fault.sensors) faulty_sensors.push_back(s);
    min_onset = std::min(min_onset, fault.onset);
  }
  std::sort(faulty_sensors.begin(), faulty_sensors.end());
  faulty_sensors.erase(
      std::unique(faulty_sensors.begin(), faulty_sensors.end()),
      faulty_sensors.end());

  write_csv(train, (fs::path(out_dir) / "train.csv").string());
  write_csv(test, (fs::path(out_dir) / "test.csv").string());
  json truth;
  truth["scenario"] = scenario.name;
  truth["onset"] = scenario.faults.empty() ? 0 : min_onset;
  truth["faulty_sensors"] = faulty_sensors;
  truth["faults"] = std::move(truth_faults);
  truth["seed"] = scenario.process.seed;
  write_json_atomic(truth, (fs::path(out_dir) / "truth.json").string());
  log_line("wrote train.csv, test.csv, truth.json to " + out_dir);
  return kExitOk;
}

int run_train(const RunConfig& cfg) {
  const DataMatrix raw = load_csv(cfg.train_csv);
  const Scaler scaler = fit_scaler(raw);
  const DataMatrix standardized = apply_scaler(scaler, raw);

  ModelBundle bundle;
  bundle.variant = cfg.variant;
  bundle.scaler = scaler;
  json report;
  report["variant"] = cfg.variant;
  bool converged = false;

  if (cfg.variant == "gaussian") {
    FitTrace trace;
    log_line("fitting gaussian model, r_max " +
             std::to_string(cfg.gaussian.r_max));
    const GaussianModel model =
        fit_gaussian(standardized, cfg.gaussian, cfg.seed, &trace);
    bundle.loading = model.loading;
    bundle.latent_scale = model.latent_scale;
    bundle.noise_precision = model.noise_precision;
    bundle.mean_correction = model.mean_correction;
    bundle.rank = model.rank;
    bundle.converged = converged = model.converged;
    bundle.hyper_json = json{{"a0", cfg.gaussian.a0},
                             {"b0", cfg.gaussian.b0},
                             {"r_max", cfg.gaussian.r_max},
                             {"max_iters", cfg.gaussian.max_iters},
                             {"tol", cfg.gaussian.tol},
                             {"prune_threshold", cfg.gaussian.prune_threshold}}
                            .dump();
    report["rank"] = model.rank;
    report["iterations"] = trace.iterations;
    report["elbo_trace"] = trace.elbo;
    report["active_trace"] = trace.active;
  } else {
    LaplaceTrace trace;
    log_line("fitting laplace model, r " + std::to_string(cfg.laplace.r));
    const LaplaceModel model =
        fit_laplace(standardized, cfg.laplace, cfg.seed, &trace);
    bundle.loading = model.loading;
    bundle.latent_scale = model.latent_scale;
    bundle.noise_precision = model.noise_precision;
    bundle.mean_correction = model.mean_correction;
    bundle.rank = model.rank;
    bundle.converged = converged = model.converged;
    bundle.hyper_json = json{{"varphi", cfg.laplace.varphi},
                             {"c0", cfg.laplace.c0},
                             {"d0", cfg.laplace.d0},
                             {"varsigma", cfg.laplace.varsigma},
                             {"r", cfg.laplace.r},
                             {"max_iters", cfg.laplace.max_iters},
                             {"tol", cfg.laplace.tol}}
                            .dump();
    report["rank"] = model.rank;
    report["iterations"] = trace.iterations;
    report["delta_trace"] = trace.delta;
  }

  const Matrix scores = bundle.loading.transpose() * standardized.values;
  const LaggedDesign design = build_lagged(scores, cfg.tau);
  const double lambda = cfg.lambda ? *cfg.lambda : cv_lambda(design);
  log_line("lasso lambda " + std::to_string(lambda) +
           (cfg.lambda ? " (fixed)" : " (cv)"));
  bundle.var = lasso_fit(design, lambda);
  bundle.monitor = calibrate(bundle.loading, bundle.var, standardized, cfg.alpha);

  save_model(bundle, cfg.model_out);
  report["converged"] = converged;
  report["lambda"] = lambda;
  report["lambda_source"] = cfg.lambda ? "fixed" : "cv";
  report["tau"] = cfg.tau;
  report["alpha"] = cfg.alpha;
  report["t2_limit"] = bundle.monitor.t2_limit;
  report["spe_limit"] = bundle.monitor.spe_limit;
  report["seed"] = cfg.seed;
  if (!cfg.report_out.empty()) write_json_atomic(report, cfg.report_out);
  log_line("model written to " + cfg.model_out);

  if (!converged) {
    std::cerr << "warning: fit did not converge within max_iters; model "
                 "flagged and written\n";
    return kExitNumeric;
  }
  return kExitOk;
}

int run_detect(const std::string& model_path, const std::string& test_path,
               int onset, const std::string& out_dir) {
  const ModelBundle bundle = load_model(model_path);
  const DataMatrix raw = load_csv(test_path);
  if (raw.tags != bundle.scaler.tags) {
    throw InputError("test data tags do not match the trained model");
  }
  const DataMatrix standardized = apply_scaler(bundle.scaler, raw);
  const DetectionResult result =
      detect(bundle.monitor, bundle.loading, bundle.var, standardized, onset);
  fs::create_directories(out_dir);
  write_detection_csv(result, bundle.monitor,
                      (fs::path(out_dir) / "detect.csv").string());
  write_detection_summary(result, bundle.monitor,
                          (fs::path(out_dir) / "detect_summary.json").string());
  log_line("far " + std::to_string(result.far) + ", fdr " +
           std::to_string(result.fdr) + ", delay " +
           std::to_string(result.detection_delay));
  return kExitOk;
}

int run_diagnose(const std::string& model_path, const std::string& test_path,
                 const std::string& kind_name, const std::string& out_dir) {
  const IndexKind kind = index_kind_from_string(kind_name);
  const ModelBundle bundle = load_model(model_path);
  const DataMatrix raw = load_csv(test_path);
  if (raw.tags != bundle.scaler.tags) {
    throw InputError("test data tags do not match the trained model");
  }
  const DataMatrix standardized = apply_scaler(bundle.scaler, raw);
  const RbcMap map = rbc_map(standardized, bundle.loading,
                             bundle.monitor.lambda_diag, kind);
  fs::create_directories(out_dir);
  const std::string base = "rbc_" + to_string(kind);
  write_rbc_csv(map, (fs::path(out_dir) / (base + ".csv")).string());
  write_rbc_json(map, (fs::path(out_dir) / (base + ".json")).string());
  log_line("wrote " + base + ".csv/.json to " + out_dir);
  return kExitOk;
}

json top_sensors_for_phase(const json& rbc_doc, std::size_t begin,
                           std::size_t end) {
  const auto& tags = rbc_doc.at("tags");
  const auto& rows = rbc_doc.at("rbc");
  std::vector<double> totals(tags.size(), 0.0);
  std::vector<std::size_t> counts(tags.size(), 0);
  for (std::size_t i = begin; i < end && i < rows.size(); ++i) {
    const auto& row = rows[i];
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j].is_null()) continue;
      totals[j] += row[j].get<double>();
      ++counts[j];
    }
  }
  std::vector<std::size_t> order(tags.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> means(tags.size(), 0.0);
  for (std::size_t j = 0; j < tags.size(); ++j) {
    means[j] = counts[j] > 0 ? totals[j] / static_cast<double>(counts[j]) : 0.0;
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return means[a] > means[b]; });
  json top = json::array();
  for (std::size_t k = 0; k < order.size() && k < 5; ++k) {
    top.push_back({{"tag", tags[order[k]]},
                   {"sensor", order[k] + 1},
                   {"mean_rbc", means[order[k]]}});
  }
  return top;
}

int run_report(const std::string& run_dir) {
  const fs::path dir(run_dir);
  const fs::path summary_path = dir / "detect_summary.json";
  if (!fs::exists(summary_path)) {
    throw InputError("missing " + summary_path.string() +
                     "; run detect first");
  }
  const json summary = read_json(summary_path.string());

  json report;
  report["far"] = summary.at("far");
  report["fdr"] = summary.at("fdr");
  report["detection_delay"] = summary.at("detection_delay");
  report["t2"] = summary.at("t2");
  report["spe"] = summary.at("spe");
  report["alpha"] = summary.at("alpha");
  const int onset = summary.at("onset").get<int>();
  report["onset"] = onset;

  for (const char* kind : {"t2", "spe"}) {
    const fs::path rbc_path = dir / (std::string("rbc_") + kind + ".json");
    if (!fs::exists(rbc_path)) continue;
    const json rbc_doc = read_json(rbc_path.string());
    const std::size_t n = rbc_doc.at("rbc").size();
    const std::size_t start = static_cast<std::size_t>(onset - 1);
    if (start >= n) continue;
    const std::size_t mid = start + (n - start) / 2;
    report["top_rbc"][kind]["early"] = top_sensors_for_phase(rbc_doc, start, mid);
    report["top_rbc"][kind]["late"] = top_sensors_for_phase(rbc_doc, mid, n);
  }

  write_json_atomic(report, (dir / "report.json").string());

  std::string md;
  md += "# Monitoring run report\n\n";
  md += "| metric | value |\n|---|---|\n";
  md += "| false alarm rate | " + std::to_string(report["far"].get<double>()) + " |\n";
  md += "| fault detection rate | " + std::to_string(report["fdr"].get<double>()) + " |\n";
  md += "| detection delay | " + std::to_string(report["detection_delay"].get<int>()) + " |\n";
  md += "| onset | " + std::to_string(onset) + " |\n\n";
  if (report.contains("top_rbc")) {
    for (auto& [kind, phases] : report["top_rbc"].items()) {
      for (auto& [phase, top] : phases.items()) {
        md += "## Top sensors (" + kind + ", " + phase + " phase)\n\n";
        for (const auto& entry : top) {
          md += "- " + entry["tag"].get<std::string>() + " (mean RBC " +
                std::to_string(entry["mean_rbc"].get<double>()) + ")\n";
        }
        md += "\n";
      }
    }
  }
  const fs::path md_path = dir / "report.md";
  const std::string tmp = md_path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw InputError("cannot write " + tmp);
    out << md;
  }
  if (std::rename(tmp.c_str(), md_path.string().c_str()) != 0) {
    throw InputError("cannot rename " + tmp);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse Bayesian latent-variable process monitoring"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate scenario data");
  std::string scenario_path, preset, sim_out = ".";
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--scenario", scenario_path, "Scenario JSON file");
  sim->add_option("--preset", preset,
                  "Named preset (fault2-analogue, fault6-analogue)");
  sim->add_option("--out", sim_out, "Output directory");
  std::uint64_t sim_seed_value = 0;
  auto* sim_seed_opt = sim->add_option("--seed", sim_seed_value, "Seed override");

  // train
  auto* train = app.add_subcommand("train", "Fit model + VAR + limits");
  std::string config_path;
  train->add_option("--config", config_path, "Run config JSON")->required();
  std::string variant_flag;
  train->add_option("--variant", variant_flag, "gaussian|laplace");
  std::uint64_t train_seed_value = 0;
  auto* train_seed_opt = train->add_option("--seed", train_seed_value, "Seed override");
  double alpha_flag = 0.0;
  auto* alpha_opt = train->add_option("--alpha", alpha_flag, "Confidence level");

  // detect
  auto* det = app.add_subcommand("detect", "Score a test window");
  std::string det_model, det_test, det_out = ".";
  int onset = 201;
  det->add_option("--model", det_model, "Model JSON")->required();
  det->add_option("--test", det_test, "Test CSV")->required();
  det->add_option("--onset", onset, "1-based first faulty sample");
  det->add_option("--out", det_out, "Output directory");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "Per-sensor contributions");
  std::string diag_model, diag_test, diag_kind = "spe", diag_out = ".";
  diag->add_option("--model", diag_model, "Model JSON")->required();
  diag->add_option("--test", diag_test, "Test CSV")->required();
  diag->add_option("--kind", diag_kind, "t2|spe");
  diag->add_option("--out", diag_out, "Output directory");

  // report
  auto* rep = app.add_subcommand("report", "Aggregate a run directory");
  std::string run_dir;
  rep->add_option("--run-dir", run_dir, "Directory with detect/diagnose output")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (sim->parsed()) {
      if (scenario_path.empty() && preset.empty()) {
        throw InputError("simulate needs --scenario or --preset");
      }
      if (sim_seed_opt->count() > 0) sim_seed = sim_seed_value;
      return run_simulate(scenario_path, preset, sim_out, sim_seed);
    }
    if (train->parsed()) {
      RunConfig cfg = parse_run_config(config_path);
      if (!variant_flag.empty()) {
        if (variant_flag != "gaussian" && variant_flag != "laplace") {
          throw InputError("variant must be gaussian or laplace");
        }
        cfg.variant = variant_flag;
      }
      if (train_seed_opt->count() > 0) cfg.seed = train_seed_value;
      if (alpha_opt->count() > 0) {
        if (!(alpha_flag > 0.0 && alpha_flag < 1.0)) {
          throw InputError("alpha must lie in (0,1)");
        }
        cfg.alpha = alpha_flag;
      }
      return run_train(cfg);
    }
    if (det->parsed()) return run_detect(det_model, det_test, onset, det_out);
    if (diag->parsed()) return run_diagnose(diag_model, diag_test, diag_kind, diag_out);
    if (rep->parsed()) return run_report(run_dir);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
