#include "gammacontam/cli.hpp"

#include "gammacontam/csv.hpp"
#include "gammacontam/detectors.hpp"
#include "gammacontam/error.hpp"
#include "gammacontam/parallel.hpp"
#include "gammacontam/scorespace.hpp"
#include "gammacontam/stats.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>

namespace gammacontam {
namespace {

namespace fs = std::filesystem;

void use_stderr_logger() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("gammacontam");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
  });
}

std::string csv_header(const RunConfig& config) {
  return std::string("# gammacontam ") + kToolVersion + "\n# config: " + config.to_json().dump() + "\n";
}

std::string cell(const std::optional<double>& v) { return v ? csv::format_number(*v) : ""; }

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  f << text;
}

std::vector<DetectorSpec> detector_specs(const RunConfig& config) {
  std::vector<DetectorSpec> specs;
  for (const auto& d : config.detectors) {
    auto spec = parse_detector(d);
    spec.seed = config.seed;
    specs.push_back(spec);
  }
  for (const auto& p : config.externals) {
    DetectorSpec spec;
    spec.kind = DetectorKind::external;
    spec.path = p;
    specs.push_back(spec);
  }
  return specs;
}

ScoreMatrix load_scores(const RunConfig& config) {
  if (!config.scores.empty()) return transform_matrix(ingest_scores(config.scores));
  if (config.input.empty()) throw InputError("one of --input or --scores is required");
  return build_score_matrix(read_dataset(config.input), detector_specs(config));
}

nlohmann::json posterior_document(const RunConfig& config, const GammaPosterior& posterior,
                                  const std::optional<fs::path>& samples_path) {
  auto doc = to_json(posterior);
  doc["seed"] = config.seed;
  doc["p0"] = config.p0;
  doc["p_high"] = config.p_high;
  doc["t"] = config.t;
  doc["samples_path"] = samples_path ? nlohmann::json(samples_path->string()) : nlohmann::json(nullptr);
  doc["meta"] = {{"tool", "gammacontam"}, {"version", kToolVersion}, {"config", config.to_json()}};
  return doc;
}

std::string samples_csv(const RunConfig& config, const GammaPosterior& posterior) {
  std::string text = csv_header(config) + "gamma\n";
  for (double s : posterior.samples()) text += csv::format_number(s) + "\n";
  return text;
}

int cmd_estimate(const RunConfig& config, std::ostream& out) {
  const auto scores = load_scores(config);
  const auto posterior = estimate_posterior(scores, config.estimate_config());
  std::optional<fs::path> samples_path;
  if (config.write_samples && !config.out.empty()) {
    samples_path = config.out / "samples.csv";
    write_file(*samples_path, samples_csv(config, posterior));
  }
  const std::string json = posterior_document(config, posterior, samples_path).dump(2) + "\n";
  if (config.out.empty()) out << json;
  else write_file(config.out / "posterior.json", json);

  if (calibration_exhausted(posterior)) {
    spdlog::warn("calibration infeasible in every restart; reporting gamma = 0");
    return 1;
  }
  return 0;
}

int cmd_sample_dump(const RunConfig& config, std::ostream& out) {
  const auto scores = load_scores(config);
  const auto posterior = estimate_posterior(scores, config.estimate_config());
  const auto text = samples_csv(config, posterior);
  if (config.out.empty()) out << text;
  else write_file(config.out / "samples.csv", text);
  return calibration_exhausted(posterior) ? 1 : 0;
}

int cmd_thresholds(const RunConfig& config, std::ostream& out) {
  const auto scores = load_scores(config);
  const auto estimates = estimate_all(scores, config.threshold_methods(), config.seed);
  std::string text = csv_header(config) + "method";
  for (const auto& name : scores.detector_names) text += ",threshold_" + name;
  text += ",gamma_hat\n";
  int status = 0;
  for (const auto& e : estimates) {
    if (!e.error.empty()) {
      spdlog::warn("{} failed: {}", e.method, e.error);
      status = 1;
      continue;
    }
    text += e.method;
    for (double t : e.thresholds) text += "," + csv::format_number(t);
    text += "," + csv::format_number(e.gamma_hat) + "\n";
  }
  if (config.out.empty()) out << text;
  else write_file(config.out / "thresholds.csv", text);
  return status;
}

int cmd_benchmark(const RunConfig& config) {
  if (config.out.empty()) throw InputError("benchmark needs --out");
  const auto result = run_benchmark(config);

  std::string report = csv_header(config) +
                       "dataset,method,gamma_hat,gamma_true,mae,f1_true,f1_hat,f1_deterioration,fpr,fnr\n";
  for (const auto& r : result.rows) {
    const bool labelled = !std::isnan(r.gamma_true);
    report += r.dataset + "," + r.method + "," + csv::format_number(r.gamma_hat) + "," +
              (labelled ? csv::format_number(r.gamma_true) : "") + "," +
              (labelled ? csv::format_number(r.mae) : "") + "," + cell(r.f1_true) + "," +
              cell(r.f1_hat) + "," + cell(r.f1_deterioration) + "," + cell(r.fpr) + "," +
              cell(r.fnr) + "\n";
  }
  write_file(config.out / "report.csv", report);

  std::string calib = csv_header(config) + "expected,empirical\n";
  for (const auto& p : result.calibration)
    calib += csv::format_number(p.expected) + "," + csv::format_number(p.empirical) + "\n";
  write_file(config.out / "calibration.csv", calib);

  std::string ranks = csv_header(config) + "method,mean_rank,mean_mae,datasets\n";
  for (const auto& r : result.ranks)
    ranks += r.method + "," + csv::format_number(r.mean_rank) + "," + csv::format_number(r.mean_mae) +
             "," + std::to_string(r.datasets) + "\n";
  write_file(config.out / "ranks.csv", ranks);
  return 0;
}

void add_common(CLI::App* sub, RunConfig& c, bool estimation) {
  sub->add_option("--input", c.input, "Dataset CSV (benchmark: directory of CSVs)");
  sub->add_option("--detectors", c.detectors, "Built-in detectors, e.g. knn,lof:k=20")->delimiter(',');
  sub->add_option("--external", c.externals, "Single-column CSV of raw scores (repeatable)");
  sub->add_option("--seed", c.seed, "Master seed");
  sub->add_option("--out", c.out, "Output directory (stdout when omitted)");
  if (estimation) {
    sub->add_option("--p0", c.p0, "P(no anomalies)");
    sub->add_option("--phigh", c.p_high, "P(contamination >= t)");
    sub->add_option("--t", c.t, "High-contamination threshold");
    sub->add_option("--cap", c.cap, "Upper bound on contamination");
    sub->add_option("--restarts", c.restarts, "Independent VI fits");
    sub->add_option("--samples", c.samples, "Posterior draws per restart");
    sub->add_option("--max-components", c.max_components, "DP truncation level");
    sub->add_option("--max-attempts", c.max_attempts, "VI refits when calibration is infeasible");
  }
}

}  // namespace

void RunConfig::validate() const {
  CalibrationTargets{p0, p_high, t, cap}.validate();
  if (restarts < 1) throw InputError("--restarts must be >= 1");
  if (samples < 1) throw InputError("--samples must be >= 1");
  if (max_components < 1) throw InputError("--max-components must be >= 1");
  if (max_attempts < 1) throw InputError("--max-attempts must be >= 1");
  if (!input.empty() && !scores.empty()) throw InputError("--input and --scores are exclusive");
}

EstimateConfig RunConfig::estimate_config() const {
  EstimateConfig e;
  e.dpgmm.max_components = max_components;
  e.targets = {p0, p_high, t, cap};
  e.restarts = restarts;
  e.samples_per_restart = samples;
  e.max_attempts = max_attempts;
  e.seed = seed;
  return e;
}

std::vector<ThresholdMethod> RunConfig::threshold_methods() const {
  if (methods.empty()) return all_threshold_methods();
  std::vector<ThresholdMethod> out;
  for (const auto& m : methods)
    if (m != "gammagmm") out.push_back(parse_threshold_method(m));
  return out;
}

nlohmann::json RunConfig::to_json() const {
  std::vector<std::string> ext;
  for (const auto& p : externals) ext.push_back(p.string());
  return {{"command", command},   {"input", input.string()},
          {"scores", scores.string()}, {"detectors", detectors},
          {"external", ext},      {"p0", p0},
          {"p_high", p_high},     {"t", t},
          {"cap", cap},           {"restarts", restarts},
          {"samples", samples},   {"max_components", max_components},
          {"max_attempts", max_attempts}, {"seed", seed},
          {"methods", methods}};
}

BenchmarkResult run_benchmark(const RunConfig& config) {
  if (!fs::is_directory(config.input)) throw InputError(config.input.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(config.input))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("no .csv datasets in " + config.input.string());

  const auto methods = config.threshold_methods();
  struct PerDataset {
    std::vector<EvalRow> rows;
    std::optional<GammaPosterior> posterior;
    double gamma_true = std::nan("");
  };
  std::vector<PerDataset> results(files.size());

  auto estimate = config.estimate_config();
  estimate.threads = 1;
  parallel_for(files.size(), default_thread_count(), [&](std::size_t i) {
    const auto dataset = read_dataset(files[i]);
    const auto scores = build_score_matrix(dataset, detector_specs(config));
    auto posterior = estimate_posterior(scores, estimate);

    std::vector<std::pair<std::string, double>> estimates{{"gammagmm", point_estimate(posterior)}};
    for (const auto& e : estimate_all(scores, methods, config.seed)) {
      if (!e.error.empty()) {
        spdlog::warn("{}: {} failed: {}", dataset.name(), e.method, e.error);
        continue;
      }
      estimates.emplace_back(e.method, e.gamma_hat);
    }

    auto& res = results[i];
    std::vector<std::vector<double>> columns;
    for (Eigen::Index j = 0; j < scores.detectors(); ++j) columns.push_back(scores.column(j));
    std::vector<std::size_t> best;
    if (dataset.labels()) {
      res.gamma_true = dataset.contamination();
      best = select_best_detectors(columns, *dataset.labels(), res.gamma_true);
    } else {
      spdlog::warn("{} has no label column; skipping F1 and calibration", dataset.name());
    }

    for (const auto& [method, gamma_hat] : estimates) {
      EvalRow row;
      row.dataset = dataset.name();
      row.method = method;
      row.gamma_hat = gamma_hat;
      row.gamma_true = res.gamma_true;
      if (dataset.labels()) {
        const auto& labels = *dataset.labels();
        row.mae = mae(gamma_hat, res.gamma_true);
        std::vector<double> f_true, f_hat, det, fpr, fnr;
        for (std::size_t m : best) {
          const auto pred_hat = threshold_predictions(columns[m], gamma_hat);
          f_true.push_back(f1_score(threshold_predictions(columns[m], res.gamma_true), labels));
          f_hat.push_back(f1_score(pred_hat, labels));
          if (auto d = f1_deterioration(columns[m], labels, res.gamma_true, gamma_hat)) det.push_back(*d);
          if (auto rates = fpr_fnr(pred_hat, labels)) {
            fpr.push_back(rates->fpr);
            fnr.push_back(rates->fnr);
          }
        }
        row.f1_true = stats::mean(f_true);
        row.f1_hat = stats::mean(f_hat);
        if (!det.empty()) row.f1_deterioration = stats::mean(det);
        else spdlog::warn("{}/{}: F1 deterioration undefined", dataset.name(), method);
        if (!fpr.empty()) {
          row.fpr = stats::mean(fpr);
          row.fnr = stats::mean(fnr);
        }
      } else {
        row.mae = std::nan("");
      }
      res.rows.push_back(std::move(row));
    }
    res.posterior = std::move(posterior);
  });

  BenchmarkResult out;
  std::vector<const GammaPosterior*> posteriors;
  std::vector<double> truths;
  std::vector<EvalRow> labelled_rows;
  for (const auto& r : results) {
    out.rows.insert(out.rows.end(), r.rows.begin(), r.rows.end());
    if (!std::isnan(r.gamma_true)) {
      posteriors.push_back(&*r.posterior);
      truths.push_back(r.gamma_true);
      labelled_rows.insert(labelled_rows.end(), r.rows.begin(), r.rows.end());
    }
  }
  if (!posteriors.empty()) {
    const auto grid = default_v_grid();
    out.calibration = calibration_curve(posteriors, truths, grid);
  }
  out.ranks = rank_methods(labelled_rows);
  return out;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  use_stderr_logger();
  RunConfig config;
  CLI::App app{"Posterior estimation of the contamination factor of unlabeled data"};
  app.set_version_flag("--version", std::string("gammacontam ") + kToolVersion);
  app.require_subcommand(1);

  auto* estimate = app.add_subcommand("estimate", "Estimate the contamination posterior");
  add_common(estimate, config, true);
  estimate->add_option("--scores", config.scores, "Precomputed score CSV");
  estimate->add_flag("--write-samples", config.write_samples, "Also write samples.csv to --out");

  auto* dump = app.add_subcommand("sample-dump", "Write posterior samples as CSV");
  add_common(dump, config, true);
  dump->add_option("--scores", config.scores, "Precomputed score CSV");

  auto* thresholds = app.add_subcommand("thresholds", "Run the threshold baselines");
  add_common(thresholds, config, false);
  thresholds->add_option("--scores", config.scores, "Precomputed score CSV");
  thresholds->add_option("--methods", config.methods, "Subset of threshold methods")->delimiter(',');

  auto* bench = app.add_subcommand("benchmark", "Evaluate all methods on labelled datasets");
  add_common(bench, config, true);
  bench->add_option("--methods", config.methods, "Subset of threshold methods")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    config.command = app.get_subcommands().front()->get_name();
    config.validate();
    if (config.command == "estimate") return cmd_estimate(config, out);
    if (config.command == "sample-dump") return cmd_sample_dump(config, out);
    if (config.command == "thresholds") return cmd_thresholds(config, out);
    return cmd_benchmark(config);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace gammacontam
