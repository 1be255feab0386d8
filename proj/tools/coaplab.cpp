// coaplab: command-line front end for the CoAP DoS detection pipeline.
#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <sstream>

#include "coaplab/pipeline.hpp"

namespace fs = std::filesystem;
using namespace coaplab;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitDisagreement = 2;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::optional<double> attack_interval;
  std::optional<std::int64_t> threshold;
  std::optional<double> test_fraction;
  std::vector<std::string> models;
  bool ga = false;
  bool no_crosscheck = false;
};

void add_config_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "root seed (all stage seeds derive from it)");
}

void add_scenario_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--duration", o.duration, "virtual scenario length in seconds");
  cmd->add_option("--attack-interval", o.attack_interval, "seconds between coordinated bursts");
}

void add_label_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--threshold", o.threshold, "attacker packets above which a window is malicious");
  cmd->add_flag("--no-crosscheck", o.no_crosscheck, "do not fail on disagreement with the attack log");
}

void add_feature_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--test-fraction", o.test_fraction, "held-out fraction of windows");
  cmd->add_flag("--ga", o.ga, "select features with the genetic algorithm");
}

std::string canonical_model(const std::string& name) {
  if (name == "nb") return "naive_bayes";
  if (name == "tree" || name == "dt") return "decision_tree";
  if (name == "forest" || name == "rf") return "random_forest";
  if (name == "rnn") return "lstm";
  return name;
}

// Precedence: flags, then the config file, then built-in defaults.
PipelineConfig resolve(const Overrides& o) {
  PipelineConfig cfg;
  if (!o.config.empty()) {
    cfg = load_pipeline_config(o.config);
  } else {
    cfg.derive_seeds();
  }
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.derive_seeds();
  }
  if (o.duration) cfg.scenario.duration = *o.duration;
  if (o.attack_interval) cfg.scenario.attack_interval = *o.attack_interval;
  if (o.threshold) cfg.threshold = *o.threshold;
  if (o.test_fraction) cfg.test_fraction = *o.test_fraction;
  if (!o.models.empty()) {
    cfg.models.clear();
    for (const auto& m : o.models) cfg.models.push_back(canonical_model(m));
  }
  if (o.ga) cfg.use_ga = true;
  if (o.no_crosscheck) cfg.crosscheck = false;
  return cfg;
}

struct CaptureInputs {
  std::string pcap;
  std::string attacks;
};

void add_capture_inputs(CLI::App* cmd, CaptureInputs& in) {
  cmd->add_option("--pcap", in.pcap, "capture file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--attacks", in.attacks, "attack log JSON")->required()->check(CLI::ExistingFile);
}

LabelingResult label_inputs(const CaptureInputs& in, const PipelineConfig& cfg, RunManifest& manifest) {
  manifest.add_input(in.pcap);
  manifest.add_input(in.attacks);
  const auto packets = read_pcap(in.pcap);
  if (packets.empty()) throw DataError("capture " + in.pcap + " contains no packets");
  return label_capture(packets, read_attack_log(in.attacks), cfg);
}

void report_disagreements(const LabelingResult& r) {
  for (const auto& d : r.disagreements) {
    spdlog::error("window {} (start {} us): packet count says {}, attack log says {}", d.window_index,
                  d.window_start, d.count_label == Label::Malicious ? "malicious" : "benign",
                  d.overlap_label == Label::Malicious ? "malicious" : "benign");
  }
}

void write_features(const PreparedFeatures& f, const PipelineConfig& cfg, const fs::path& out, RunManifest& manifest) {
  fs::create_directories(out);
  write_tensor(f.tensor, out / "features.bin");
  write_text_file(out / "features.json", features_sidecar(f).dump() + "\n");
  manifest.add_artifact(out / "features.bin");
  manifest.add_artifact(out / "features.json");
  if (f.ga) {
    write_text_file(out / "ga_report.json", ga_report_json(*f.ga, cfg.ga).dump(2) + "\n");
    manifest.add_artifact(out / "ga_report.json");
  }
}

PreparedFeatures read_features(const fs::path& dir, RunManifest& manifest) {
  manifest.add_input(dir / "features.bin");
  manifest.add_input(dir / "features.json");
  return load_features(dir / "features.bin", dir / "features.json");
}

int run_generate(const Overrides& o, const fs::path& out) {
  const PipelineConfig cfg = resolve(o);
  RunManifest manifest("generate", pipeline_config_json(cfg), cfg.seed);
  const GenerateOutput g = cmd_generate(cfg.scenario, out, manifest);
  manifest.write(out / "manifest.json");
  std::cout << "packets " << g.scenario.packets.size() << ", attack events " << g.scenario.attack_log.size()
            << "\n";
  return 0;
}

int run_label(const Overrides& o, const CaptureInputs& in, const fs::path& out) {
  const PipelineConfig cfg = resolve(o);
  RunManifest manifest("label", pipeline_config_json(cfg), cfg.seed);
  const LabelingResult r = label_inputs(in, cfg, manifest);
  fs::create_directories(out);
  write_windows_ndjson(r.windows, out / "windows.ndjson");
  manifest.add_artifact(out / "windows.ndjson");
  manifest.write(out / "manifest.json");
  const LabelSummary s = summarize(r.windows);
  std::cout << json{{"windows", s.windows}, {"malicious", s.malicious}, {"benign", s.benign}}.dump() << "\n";
  report_disagreements(r);
  if (cfg.crosscheck && !r.disagreements.empty()) return kExitDisagreement;
  return 0;
}

int run_features(const Overrides& o, const CaptureInputs& in, const fs::path& out, bool force_ga) {
  PipelineConfig cfg = resolve(o);
  if (force_ga) cfg.use_ga = true;
  RunManifest manifest(force_ga ? "select" : "features", pipeline_config_json(cfg), cfg.seed);
  const LabelingResult r = label_inputs(in, cfg, manifest);
  report_disagreements(r);
  if (cfg.crosscheck && !r.disagreements.empty()) return kExitDisagreement;
  const PreparedFeatures f = prepare_features(r.windows, cfg);
  write_features(f, cfg, out, manifest);
  manifest.write(out / "manifest.json");
  std::cout << "features: " << mask_column_names(f.mask).size() << " columns";
  if (f.ga) std::cout << ", GA fitness " << f.ga->best_fitness;
  std::cout << "\n";
  return 0;
}

int run_train(const Overrides& o, const fs::path& features_dir, const fs::path& out) {
  const PipelineConfig cfg = resolve(o);
  RunManifest manifest("train", pipeline_config_json(cfg), cfg.seed);
  const PreparedFeatures f = read_features(features_dir, manifest);
  fs::create_directories(out);
  for (const auto& name : cfg.models) {
    const auto path = out / (name + ".json");
    write_text_file(path, train_model(name, f, cfg).dump() + "\n");
    manifest.add_artifact(path);
  }
  manifest.write(out / "manifest.json");
  return 0;
}

int run_eval(const Overrides& o, const fs::path& features_dir, const fs::path& models_dir, const fs::path& out) {
  PipelineConfig cfg = resolve(o);
  RunManifest manifest("eval", pipeline_config_json(cfg), cfg.seed);
  const PreparedFeatures f = read_features(features_dir, manifest);
  std::vector<ModelResult> results;
  std::vector<std::string> evaluated;
  for (const auto& name : cfg.models) {
    const auto path = models_dir / (name + ".json");
    if (!fs::exists(path)) continue;
    manifest.add_input(path);
    ModelResult r;
    r.model = name;
    r.parameters = json::parse(read_text_file(path));
    r.confusion = evaluate_model(r.parameters, f);
    results.push_back(std::move(r));
  }
  if (results.empty()) throw DataError("no trained models found in " + models_dir.string());
  fs::create_directories(out);
  for (const auto& r : results) {
    const auto csv = out / ("confusion_" + r.model + ".csv");
    write_text_file(csv, confusion_csv(r.confusion));
    manifest.add_artifact(csv);
  }
  write_text_file(out / "report.json", evaluation_report(results, cfg, f).dump(2) + "\n");
  manifest.add_artifact(out / "report.json");
  manifest.write(out / "manifest.json");
  return 0;
}

int run_pipeline(const Overrides& o, const fs::path& out) {
  const PipelineConfig cfg = resolve(o);
  const PipelineOutput p = cmd_pipeline(cfg, out);
  for (const auto& m : p.report.at("models")) {
    std::cout << m.at("model").get<std::string>() << " " << m.at("accuracy_percent").get<double>() << "%\n";
  }
  return 0;
}

int run_report(const fs::path& run_dir) {
  const json report = json::parse(read_text_file(run_dir / "report.json"));
  std::cout << "seed " << report.at("seed") << ", test windows " << report.at("test").at("size") << " ("
            << report.at("test").at("malicious") << " malicious)\n";
  std::cout << "model            accuracy   precision  recall     f1\n";
  for (const auto& m : report.at("models")) {
    std::ostringstream line;
    line << std::left << std::setw(17) << m.at("model").get<std::string>() << std::fixed << std::setprecision(2)
         << std::setw(11) << m.at("accuracy_percent").get<double>() << std::setprecision(4) << std::setw(11)
         << m.at("precision").get<double>() << std::setw(11) << m.at("recall").get<double>()
         << m.at("f1").get<double>();
    std::cout << line.str() << "\n";
  }
  return 0;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("coaplab");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("COAPLAB_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"CoAP DoS traffic generation and detection pipeline"};
  app.require_subcommand(1);

  Overrides o;
  CaptureInputs in;
  std::string out = "run";
  std::string features_dir;
  std::string models_dir;

  auto* generate = app.add_subcommand("generate", "simulate the scenario, write capture.pcap and attacks.json");
  add_config_flags(generate, o);
  add_scenario_flags(generate, o);
  generate->add_option("--out", out, "output directory");

  auto* label = app.add_subcommand("label", "label 10 s windows of a capture");
  add_config_flags(label, o);
  add_capture_inputs(label, in);
  add_label_flags(label, o);
  label->add_option("--out", out, "output directory");

  auto* features = app.add_subcommand("features", "tokenize, pad and normalize window features");
  add_config_flags(features, o);
  add_capture_inputs(features, in);
  add_label_flags(features, o);
  add_feature_flags(features, o);
  features->add_option("--out", out, "output directory");

  auto* select = app.add_subcommand("select", "run GA feature selection, then build features");
  add_config_flags(select, o);
  add_capture_inputs(select, in);
  add_label_flags(select, o);
  select->add_option("--test-fraction", o.test_fraction, "held-out fraction of windows");
  select->add_option("--out", out, "output directory");

  auto* train = app.add_subcommand("train", "fit models on a features directory");
  add_config_flags(train, o);
  train->add_option("--features", features_dir, "features directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--models", o.models, "models to train");
  train->add_option("--out", out, "model output directory");

  auto* eval = app.add_subcommand("eval", "score trained models on the held-out windows");
  add_config_flags(eval, o);
  eval->add_option("--features", features_dir, "features directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--model-dir", models_dir, "trained model directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--models", o.models, "models to evaluate");
  eval->add_option("--out", out, "output directory");

  auto* pipeline = app.add_subcommand("pipeline", "generate, label, featurize, train and evaluate");
  add_config_flags(pipeline, o);
  add_scenario_flags(pipeline, o);
  add_label_flags(pipeline, o);
  add_feature_flags(pipeline, o);
  pipeline->add_option("--models", o.models, "models to train (svm, naive_bayes|nb, decision_tree, random_forest, lstm)");
  pipeline->add_option("--out", out, "run directory");

  auto* report = app.add_subcommand("report", "print the evaluation summary of a run directory");
  report->add_option("--out", out, "run directory containing report.json")->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return run_generate(o, out);
    if (*label) return run_label(o, in, out);
    if (*features) return run_features(o, in, out, false);
    if (*select) return run_features(o, in, out, true);
    if (*train) return run_train(o, features_dir, out);
    if (*eval) return run_eval(o, features_dir, models_dir, out);
    if (*pipeline) return run_pipeline(o, out);
    if (*report) return run_report(out);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
