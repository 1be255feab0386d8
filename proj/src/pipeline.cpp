#include "coaplab/pipeline.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "coaplab/error.hpp"

namespace coaplab {
namespace {

using json = nlohmann::json;

template <typename T>
void read_field(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

constexpr std::uint64_t kSplitStream = 6;

class StageTimer {
 public:
  StageTimer(RunManifest* manifest, std::string stage)
      : manifest_(manifest), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {
    spdlog::info("stage {}: start", stage_);
  }
  ~StageTimer() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    spdlog::info("stage {}: {:.2f} s", stage_, s);
    if (manifest_ != nullptr) manifest_->add_timing(stage_, s);
  }

 private:
  RunManifest* manifest_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

template <typename F>
auto run_stage(const std::string& stage, RunManifest* manifest, F&& body) {
  StageTimer timer(manifest, stage);
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

StageError::StageError(std::string stage, const std::string& what)
    : Error("stage " + stage + " failed: " + what), stage_(std::move(stage)) {}

void PipelineConfig::derive_seeds() {
  scenario.rng_seed = mix_seed(seed, 1);
  ga.rng_seed = mix_seed(seed, 2);
  forest.seed = mix_seed(seed, 3);
  svm.seed = mix_seed(seed, 4);
  lstm.seed = mix_seed(seed, 5);
}

void PipelineConfig::validate() const {
  scenario.validate();
  if (window_width <= 0) throw ConfigError("window width must be positive");
  if (!(test_fraction > 0 && test_fraction < 1)) throw ConfigError("test_fraction must lie in (0, 1)");
  if (models.empty()) throw ConfigError("no models requested");
  for (const auto& m : models) {
    if (std::find(kAllModels.begin(), kAllModels.end(), m) == kAllModels.end()) {
      throw ConfigError("unknown model " + m);
    }
  }
  if (use_ga) ga.validate(kSchemaWidth);
}

PipelineConfig pipeline_config_from_json(std::string_view text) {
  PipelineConfig cfg;
  cfg.scenario = scenario_from_json(text);
  const json doc = json::parse(text);
  const std::uint64_t scenario_seed = cfg.scenario.rng_seed;
  try {
    if (doc.contains("pipeline")) {
      const json& p = doc.at("pipeline");
      read_field(p, "seed", cfg.seed);
      if (p.contains("window_width")) cfg.window_width = static_cast<Micros>(p.at("window_width").get<double>() * 1e6);
      read_field(p, "threshold", cfg.threshold);
      read_field(p, "test_fraction", cfg.test_fraction);
      read_field(p, "crosscheck", cfg.crosscheck);
      read_field(p, "models", cfg.models);
      read_field(p, "use_ga", cfg.use_ga);
      read_field(p, "ga_max_rows", cfg.ga_max_rows);
      read_field(p, "nb_var_smoothing", cfg.nb_var_smoothing);
      if (p.contains("ga")) {
        const json& g = p.at("ga");
        read_field(g, "population_size", cfg.ga.population_size);
        read_field(g, "generations", cfg.ga.generations);
        read_field(g, "crossover_rate", cfg.ga.crossover_rate);
        read_field(g, "mutation_rate", cfg.ga.mutation_rate);
        read_field(g, "elitism_count", cfg.ga.elitism_count);
        read_field(g, "k", cfg.ga.k);
        read_field(g, "fitness_folds", cfg.ga.fitness_folds);
        read_field(g, "fitness_tree_depth", cfg.ga.fitness_tree_depth);
      }
      if (p.contains("tree")) {
        read_field(p.at("tree"), "max_depth", cfg.tree.max_depth);
        read_field(p.at("tree"), "min_samples_split", cfg.tree.min_samples_split);
      }
      if (p.contains("forest")) {
        read_field(p.at("forest"), "n_trees", cfg.forest.n_trees);
        read_field(p.at("forest"), "features_per_split", cfg.forest.features_per_split);
        read_field(p.at("forest"), "bootstrap", cfg.forest.bootstrap);
      }
      if (p.contains("svm")) {
        read_field(p.at("svm"), "lambda", cfg.svm.lambda);
        read_field(p.at("svm"), "epochs", cfg.svm.epochs);
        read_field(p.at("svm"), "average", cfg.svm.average);
      }
      if (p.contains("lstm")) {
        read_field(p.at("lstm"), "hidden", cfg.lstm.hidden);
        read_field(p.at("lstm"), "epochs", cfg.lstm.epochs);
        read_field(p.at("lstm"), "learning_rate", cfg.lstm.learning_rate);
        read_field(p.at("lstm"), "batch_size", cfg.lstm.batch_size);
        read_field(p.at("lstm"), "clip_norm", cfg.lstm.clip_norm);
        read_field(p.at("lstm"), "balance_classes", cfg.lstm.balance_classes);
        read_field(p.at("lstm"), "skip_padding", cfg.lstm.skip_padding);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid pipeline config: ") + e.what());
  }
  cfg.derive_seeds();
  // An explicit scenario seed in the file wins over the derived one.
  const json& scenario_doc = doc.contains("scenario") ? doc.at("scenario") : doc;
  if (scenario_doc.contains("rng_seed")) cfg.scenario.rng_seed = scenario_seed;
  return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  try {
    return pipeline_config_from_json(read_text_file(path));
  } catch (const CaptureError& e) {
    throw ConfigError(e.what());
  }
}

json pipeline_config_json(const PipelineConfig& cfg) {
  return {{"scenario", json::parse(scenario_to_json(cfg.scenario))},
          {"pipeline",
           {{"seed", cfg.seed},
            {"window_width", static_cast<double>(cfg.window_width) / 1e6},
            {"threshold", cfg.threshold},
            {"test_fraction", cfg.test_fraction},
            {"crosscheck", cfg.crosscheck},
            {"models", cfg.models},
            {"use_ga", cfg.use_ga},
            {"ga_max_rows", cfg.ga_max_rows},
            {"nb_var_smoothing", cfg.nb_var_smoothing},
            {"ga",
             {{"population_size", cfg.ga.population_size},
              {"generations", cfg.ga.generations},
              {"crossover_rate", cfg.ga.crossover_rate},
              {"mutation_rate", cfg.ga.mutation_rate},
              {"elitism_count", cfg.ga.elitism_count},
              {"k", cfg.ga.k},
              {"fitness_folds", cfg.ga.fitness_folds},
              {"fitness_tree_depth", cfg.ga.fitness_tree_depth},
              {"rng_seed", cfg.ga.rng_seed}}},
            {"tree", {{"max_depth", cfg.tree.max_depth}, {"min_samples_split", cfg.tree.min_samples_split}}},
            {"forest",
             {{"n_trees", cfg.forest.n_trees},
              {"features_per_split", cfg.forest.features_per_split},
              {"bootstrap", cfg.forest.bootstrap},
              {"seed", cfg.forest.seed}}},
            {"svm",
             {{"lambda", cfg.svm.lambda},
              {"epochs", cfg.svm.epochs},
              {"average", cfg.svm.average},
              {"seed", cfg.svm.seed}}},
            {"lstm",
             {{"hidden", cfg.lstm.hidden},
              {"epochs", cfg.lstm.epochs},
              {"learning_rate", cfg.lstm.learning_rate},
              {"batch_size", cfg.lstm.batch_size},
              {"clip_norm", cfg.lstm.clip_norm},
              {"balance_classes", cfg.lstm.balance_classes},
              {"skip_padding", cfg.lstm.skip_padding},
              {"seed", cfg.lstm.seed}}}}}};
}

LabelingResult label_capture(std::span<const PacketRecord> packets, const AttackLogFile& log,
                             const PipelineConfig& cfg) {
  std::unordered_set<Ipv4> malicious = malicious_ips_from_log(log);
  for (const Ipv4 ip : attacker_ips(cfg.scenario)) malicious.insert(ip);
  LabelingResult out;
  out.windows = label_dataset(packets, malicious, cfg.window_width, cfg.threshold);
  out.disagreements = crosscheck_labels(out.windows, log);
  return out;
}

FeatureDataset packet_dataset(std::span<const LabeledWindow> windows, TokenVocabulary& vocab, VocabMode mode) {
  FeatureDataset d;
  std::size_t total = 0;
  for (const auto& lw : windows) total += lw.window.packets.size();
  std::vector<double> values;
  values.reserve(total * kSchemaWidth);
  for (const auto& lw : windows) {
    for (const auto& p : lw.window.packets) {
      const auto row = tokenize_row(extract_features(p), vocab, mode);
      values.insert(values.end(), row.begin(), row.end());
      d.y.push_back(static_cast<int>(lw.label));
    }
  }
  d.x = Matrix(d.y.size(), kSchemaWidth, std::move(values));
  return d;
}

PreparedFeatures prepare_features(std::span<const LabeledWindow> windows, const PipelineConfig& cfg) {
  PreparedFeatures out;
  std::vector<LabeledWindow> kept;
  for (const auto& lw : windows) {
    // An all-zero window has no Frobenius normalization.
    if (lw.window.packets.empty()) continue;
    kept.push_back(lw);
    out.window_index.push_back(lw.window.index);
  }
  if (kept.empty()) throw DataError("no non-empty windows to featurize");
  std::vector<int> labels;
  for (const auto& lw : kept) labels.push_back(static_cast<int>(lw.label));
  out.split = stratified_split(labels, cfg.test_fraction, mix_seed(cfg.seed, kSplitStream));

  std::vector<LabeledWindow> train, test;
  for (std::size_t i : out.split.train) train.push_back(kept[i]);
  for (std::size_t i : out.split.test) test.push_back(kept[i]);

  out.vocab = TokenVocabulary(FeatureSchema::canonical());
  FeatureDataset packets = packet_dataset(train, out.vocab, VocabMode::Grow);

  out.mask = default_mask();
  if (cfg.use_ga) {
    if (packets.size() > cfg.ga_max_rows) {
      const double fraction = static_cast<double>(cfg.ga_max_rows) / static_cast<double>(packets.size());
      packets = packets.subset(stratified_split(packets.y, fraction, mix_seed(cfg.seed, 7)).test);
    }
    GaConfig ga = cfg.ga;
    out.ga = run_ga(packets, ga);
    out.mask = out.ga->best_mask;
  }

  WindowTensor train_t = window_features(train, out.vocab, VocabMode::Frozen, out.mask);
  WindowTensor test_t = window_features(test, out.vocab, VocabMode::Frozen, out.mask);
  WindowTensor all;
  all.windows.resize(kept.size());
  all.labels = labels;
  for (std::size_t k = 0; k < out.split.train.size(); ++k) all.windows[out.split.train[k]] = std::move(train_t.windows[k]);
  for (std::size_t k = 0; k < out.split.test.size(); ++k) all.windows[out.split.test[k]] = std::move(test_t.windows[k]);

  const std::vector<double> pad(out.mask.popcount(), 0.0);
  all = pad_windows(std::move(all), pad);
  for (auto& w : all.windows) w = frobenius_normalize(w);
  out.tensor = std::move(all);
  return out;
}

json train_model(const std::string& name, const PreparedFeatures& features, const PipelineConfig& cfg) {
  json params;
  std::uint64_t seed = 0;
  if (name == "lstm") {
    const SequenceDataset seq = as_sequences(features.tensor);
    params = to_json(lstm_fit(seq.subset(features.split.train), cfg.lstm));
    seed = cfg.lstm.seed;
  } else {
    const FeatureDataset train = flatten_tensor(features.tensor).subset(features.split.train);
    if (name == "svm") {
      params = to_json(svm_fit(train, cfg.svm));
      seed = cfg.svm.seed;
    } else if (name == "naive_bayes") {
      params = to_json(nb_fit(train, cfg.nb_var_smoothing));
    } else if (name == "decision_tree") {
      params = to_json(tree_fit(train, cfg.tree));
    } else if (name == "random_forest") {
      ForestParams fp = cfg.forest;
      fp.tree = cfg.tree;
      params = to_json(forest_fit(train, fp));
      seed = fp.seed;
    } else {
      throw ConfigError("unknown model " + name);
    }
  }
  return {{"model", name}, {"seed", seed}, {"root_seed", cfg.seed}, {"parameters", std::move(params)}};
}

ConfusionMatrix evaluate_model(const json& saved, const PreparedFeatures& features) {
  try {
    const std::string name = saved.at("model").get<std::string>();
    const json& params = saved.at("parameters");
    if (name == "lstm") {
      return evaluate(lstm_from_json(params), as_sequences(features.tensor).subset(features.split.test));
    }
    const FeatureDataset test = flatten_tensor(features.tensor).subset(features.split.test);
    if (name == "svm") return evaluate(svm_from_json(params), test);
    if (name == "naive_bayes") return evaluate(nb_from_json(params), test);
    if (name == "decision_tree") return evaluate(tree_from_json(params), test);
    if (name == "random_forest") return evaluate(forest_from_json(params), test);
    throw ConfigError("unknown model " + name);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

std::vector<ModelResult> train_and_evaluate(const PreparedFeatures& features, const PipelineConfig& cfg) {
  std::vector<ModelResult> results;
  for (const auto& name : cfg.models) {
    spdlog::info("training {}", name);
    ModelResult r;
    r.model = name;
    r.parameters = train_model(name, features, cfg);
    r.confusion = evaluate_model(r.parameters, features);
    spdlog::info("{}: accuracy {:.2f}%", name, accuracy_percent(r.confusion));
    results.push_back(std::move(r));
  }
  return results;
}

json evaluation_report(const std::vector<ModelResult>& results, const PipelineConfig& cfg,
                       const PreparedFeatures& features) {
  auto count_malicious = [&](const std::vector<std::size_t>& idx) {
    std::size_t n = 0;
    for (std::size_t i : idx) n += features.tensor.labels[i] == 1 ? 1 : 0;
    return n;
  };
  json models = json::array();
  for (const auto& r : results) {
    models.push_back({{"model", r.model},
                      {"confusion_matrix", to_json(r.confusion)},
                      {"accuracy", r.confusion.accuracy()},
                      {"accuracy_percent", accuracy_percent(r.confusion)},
                      {"precision", r.confusion.precision()},
                      {"recall", r.confusion.recall()},
                      {"f1", r.confusion.f1()}});
  }
  return {{"seed", cfg.seed},
          {"split_seed", mix_seed(cfg.seed, kSplitStream)},
          {"test_fraction", cfg.test_fraction},
          {"windows", features.tensor.windows.size()},
          {"window_rows", features.tensor.max_rows()},
          {"train", {{"size", features.split.train.size()}, {"malicious", count_malicious(features.split.train)}}},
          {"test", {{"size", features.split.test.size()}, {"malicious", count_malicious(features.split.test)}}},
          {"features", mask_column_names(features.mask)},
          {"models", models}};
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "actual,predicted_benign,predicted_malicious\n";
  out << "benign," << cm.tn << ',' << cm.fp << '\n';
  out << "malicious," << cm.fn << ',' << cm.tp << '\n';
  return out.str();
}

std::string sha256_file(const std::filesystem::path& path) {
  const Bytes data = read_binary_file(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < length; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

RunManifest::RunManifest(std::string command, json config, std::uint64_t seed)
    : command_(std::move(command)), config_(std::move(config)), seed_(seed) {}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs_.push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
}

void RunManifest::add_artifact(const std::filesystem::path& path) {
  artifacts_.push_back({{"path", path.filename().string()}, {"sha256", sha256_file(path)}});
}

void RunManifest::add_timing(const std::string& stage, double seconds) { timings_[stage] = seconds; }

json RunManifest::to_json() const {
  // The run id only depends on the command, config and seed, so identical reruns share it.
  std::ostringstream id;
  id << command_ << '-' << std::hex << mix_seed(seed_, std::hash<std::string>{}(config_.dump()));
  return {{"run_id", id.str()},
          {"command", command_},
          {"seed", seed_},
          {"config", config_},
          {"inputs", inputs_},
          {"artifacts", artifacts_},
          {"stage_timings_s", timings_}};
}

void RunManifest::write(const std::filesystem::path& path) const { write_text_file(path, to_json().dump(2) + "\n"); }

GenerateOutput cmd_generate(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, RunManifest& manifest) {
  return run_stage("generate", &manifest, [&] {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    GenerateOutput out;
    out.scenario = run_scenario(cfg);
    out.pcap = out_dir / "capture.pcap";
    out.attack_log = out_dir / "attacks.json";
    write_pcap(out.scenario.packets, out.pcap);
    write_attack_log(out.scenario.attack_log, out.attack_log);
    manifest.add_artifact(out.pcap);
    manifest.add_artifact(out.attack_log);
    return out;
  });
}

json features_sidecar(const PreparedFeatures& f) {
  json doc = {{"labels", f.tensor.labels},
              {"window_index", f.window_index},
              {"split", {{"train", f.split.train}, {"test", f.split.test}}},
              {"rows", f.tensor.max_rows()},
              {"cols", f.mask.popcount()},
              {"mask", mask_column_names(f.mask)},
              {"vocabulary", f.vocab.to_json()}};
  if (f.ga) doc["ga_best_fitness"] = f.ga->best_fitness;
  return doc;
}

PreparedFeatures load_features(const std::filesystem::path& tensor, const std::filesystem::path& sidecar) {
  PreparedFeatures f;
  try {
    const json doc = json::parse(read_text_file(sidecar));
    f.tensor = read_tensor(tensor, doc.at("labels").get<std::vector<int>>());
    f.window_index = doc.at("window_index").get<std::vector<std::size_t>>();
    f.split.train = doc.at("split").at("train").get<std::vector<std::size_t>>();
    f.split.test = doc.at("split").at("test").get<std::vector<std::size_t>>();
    f.mask = mask_from_names(doc.at("mask").get<std::vector<std::string>>());
    f.vocab = TokenVocabulary::from_json(doc.at("vocabulary"));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed features sidecar: ") + e.what());
  }
  return f;
}

PipelineOutput cmd_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_dir) {
  RunManifest manifest("pipeline", pipeline_config_json(cfg), cfg.seed);
  run_stage("config", nullptr, [&] {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    return 0;
  });
  GenerateOutput gen = cmd_generate(cfg.scenario, out_dir, manifest);

  LabelingResult labeled = run_stage("label", &manifest, [&] {
    AttackLogFile log{kAttackLogSchema, gen.scenario.attack_log};
    LabelingResult r = label_capture(gen.scenario.packets, log, cfg);
    const auto path = out_dir / "windows.ndjson";
    write_windows_ndjson(r.windows, path);
    manifest.add_artifact(path);
    if (cfg.crosscheck && !r.disagreements.empty()) {
      throw DataError(std::to_string(r.disagreements.size()) + " windows disagree with the attack log");
    }
    return r;
  });
  gen.scenario.packets.clear();

  PreparedFeatures features = run_stage("features", &manifest, [&] {
    PreparedFeatures f = prepare_features(labeled.windows, cfg);
    write_tensor(f.tensor, out_dir / "features.bin");
    write_text_file(out_dir / "features.json", features_sidecar(f).dump() + "\n");
    manifest.add_artifact(out_dir / "features.bin");
    manifest.add_artifact(out_dir / "features.json");
    if (f.ga) {
      write_text_file(out_dir / "ga_report.json", ga_report_json(*f.ga, cfg.ga).dump(2) + "\n");
      manifest.add_artifact(out_dir / "ga_report.json");
    }
    return f;
  });
  labeled.windows.clear();

  const std::vector<ModelResult> results =
      run_stage("train", &manifest, [&] { return train_and_evaluate(features, cfg); });

  PipelineOutput out = run_stage("eval", &manifest, [&] {
    std::filesystem::create_directories(out_dir / "models");
    for (const auto& r : results) {
      const auto model_path = out_dir / "models" / (r.model + ".json");
      write_text_file(model_path, r.parameters.dump() + "\n");
      manifest.add_artifact(model_path);
      const auto csv = out_dir / ("confusion_" + r.model + ".csv");
      write_text_file(csv, confusion_csv(r.confusion));
      manifest.add_artifact(csv);
    }
    PipelineOutput o;
    o.report = evaluation_report(results, cfg, features);
    o.report_path = out_dir / "report.json";
    write_text_file(o.report_path, o.report.dump(2) + "\n");
    manifest.add_artifact(o.report_path);
    return o;
  });
  manifest.write(out_dir / "manifest.json");
  return out;
}

}  // namespace coaplab
