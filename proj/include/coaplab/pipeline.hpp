#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coaplab/classifiers.hpp"
#include "coaplab/error.hpp"
#include "coaplab/features.hpp"
#include "coaplab/ga.hpp"
#include "coaplab/lstm.hpp"
#include "coaplab/traffic.hpp"
#include "coaplab/windows.hpp"

namespace coaplab {

inline const std::vector<std::string> kAllModels = {"svm", "naive_bayes", "decision_tree", "random_forest", "lstm"};

struct PipelineConfig {
  ScenarioConfig scenario;
  std::uint64_t seed = 42;  // root seed; every stage seed is derived from it
  Micros window_width = kDefaultWindowWidth;
  std::int64_t threshold = kDefaultMaliciousThreshold;
  double test_fraction = 0.2;
  bool crosscheck = true;
  std::vector<std::string> models = kAllModels;
  bool use_ga = false;
  GaConfig ga;
  std::size_t ga_max_rows = 3000;
  double nb_var_smoothing = 1e-9;
  TreeParams tree;
  ForestParams forest;
  SvmParams svm;
  LstmParams lstm;

  /// Re-derives every stage seed from `seed`.
  void derive_seeds();
  void validate() const;
};

/// Accepts a bare scenario object or {"scenario": {...}, "pipeline": {...}}.
PipelineConfig pipeline_config_from_json(std::string_view text);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
nlohmann::json pipeline_config_json(const PipelineConfig& cfg);

/// Names a pipeline stage in error messages.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct LabelingResult {
  std::vector<LabeledWindow> windows;
  std::vector<LabelDisagreement> disagreements;
};

LabelingResult label_capture(std::span<const PacketRecord> packets, const AttackLogFile& log,
                             const PipelineConfig& cfg);

/// Padded, per-window normalized features for every non-empty window, plus the split.
struct PreparedFeatures {
  WindowTensor tensor;
  std::vector<std::size_t> window_index;  // source window of each tensor entry
  SplitIndices split;
  TokenVocabulary vocab;
  FeatureMask mask;
  std::optional<GaResult> ga;
};

/// Per-packet rows (full schema, tokenized) of the given windows, each labelled with its window's label.
FeatureDataset packet_dataset(std::span<const LabeledWindow> windows, TokenVocabulary& vocab, VocabMode mode);

PreparedFeatures prepare_features(std::span<const LabeledWindow> windows, const PipelineConfig& cfg);

struct ModelResult {
  std::string model;
  ConfusionMatrix confusion;
  nlohmann::json parameters;
};

/// Trains one model on the train split; the result is the saved model document.
nlohmann::json train_model(const std::string& name, const PreparedFeatures& features, const PipelineConfig& cfg);
/// Scores a saved model document on the test split.
ConfusionMatrix evaluate_model(const nlohmann::json& saved, const PreparedFeatures& features);

/// Trains each requested model on the train split and scores it on the test split.
std::vector<ModelResult> train_and_evaluate(const PreparedFeatures& features, const PipelineConfig& cfg);

nlohmann::json evaluation_report(const std::vector<ModelResult>& results, const PipelineConfig& cfg,
                                 const PreparedFeatures& features);

std::string confusion_csv(const ConfusionMatrix& cm);

std::string sha256_file(const std::filesystem::path& path);

/// Run bookkeeping written to manifest.json.
class RunManifest {
 public:
  RunManifest(std::string command, nlohmann::json config, std::uint64_t seed);

  void add_input(const std::filesystem::path& path);
  void add_artifact(const std::filesystem::path& path);
  void add_timing(const std::string& stage, double seconds);
  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  nlohmann::json config_;
  std::uint64_t seed_;
  nlohmann::json inputs_ = nlohmann::json::array();
  nlohmann::json artifacts_ = nlohmann::json::array();
  nlohmann::json timings_ = nlohmann::json::object();
};

struct GenerateOutput {
  std::filesystem::path pcap;
  std::filesystem::path attack_log;
  ScenarioOutput scenario;
};

GenerateOutput cmd_generate(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, RunManifest& manifest);

struct PipelineOutput {
  nlohmann::json report;
  std::filesystem::path report_path;
};

PipelineOutput cmd_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_dir);

/// Features sidecar (labels, split, vocabulary, mask) next to the binary tensor.
nlohmann::json features_sidecar(const PreparedFeatures& f);
PreparedFeatures load_features(const std::filesystem::path& tensor, const std::filesystem::path& sidecar);

}  // namespace coaplab
