#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synmix/adapter.hpp"
#include "synmix/sampler.hpp"

namespace synmix {

/// Detector training settings. They are passed to detector adapters and
/// echoed into reports; nothing here trains a model.
struct TrainingHyperparameters {
  int epochs = 300;
  int patience = 30;
  int batch = 16;
  double learning_rate = 0.01;
  std::string schedule = "cosine";
  bool augmentation = false;

  nlohmann::json to_json() const;
  static TrainingHyperparameters from_json(const nlohmann::json& j);
};

struct ModelSpec {
  std::string name;
  std::optional<AdapterSpec> detector;
};

struct IqaStageConfig {
  bool enabled = false;
  std::filesystem::path brisque_model;
  std::filesystem::path niqe_model;
  std::filesystem::path external_scores;
};

/// How the real-only row is produced: trained once and repeated for every
/// replicate id (standard deviation 0), trained per replicate, or left out.
enum class BaselineMode { Once, PerReplicate, None };

struct ExperimentConfig {
  std::filesystem::path dataset_root;
  std::filesystem::path real_manifest = "real.json";
  std::filesystem::path synthetic_manifest = "synthetic.json";
  int class_count = 3;
  SplitSpec split;
  std::vector<double> p_values{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int replicates = 10;
  int n_training = 0;
  std::uint64_t seed = 0;
  BaselineMode baseline = BaselineMode::Once;
  double alpha = 0.05;
  /// Detections below this confidence are ignored for precision/recall/F1.
  double score_threshold = 0.25;
  std::vector<ModelSpec> models;
  /// When set, detections are read from <dir>/<model>/<plan key>.txt and no
  /// adapter is started.
  std::optional<std::filesystem::path> offline_detections;
  int workers = 1;
  TrainingHyperparameters training;
  IqaStageConfig iqa;
  /// The document the config was read from, stored with the run.
  nlohmann::json source = nlohmann::json::object();

  /// Relative paths are resolved against `base_dir`. Throws ConfigInvalid.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;

  std::filesystem::path real_manifest_path() const;
  std::filesystem::path synthetic_manifest_path() const;
};

struct RunOptions {
  /// Continue an interrupted run in the same directory.
  bool resume = false;
};

struct RunSummary {
  std::vector<std::string> completed;  // stages run now
  std::vector<std::string> skipped;    // stages already done (resume)
  std::vector<std::string> notices;
};

/// Stage names in execution order.
const std::vector<std::string>& experiment_stages();

/// split -> plans -> detections -> eval -> stats -> report (-> iqa).
/// Each stage writes into its own subdirectory of `out_dir` and finishes
/// with a marker under .stages/. A fresh run refuses a non-empty directory;
/// a resumed run skips completed stages and redoes an interrupted one.
RunSummary run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                          const RunOptions& options = {});

}  // namespace synmix
