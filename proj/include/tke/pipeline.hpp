#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "tke/error.hpp"
#include "tke/ingest.hpp"
#include "tke/models/regressor.hpp"
#include "tke/preprocess.hpp"
#include "tke/stats.hpp"
#include "tke/turbulence.hpp"

namespace tke {

class MlpModel;

// Segmentation as configured: inline bounds or a JSON file.
struct SegmentationSource {
  std::string file;  // as written in the config, empty when inline
  PhaseSegmentation bounds;
};

struct DatasetInput {
  std::string name;
  std::vector<std::string> files;                 // as written; several files are merged in order
  std::vector<std::filesystem::path> resolved;    // against the config directory
  std::optional<SegmentationSource> segmentation;  // overrides the global one
};

struct CvSettings {
  std::size_t folds = 5;
  double train_frac = 0.8;
};

// Hyperparameter name (spec JSON key) -> candidate values, per model kind.
using SweepGrid = std::map<std::string, std::vector<nlohmann::json>>;

struct PipelineConfig {
  std::vector<DatasetInput> datasets;
  std::optional<SegmentationSource> segmentation;  // absent: the whole record is used
  double clamp_lo_C = -50.0;
  double clamp_hi_C = 50.0;
  TurbulenceOptions turbulence;
  SplitRatios ratios;
  SplitMode split_mode = SplitMode::shuffle;
  std::uint64_t seed = 42;
  std::optional<std::uint64_t> split_seed;  // defaults to seed
  std::vector<RegressorSpec> models;        // seeds are re-derived per dataset
  CvSettings cv;
  std::map<ModelKind, SweepGrid> sweep;
  std::string output_dir = "results";
  std::filesystem::path base_dir;  // where relative paths resolve; not part of the hash

  std::uint64_t effective_split_seed() const { return split_seed.value_or(seed); }
  // Throws parameter error on bad ratios, windows or empty lists; io error on
  // missing input files.
  void validate() const;
  std::filesystem::path output_path() const;
};

PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
// Canonical form with every default filled in.
nlohmann::json to_json(const PipelineConfig& config);
// FNV-1a 64 over the canonical dump, as 16 hex digits.
std::string config_hash(const PipelineConfig& config);

// Switches every MLP spec to the softmax-on-last-hidden-layer variant.
void use_paper_activation(PipelineConfig& config);

// A failure tagged with the pipeline stage that raised it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, ErrorCode code, const std::string& message)
      : std::runtime_error("[" + stage + "] " + message), stage_(std::move(stage)), code_(code) {}
  const std::string& stage() const noexcept { return stage_; }
  ErrorCode code() const noexcept { return code_; }

 private:
  std::string stage_;
  ErrorCode code_;
};

struct SplitEvaluation {
  MetricsReport metrics;
  std::vector<double> time_s;
  std::vector<double> actual;
  std::vector<double> predicted;
  std::vector<double> residual;  // actual - predicted
  std::optional<KdeCurve> kde;   // absent when the residuals are degenerate
};

struct PairEvaluation {
  ModelKind model = ModelKind::knn;
  std::string dataset;
  RegressorSpec spec;
  std::map<Split, SplitEvaluation> splits;
};

struct EvaluationReport {
  std::vector<std::string> datasets;
  std::vector<ModelKind> models;
  std::vector<PairEvaluation> pairs;

  const PairEvaluation* find(ModelKind model, const std::string& dataset) const;
};

// Segmented, clamped and split data for one configured dataset.
struct PreparedDataset {
  std::string name;
  ClusterDataset data;
  TurbulenceSeries turbulence;
  FeatureTable table;
  ScalerState scaler;  // fitted on the training rows
  CorrelationMatrices correlations;
};

struct RunOptions {
  std::size_t threads = 1;
  // Per-epoch hook for MLP fits. Called from worker threads.
  std::function<void(const std::string& dataset, std::size_t epoch, const MlpModel&)> on_mlp_epoch;
  std::ostream* log = nullptr;  // mirror of the JSON-lines log
};

struct RunResult {
  EvaluationReport report;
  std::string config_hash;
  std::vector<std::filesystem::path> outputs;
};

// Seed for the model fitted on dataset `dataset_index`.
std::uint64_t pair_seed(std::uint64_t base, std::size_t dataset_index, ModelKind kind);

PreparedDataset prepare_dataset(const PipelineConfig& config, const DatasetInput& input);

// Ingest, segment, clamp, compute TKE, correlate, split, scale, train every
// (model, dataset) pair, evaluate and write outputs into config.output_path().
// On failure the files written so far move to <output>/quarantine and a
// StageError is thrown.
RunResult run(const PipelineConfig& config, const RunOptions& options = {});

struct SweepRow {
  ModelKind model = ModelKind::knn;
  std::string dataset;
  nlohmann::json params;  // full hyperparameter object for the kind
  double mean_r2 = 0.0;
  double mean_mse = 0.0;
  std::size_t folds = 0;
  std::size_t rank = 0;  // 1-based within (model, dataset)
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ranked, grouped by dataset then model
  RunResult best;              // run() outputs with each pair's winning config
};

// Cartesian product of the sweep lists per model, scored by shuffle-split CV
// on the train and test rows; ranked by mean R2, then lower MSE, then the
// config text. The winners are then trained and evaluated as in run().
SweepResult grid_sweep(const PipelineConfig& config, const RunOptions& options = {});

// Expands a grid into full parameter objects for the kind.
std::vector<nlohmann::json> expand_grid(const RegressorSpec& base, const SweepGrid& grid);

// Percent with one decimal, rounded half away from zero: 0.937 -> "93.7".
std::string format_percent(double r2);

// Test and validation blocks, one row per model and one column per dataset.
// Throws missing-cell error naming the first absent pair.
std::string report_table(const EvaluationReport& report);

void write_metrics_csv(std::ostream& out, const EvaluationReport& report);

}  // namespace tke
