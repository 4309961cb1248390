#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ald/controller.hpp"
#include "ald/data.hpp"
#include "ald/metrics.hpp"
#include "ald/model.hpp"
#include "ald/pruning.hpp"

namespace ald {

enum class RunMode { ald, fixed, grid };

std::string to_string(RunMode mode);
RunMode parse_run_mode(const std::string& name);

// Either an IDX pair (kind "idx") or the synthetic blobs (kind "blobs").
struct DatasetSpec {
  std::string kind = "blobs";
  std::string images;
  std::string labels;
  std::string val_images;  // optional; otherwise the training pair is split 80/20
  std::string val_labels;
  std::size_t blobs_per_class = 250;
  std::size_t blobs_classes = 4;
  std::size_t blobs_dim = 64;
  double blobs_spread = 0.1;
  std::uint64_t blobs_seed = 7;
};

struct RunConfig {
  RunMode mode = RunMode::ald;
  DatasetSpec dataset;
  std::size_t init_nz = 64;
  std::vector<std::size_t> fixed_dims;
  std::size_t hidden = 400;
  std::size_t patience = 5;
  std::size_t decrease = 5;
  std::size_t window = 20;
  std::size_t slowdown_window = 10;
  std::size_t epochs = 200;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::uint64_t eval_seed = 1;
  std::size_t eval_n = 500;
  std::string extractor = "projection:32";
  std::string out_dir;  // nothing is written when empty
  PruneStrategy prune_strategy = PruneStrategy::random;
  std::size_t grid_seeds = 1;  // grid mode: seeds seed, seed+1, ...
  bool verbose = false;

  ControllerConfig controller() const { return {patience, decrease, window, slowdown_window}; }
  // Throws std::invalid_argument when mode-specific fields are missing or inconsistent.
  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
// Fields absent from j keep the values already in c.
void merge_json(RunConfig& c, const nlohmann::json& j);

DatasetSplit load_dataset(const DatasetSpec& spec);

struct ActionRecord {
  std::size_t epoch = 0;
  Action action;
  std::optional<SlopeReport> slopes;
  std::size_t n_z = 0;  // after the action
  std::size_t latent_decrease = 0;
};

struct RunSummary {
  std::size_t final_nz = 0;
  std::optional<std::size_t> stopping_epoch;
  MetricRecord final_metrics;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
  double total_seconds = 0.0;
};

struct RunLog {
  RunConfig config;
  std::vector<MetricRecord> records;  // one per epoch
  std::vector<ActionRecord> actions;  // decision epochs only
  std::vector<PruneEvent> prune_events;
  RunSummary summary;
  VaeParams final_params;
};

RunLog run_ald(const RunConfig& config);
RunLog run_ald(const RunConfig& config, const DatasetSplit& data);
RunLog run_fixed(const RunConfig& config);
RunLog run_fixed(const RunConfig& config, const DatasetSplit& data);

struct GridRow {
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  MetricRecord final_metrics;
  double seconds = 0.0;
};

struct GridMean {
  std::size_t dim = 0;
  double silhouette = 0.0;
  double fid_recon = 0.0;
  double fid_gen = 0.0;
  double recon_loss = 0.0;
  double seconds = 0.0;
};

struct GridTable {
  std::vector<GridRow> rows;    // seed-major, dims in config order
  std::vector<GridMean> means;  // one per dim
  double total_seconds = 0.0;
};

GridTable run_grid(const RunConfig& config);
GridTable run_grid(const RunConfig& config, const DatasetSplit& data);

// Text writers; every number is printed with 17 significant digits so equal
// logs give equal bytes.
std::string metrics_csv(const RunLog& log);
std::string prune_events_csv(const std::vector<PruneEvent>& events);
std::string grid_rows_csv(const GridTable& table);
std::string grid_means_csv(const GridTable& table);
nlohmann::json summary_json(const RunLog& log);

// Writes metrics.csv, actions.jsonl, summary.json, checkpoint.bin and the plot data.
void write_run(const RunLog& log, const std::string& dir);
void write_grid(const GridTable& table, const std::string& dir);

// Per-metric series (epoch,latent_dim,value) plus prune_events.csv under dir.
std::vector<std::string> emit_plot_data(const RunLog& log, const std::string& dir);

}  // namespace ald
