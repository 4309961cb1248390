#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ald/metrics.hpp"
#include "ald/pruning.hpp"

namespace ald {

struct ControllerConfig {
  std::size_t patience = 5;          // epochs between decisions
  std::size_t initial_decrease = 5;  // neurons removed per decision before the slow-down
  std::size_t window = 20;           // slope window for the stopping rule
  std::size_t slowdown_window = 10;  // silhouette slope window for the 5 -> 1 switch
};

// Least-squares slopes over the trailing window of each history.
struct SlopeReport {
  double recon = 0.0;       // e1
  double silhouette = 0.0;  // e2
  double fid_recon = 0.0;   // e3
  double fid_gen = 0.0;     // e4

  bool all_positive() const { return recon > 0.0 && silhouette > 0.0 && fid_recon > 0.0 && fid_gen > 0.0; }
};

struct Action {
  enum class Kind { Continue, Prune, Freeze };
  Kind kind = Kind::Continue;
  std::size_t count = 0;  // neurons to remove, Prune only

  static Action keep_going() { return {}; }
  static Action prune(std::size_t n) { return {Kind::Prune, n}; }
  static Action freeze() { return {Kind::Freeze, 0}; }

  friend bool operator==(const Action&, const Action&) = default;
};

std::string to_string(const Action& action);

struct ScheduleState {
  ControllerConfig config;
  std::size_t n_z = 0;
  std::size_t latent_decrease = 0;
  bool compressing = true;
  std::optional<std::size_t> stopping_epoch;

  std::vector<std::size_t> epochs;
  std::vector<double> silhouette;
  std::vector<double> recon_loss;
  std::vector<double> fid_recon;
  std::vector<double> fid_gen;

  std::optional<SlopeReport> last_slopes;  // from the latest decision epoch
  std::vector<PruneEvent> prune_log;
};

ScheduleState make_schedule(std::size_t init_nz, const ControllerConfig& config = {});

// Appends one epoch of metrics. Epochs must strictly increase.
void record_epoch(ScheduleState& state, const MetricRecord& record);

// Slopes over the last `window` values; nullopt until that much history exists.
std::optional<SlopeReport> compute_slopes(const ScheduleState& state, std::size_t window);
std::optional<SlopeReport> compute_slopes(const ScheduleState& state);

bool is_decision_epoch(const ControllerConfig& config, std::size_t epoch);

// Runs the decision rule for an epoch whose metrics were just recorded.
// Updates n_z, latent_decrease and compressing to reflect the returned action.
Action decide(ScheduleState& state, std::size_t epoch);

struct DecisionTrace {
  std::size_t epoch = 0;
  Action action;
  std::optional<SlopeReport> slopes;
  std::size_t n_z = 0;  // after the action
  std::size_t latent_decrease = 0;
};

struct ReplayResult {
  std::optional<std::size_t> stopping_epoch;
  std::size_t final_nz = 0;
  std::vector<DecisionTrace> trace;  // one entry per record
};

// Drives the controller over a recorded metric stream without training.
ReplayResult replay(std::span<const MetricRecord> stream, std::size_t init_nz, const ControllerConfig& config = {});

}  // namespace ald
