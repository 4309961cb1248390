#include "ald/controller.hpp"

#include <algorithm>
#include <stdexcept>

namespace ald {

std::string to_string(const Action& action) {
  switch (action.kind) {
    case Action::Kind::Continue:
      return "continue";
    case Action::Kind::Prune:
      return "prune(" + std::to_string(action.count) + ")";
    case Action::Kind::Freeze:
      return "freeze";
  }
  return "continue";
}

ScheduleState make_schedule(std::size_t init_nz, const ControllerConfig& config) {
  if (init_nz < kLatentFloor) throw std::invalid_argument("latent floor is 2");
  if (config.patience == 0) throw std::invalid_argument("patience must be at least 1");
  if (config.initial_decrease == 0) throw std::invalid_argument("latent decrease must be at least 1");
  if (config.window < 2 || config.slowdown_window < 2) throw std::invalid_argument("slope windows need at least 2 points");
  ScheduleState s;
  s.config = config;
  s.n_z = init_nz;
  s.latent_decrease = config.initial_decrease;
  return s;
}

void record_epoch(ScheduleState& state, const MetricRecord& record) {
  if (!state.epochs.empty() && record.epoch <= state.epochs.back())
    throw std::invalid_argument("record_epoch: epochs must strictly increase");
  state.epochs.push_back(record.epoch);
  state.silhouette.push_back(record.silhouette);
  state.recon_loss.push_back(record.recon_loss);
  state.fid_recon.push_back(record.fid_recon);
  state.fid_gen.push_back(record.fid_gen);
}

namespace {

double tail_slope(const std::vector<double>& history, std::size_t window) {
  return least_squares_slope(std::span(history).last(window));
}

}  // namespace

std::optional<SlopeReport> compute_slopes(const ScheduleState& state, std::size_t window) {
  if (window < 2 || state.epochs.size() < window) return std::nullopt;
  return SlopeReport{tail_slope(state.recon_loss, window), tail_slope(state.silhouette, window),
                     tail_slope(state.fid_recon, window), tail_slope(state.fid_gen, window)};
}

std::optional<SlopeReport> compute_slopes(const ScheduleState& state) {
  return compute_slopes(state, state.config.window);
}

bool is_decision_epoch(const ControllerConfig& config, std::size_t epoch) {
  return epoch > 0 && epoch % config.patience == 0;
}

Action decide(ScheduleState& state, std::size_t epoch) {
  if (state.epochs.empty() || state.epochs.back() != epoch)
    throw std::logic_error("decide: record_epoch must be called for this epoch first");
  if (!state.compressing || !is_decision_epoch(state.config, epoch)) return Action::keep_going();

  state.last_slopes = compute_slopes(state);
  if (state.last_slopes && state.last_slopes->all_positive()) {
    state.compressing = false;
    state.stopping_epoch = epoch;
    return Action::freeze();
  }

  if (state.latent_decrease > 1 && state.epochs.size() >= state.config.slowdown_window &&
      tail_slope(state.silhouette, state.config.slowdown_window) > 0.0) {
    state.latent_decrease = 1;
  }

  const std::size_t n = std::min(state.latent_decrease, state.n_z - kLatentFloor);
  if (n == 0) return Action::keep_going();
  state.n_z -= n;
  return Action::prune(n);
}

ReplayResult replay(std::span<const MetricRecord> stream, std::size_t init_nz, const ControllerConfig& config) {
  ScheduleState state = make_schedule(init_nz, config);
  ReplayResult result;
  for (const MetricRecord& record : stream) {
    record_epoch(state, record);
    DecisionTrace t;
    t.epoch = record.epoch;
    state.last_slopes.reset();
    t.action = decide(state, record.epoch);
    t.slopes = state.last_slopes;
    t.n_z = state.n_z;
    t.latent_decrease = state.latent_decrease;
    result.trace.push_back(t);
  }
  result.stopping_epoch = state.stopping_epoch;
  result.final_nz = state.n_z;
  return result;
}

}  // namespace ald
