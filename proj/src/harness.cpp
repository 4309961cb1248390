#include "ald/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace ald {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::ald:
      return "ald";
    case RunMode::fixed:
      return "fixed";
    case RunMode::grid:
      return "grid";
  }
  return "ald";
}

RunMode parse_run_mode(const std::string& name) {
  if (name == "ald") return RunMode::ald;
  if (name == "fixed") return RunMode::fixed;
  if (name == "grid") return RunMode::grid;
  throw std::invalid_argument("unknown mode: " + name);
}

void RunConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (hidden < 1) throw std::invalid_argument("hidden width must be at least 1");
  if (eval_n < 2) throw std::invalid_argument("eval_n must be at least 2");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (dataset.kind == "idx" && (dataset.images.empty() || dataset.labels.empty()))
    throw std::invalid_argument("idx dataset needs --images and --labels");
  if (dataset.kind != "idx" && dataset.kind != "blobs") throw std::invalid_argument("unknown dataset: " + dataset.kind);
  switch (mode) {
    case RunMode::ald:
      if (init_nz < kLatentFloor) throw std::invalid_argument("latent floor is 2");
      (void)make_schedule(init_nz, controller());
      break;
    case RunMode::fixed:
      if (fixed_dims.size() != 1) throw std::invalid_argument("fixed mode needs exactly one entry in fixed_dims");
      if (fixed_dims[0] < kLatentFloor) throw std::invalid_argument("latent floor is 2");
      break;
    case RunMode::grid:
      if (fixed_dims.size() < 3) throw std::invalid_argument("grid mode needs at least 3 dims");
      for (auto d : fixed_dims)
        if (d < kLatentFloor) throw std::invalid_argument("latent floor is 2");
      if (grid_seeds < 1) throw std::invalid_argument("grid needs at least one seed");
      break;
  }
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"mode", to_string(c.mode)},
           {"dataset",
            {{"kind", c.dataset.kind},
             {"images", c.dataset.images},
             {"labels", c.dataset.labels},
             {"val_images", c.dataset.val_images},
             {"val_labels", c.dataset.val_labels},
             {"blobs_per_class", c.dataset.blobs_per_class},
             {"blobs_classes", c.dataset.blobs_classes},
             {"blobs_dim", c.dataset.blobs_dim},
             {"blobs_spread", c.dataset.blobs_spread},
             {"blobs_seed", c.dataset.blobs_seed}}},
           {"init_dim", c.init_nz},
           {"fixed_dims", c.fixed_dims},
           {"hidden", c.hidden},
           {"patience", c.patience},
           {"decrease", c.decrease},
           {"window", c.window},
           {"slowdown_window", c.slowdown_window},
           {"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"lr", c.learning_rate},
           {"seed", c.seed},
           {"eval_seed", c.eval_seed},
           {"eval_n", c.eval_n},
           {"extractor", c.extractor},
           {"prune_strategy", std::string(to_string(c.prune_strategy))},
           {"grid_seeds", c.grid_seeds},
           {"out", c.out_dir}};
}

void merge_json(RunConfig& c, const json& j) {
  auto take = [&](const json& obj, const char* key, auto& field) {
    if (obj.contains(key)) obj.at(key).get_to(field);
  };
  if (j.contains("mode")) c.mode = parse_run_mode(j.at("mode").get<std::string>());
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    if (d.is_string()) {
      c.dataset.kind = d.get<std::string>();
    } else {
      take(d, "kind", c.dataset.kind);
      take(d, "images", c.dataset.images);
      take(d, "labels", c.dataset.labels);
      take(d, "val_images", c.dataset.val_images);
      take(d, "val_labels", c.dataset.val_labels);
      take(d, "blobs_per_class", c.dataset.blobs_per_class);
      take(d, "blobs_classes", c.dataset.blobs_classes);
      take(d, "blobs_dim", c.dataset.blobs_dim);
      take(d, "blobs_spread", c.dataset.blobs_spread);
      take(d, "blobs_seed", c.dataset.blobs_seed);
    }
  }
  take(j, "images", c.dataset.images);
  take(j, "labels", c.dataset.labels);
  take(j, "init_dim", c.init_nz);
  take(j, "fixed_dims", c.fixed_dims);
  take(j, "hidden", c.hidden);
  take(j, "patience", c.patience);
  take(j, "decrease", c.decrease);
  take(j, "window", c.window);
  take(j, "slowdown_window", c.slowdown_window);
  take(j, "epochs", c.epochs);
  take(j, "batch_size", c.batch_size);
  take(j, "lr", c.learning_rate);
  take(j, "seed", c.seed);
  take(j, "eval_seed", c.eval_seed);
  take(j, "eval_n", c.eval_n);
  take(j, "extractor", c.extractor);
  take(j, "grid_seeds", c.grid_seeds);
  take(j, "out", c.out_dir);
  if (j.contains("prune_strategy")) c.prune_strategy = parse_prune_strategy(j.at("prune_strategy").get<std::string>());
}

DatasetSplit load_dataset(const DatasetSpec& spec) {
  if (spec.kind == "blobs")
    return make_blobs(spec.blobs_per_class, spec.blobs_classes, spec.blobs_dim, spec.blobs_spread, spec.blobs_seed);
  if (spec.kind != "idx") throw std::invalid_argument("unknown dataset: " + spec.kind);

  LabeledImages train = load_idx(spec.images, spec.labels);
  int max_label = 1;
  for (int l : train.labels) max_label = std::max(max_label, l);
  const auto k = static_cast<std::size_t>(max_label) + 1;
  if (spec.val_images.empty()) return split_stratified(train, k, 0.8);

  LabeledImages val = load_idx(spec.val_images, spec.val_labels);
  if (val.images.cols() != train.images.cols()) throw std::runtime_error("validation images differ in size");
  DatasetSplit split;
  split.k_classes = k;
  split.d = train.images.cols();
  split.train_x = std::move(train.images);
  split.train_labels = std::move(train.labels);
  split.val_x = std::move(val.images);
  split.val_labels = std::move(val.labels);
  return split;
}

// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool record_finite(const MetricRecord& r) {
  return std::isfinite(r.silhouette) && std::isfinite(r.fid_recon) && std::isfinite(r.fid_gen) &&
         std::isfinite(r.recon_loss) && std::isfinite(r.kl);
}

RunLog train(const RunConfig& config, const DatasetSplit& data, std::size_t start_nz, bool adaptive) {
  const auto run_start = Clock::now();
  RunLog log;
  log.config = config;

  const Rng root(config.seed);
  Rng init_rng = root.derive(0);
  Rng train_rng = root.derive(1);
  Rng prune_rng = root.derive(2);
  const Rng eval_rng(config.eval_seed);

  VaeParams params = init_model(data.d, config.hidden, start_nz, init_rng);
  OptimizerState optimizer = make_optimizer(params, {config.learning_rate});
  const FeatureExtractor extractor = FeatureExtractor::parse(config.extractor, data.d, config.eval_seed);
  std::optional<ScheduleState> schedule;
  if (adaptive) schedule = make_schedule(start_nz, config.controller());

  if (config.eval_n > data.val_x.rows())
    std::cerr << "warning: eval_n " << config.eval_n << " exceeds validation size; using " << data.val_x.rows()
              << "\n";

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto train_start = Clock::now();
    double epoch_loss = 0.0;
    const auto order = batch_indices(data.train_x.rows(), config.batch_size, train_rng);
    for (std::size_t b = 0; b < order.size(); ++b) {
      const Matrix xb = gather_rows(data.train_x, order[b]);
      const ElboResult res = elbo_loss(params, xb, train_rng);
      if (!std::isfinite(res.loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << b << " (recon " << res.recon_nll << ", kl "
            << res.kl << ", latent dim " << params.latent_dim() << ")";
        throw std::runtime_error(msg.str());
      }
      epoch_loss += res.loss * static_cast<double>(xb.rows());
      backward_and_step(params, res.cache, optimizer);
    }
    log.summary.train_seconds += seconds_since(train_start);

    const auto eval_start = Clock::now();
    std::vector<double> dim_kl;
    MetricRecord record =
        evaluate_epoch(params, data, data.k_classes, config.eval_n, eval_rng, extractor, &dim_kl);
    record.epoch = epoch;
    record.latent_dim = params.latent_dim();
    if (!record_finite(record)) throw std::runtime_error("non-finite metrics at epoch " + std::to_string(epoch));
    log.records.push_back(record);
    log.summary.eval_seconds += seconds_since(eval_start);

    if (config.verbose) {
      std::fprintf(stderr, "epoch %zu dim %zu loss %.4f sil %.4f fid_r %.4f fid_g %.4f recon %.4f\n", epoch,
                   record.latent_dim, epoch_loss / static_cast<double>(data.train_x.rows()), record.silhouette,
                   record.fid_recon, record.fid_gen, record.recon_loss);
    }

    if (!schedule) continue;
    record_epoch(*schedule, record);
    schedule->last_slopes.reset();
    const Action action = decide(*schedule, epoch);
    if (is_decision_epoch(schedule->config, epoch) || action.kind != Action::Kind::Continue)
      log.actions.push_back({epoch, action, schedule->last_slopes, schedule->n_z, schedule->latent_decrease});
    if (action.kind == Action::Kind::Prune) {
      const auto indices = select_prune_indices(params, action.count, config.prune_strategy, dim_kl, prune_rng);
      PruneResult pruned = prune_latent(params, indices, epoch, config.prune_strategy);
      prune_optimizer(optimizer, indices);
      params = std::move(pruned.params);
      log.prune_events.push_back(pruned.event);
      schedule->prune_log.push_back(std::move(pruned.event));
    }
  }

  log.summary.final_nz = params.latent_dim();
  if (schedule) log.summary.stopping_epoch = schedule->stopping_epoch;
  if (!log.records.empty()) log.summary.final_metrics = log.records.back();
  log.final_params = std::move(params);
  log.summary.total_seconds = seconds_since(run_start);
  if (!config.out_dir.empty()) write_run(log, config.out_dir);
  return log;
}

}  // namespace

RunLog run_ald(const RunConfig& config) {
  config.validate();
  if (config.mode != RunMode::ald) throw std::invalid_argument("run_ald requires mode=ald");
  return run_ald(config, load_dataset(config.dataset));
}

RunLog run_ald(const RunConfig& config, const DatasetSplit& data) {
  if (config.mode != RunMode::ald) throw std::invalid_argument("run_ald requires mode=ald");
  config.validate();
  return train(config, data, config.init_nz, true);
}

RunLog run_fixed(const RunConfig& config) {
  config.validate();
  if (config.mode != RunMode::fixed) throw std::invalid_argument("run_fixed requires mode=fixed");
  return run_fixed(config, load_dataset(config.dataset));
}

RunLog run_fixed(const RunConfig& config, const DatasetSplit& data) {
  if (config.mode != RunMode::fixed) throw std::invalid_argument("run_fixed requires mode=fixed");
  config.validate();
  return train(config, data, config.fixed_dims.front(), false);
}

GridTable run_grid(const RunConfig& config) {
  config.validate();
  if (config.mode != RunMode::grid) throw std::invalid_argument("run_grid requires mode=grid");
  return run_grid(config, load_dataset(config.dataset));
}

GridTable run_grid(const RunConfig& config, const DatasetSplit& data) {
  if (config.mode != RunMode::grid) throw std::invalid_argument("run_grid requires mode=grid");
  config.validate();
  const auto start = Clock::now();
  GridTable table;
  for (std::size_t s = 0; s < config.grid_seeds; ++s) {
    for (std::size_t dim : config.fixed_dims) {
      RunConfig run = config;
      run.mode = RunMode::fixed;
      run.fixed_dims = {dim};
      run.seed = config.seed + s;
      if (!config.out_dir.empty())
        run.out_dir = (fs::path(config.out_dir) / ("dim_" + std::to_string(dim) + "_seed_" + std::to_string(run.seed)))
                          .string();
      const RunLog log = run_fixed(run, data);
      table.rows.push_back({dim, run.seed, log.summary.final_metrics, log.summary.total_seconds});
    }
  }
  for (std::size_t dim : config.fixed_dims) {
    GridMean m;
    m.dim = dim;
    double count = 0.0;
    for (const auto& row : table.rows) {
      if (row.dim != dim) continue;
      m.silhouette += row.final_metrics.silhouette;
      m.fid_recon += row.final_metrics.fid_recon;
      m.fid_gen += row.final_metrics.fid_gen;
      m.recon_loss += row.final_metrics.recon_loss;
      m.seconds += row.seconds;
      count += 1.0;
    }
    m.silhouette /= count;
    m.fid_recon /= count;
    m.fid_gen /= count;
    m.recon_loss /= count;
    m.seconds /= count;
    table.means.push_back(m);
  }
  table.total_seconds = seconds_since(start);
  if (!config.out_dir.empty()) write_grid(table, config.out_dir);
  return table;
}

// ---------------------------------------------------------------------------

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

json metrics_json(const MetricRecord& r) {
  return {{"epoch", r.epoch},           {"latent_dim", r.latent_dim}, {"silhouette", r.silhouette},
          {"fid_recon", r.fid_recon},   {"fid_gen", r.fid_gen},       {"recon_loss", r.recon_loss},
          {"kl", r.kl},                 {"elbo", r.elbo}};
}

std::string join_indices(const std::vector<std::size_t>& idx) {
  std::string out;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i > 0) out += ' ';
    out += std::to_string(idx[i]);
  }
  return out;
}

}  // namespace

std::string metrics_csv(const RunLog& log) {
  std::string out = "epoch,latent_dim,silhouette,fid_recon,fid_gen,recon_loss,kl,elbo\n";
  for (const auto& r : log.records) {
    out += std::to_string(r.epoch) + ',' + std::to_string(r.latent_dim) + ',' + num(r.silhouette) + ',' +
           num(r.fid_recon) + ',' + num(r.fid_gen) + ',' + num(r.recon_loss) + ',' + num(r.kl) + ',' + num(r.elbo) +
           '\n';
  }
  return out;
}

std::string prune_events_csv(const std::vector<PruneEvent>& events) {
  std::string out = "epoch,old_nz,new_nz,removed_indices,strategy\n";
  for (const auto& e : events) {
    out += std::to_string(e.epoch) + ',' + std::to_string(e.old_nz) + ',' + std::to_string(e.new_nz) + ',' +
           join_indices(e.removed_indices) + ',' + std::string(to_string(e.strategy)) + '\n';
  }
  return out;
}

std::string grid_rows_csv(const GridTable& table) {
  std::string out = "dim,seed,silhouette,fid_recon,fid_gen,recon_loss,kl,elbo\n";
  for (const auto& row : table.rows) {
    const auto& r = row.final_metrics;
    out += std::to_string(row.dim) + ',' + std::to_string(row.seed) + ',' + num(r.silhouette) + ',' +
           num(r.fid_recon) + ',' + num(r.fid_gen) + ',' + num(r.recon_loss) + ',' + num(r.kl) + ',' + num(r.elbo) +
           '\n';
  }
  return out;
}

std::string grid_means_csv(const GridTable& table) {
  std::string out = "dim,silhouette,fid_recon,fid_gen,recon_loss\n";
  for (const auto& m : table.means) {
    out += std::to_string(m.dim) + ',' + num(m.silhouette) + ',' + num(m.fid_recon) + ',' + num(m.fid_gen) + ',' +
           num(m.recon_loss) + '\n';
  }
  return out;
}

json summary_json(const RunLog& log) {
  json j;
  j["mode"] = to_string(log.config.mode);
  j["final_nz"] = log.summary.final_nz;
  j["stopping_epoch"] = log.summary.stopping_epoch ? json(*log.summary.stopping_epoch) : json(nullptr);
  j["epochs"] = log.records.size();
  j["prune_events"] = log.prune_events.size();
  j["final_metrics"] = metrics_json(log.summary.final_metrics);
  j["timings"] = {{"train_seconds", log.summary.train_seconds},
                  {"eval_seconds", log.summary.eval_seconds},
                  {"total_seconds", log.summary.total_seconds}};
  j["config"] = log.config;
  return j;
}

void write_run(const RunLog& log, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);
  write_text(root / "metrics.csv", metrics_csv(log));

  std::string actions;
  for (const auto& a : log.actions) {
    json j{{"epoch", a.epoch}, {"action", to_string(a.action)}, {"latent_dim", a.n_z},
           {"latent_decrease", a.latent_decrease}};
    if (a.slopes)
      j["slopes"] = {{"recon", a.slopes->recon},
                     {"silhouette", a.slopes->silhouette},
                     {"fid_recon", a.slopes->fid_recon},
                     {"fid_gen", a.slopes->fid_gen}};
    actions += j.dump() + '\n';
  }
  write_text(root / "actions.jsonl", actions);

  std::string events;
  for (const auto& e : log.prune_events)
    events += json{{"epoch", e.epoch},
                   {"removed_indices", e.removed_indices},
                   {"old_nz", e.old_nz},
                   {"new_nz", e.new_nz},
                   {"strategy", std::string(to_string(e.strategy))}}
                  .dump() +
              '\n';
  write_text(root / "events.jsonl", events);

  write_text(root / "config.json", json(log.config).dump(2) + '\n');
  write_text(root / "summary.json", summary_json(log).dump(2) + '\n');
  save_checkpoint((root / "checkpoint.bin").string(), log.final_params,
                  log.records.empty() ? 0 : log.records.back().epoch, log.config.seed);
  emit_plot_data(log, (root / "plot").string());
}

void write_grid(const GridTable& table, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);
  write_text(root / "grid_runs.csv", grid_rows_csv(table));
  write_text(root / "grid_means.csv", grid_means_csv(table));
}

std::vector<std::string> emit_plot_data(const RunLog& log, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);
  struct Series {
    const char* name;
    double MetricRecord::*field;
  };
  const Series series[] = {{"silhouette", &MetricRecord::silhouette},
                           {"fid_recon", &MetricRecord::fid_recon},
                           {"fid_gen", &MetricRecord::fid_gen},
                           {"recon_loss", &MetricRecord::recon_loss}};
  std::vector<std::string> written;
  for (const auto& s : series) {
    std::string text = "epoch,latent_dim,value\n";
    for (const auto& r : log.records)
      text += std::to_string(r.epoch) + ',' + std::to_string(r.latent_dim) + ',' + num(r.*(s.field)) + '\n';
    const fs::path path = root / (std::string(s.name) + ".csv");
    write_text(path, text);
    written.push_back(path.string());
  }
  const fs::path events = root / "prune_events.csv";
  write_text(events, prune_events_csv(log.prune_events));
  written.push_back(events.string());
  return written;
}

}  // namespace ald
