// Command-line runner for adaptive latent-dimension training, fixed-size
// baselines and grid searches.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ald/harness.hpp"

namespace {

// "blobs", "idx", or "blobs:k=4,d=64,n=250,spread=0.1,seed=7".
void apply_dataset_spec(ald::DatasetSpec& spec, const std::string& text) {
  const auto colon = text.find(':');
  spec.kind = text.substr(0, colon);
  if (colon == std::string::npos) return;
  std::string rest = text.substr(colon + 1);
  std::size_t pos = 0;
  while (pos < rest.size()) {
    const auto comma = rest.find(',', pos);
    const std::string item = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("bad dataset option: " + item);
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (key == "k") spec.blobs_classes = std::stoul(value);
    else if (key == "d") spec.blobs_dim = std::stoul(value);
    else if (key == "n") spec.blobs_per_class = std::stoul(value);
    else if (key == "spread") spec.blobs_spread = std::stod(value);
    else if (key == "seed") spec.blobs_seed = std::stoull(value);
    else throw std::invalid_argument("unknown dataset option: " + key);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive latent-dimension VAE training"};

  std::string config_path, mode, dataset, images, labels, val_images, val_labels, extractor, strategy, out;
  std::vector<std::size_t> fixed_dims;
  std::size_t init_dim = 0, patience = 0, decrease = 0, window = 0, slowdown = 0, epochs = 0, batch = 0, eval_n = 0,
              hidden = 0, grid_seeds = 0;
  double lr = 0.0;
  std::uint64_t seed = 0, eval_seed = 0;
  bool verbose = false;

  app.add_option("--config", config_path, "JSON config file; flags override its values");
  app.add_option("--mode", mode, "ald | fixed | grid");
  app.add_option("--dataset", dataset, "blobs[:k=,d=,n=,spread=,seed=] | idx");
  app.add_option("--images", images, "IDX image file");
  app.add_option("--labels", labels, "IDX label file");
  app.add_option("--val-images", val_images, "IDX validation images (default: 80/20 split)");
  app.add_option("--val-labels", val_labels, "IDX validation labels");
  app.add_option("--init-dim", init_dim, "initial latent size (ald)");
  app.add_option("--fixed-dims", fixed_dims, "latent sizes (fixed: one, grid: three or more)")->delimiter(',');
  app.add_option("--patience", patience, "epochs between decisions");
  app.add_option("--decrease", decrease, "neurons pruned per decision before the slow-down");
  app.add_option("--window", window, "slope window of the stopping rule");
  app.add_option("--slowdown-window", slowdown, "silhouette slope window of the slow-down");
  app.add_option("--epochs", epochs, "training epochs");
  app.add_option("--batch-size", batch, "minibatch size");
  app.add_option("--lr", lr, "Adam learning rate");
  app.add_option("--seed", seed, "training seed");
  app.add_option("--eval-seed", eval_seed, "evaluation seed");
  app.add_option("--eval-n", eval_n, "validation samples per evaluation");
  app.add_option("--extractor", extractor, "identity | projection:<dim>[:<seed>]");
  app.add_option("--prune-strategy", strategy, "random | lowest_kl");
  app.add_option("--out", out, "output directory");
  app.add_option("--hidden", hidden, "hidden layer width");
  app.add_option("--grid-seeds", grid_seeds, "number of seeds per grid dim");
  app.add_flag("-v,--verbose", verbose, "print per-epoch progress");

  CLI11_PARSE(app, argc, argv);

  try {
    ald::RunConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::runtime_error("cannot open config " + config_path);
      ald::merge_json(cfg, nlohmann::json::parse(in));
    }
    auto given = [&](const char* flag) { return app.count(flag) > 0; };
    if (given("--mode")) cfg.mode = ald::parse_run_mode(mode);
    if (given("--dataset")) apply_dataset_spec(cfg.dataset, dataset);
    if (given("--images")) {
      cfg.dataset.images = images;
      if (!given("--dataset")) cfg.dataset.kind = "idx";
    }
    if (given("--labels")) cfg.dataset.labels = labels;
    if (given("--val-images")) cfg.dataset.val_images = val_images;
    if (given("--val-labels")) cfg.dataset.val_labels = val_labels;
    if (given("--init-dim")) cfg.init_nz = init_dim;
    if (given("--fixed-dims")) cfg.fixed_dims = fixed_dims;
    if (given("--patience")) cfg.patience = patience;
    if (given("--decrease")) cfg.decrease = decrease;
    if (given("--window")) cfg.window = window;
    if (given("--slowdown-window")) cfg.slowdown_window = slowdown;
    if (given("--epochs")) cfg.epochs = epochs;
    if (given("--batch-size")) cfg.batch_size = batch;
    if (given("--lr")) cfg.learning_rate = lr;
    if (given("--seed")) cfg.seed = seed;
    if (given("--eval-seed")) cfg.eval_seed = eval_seed;
    if (given("--eval-n")) cfg.eval_n = eval_n;
    if (given("--extractor")) cfg.extractor = extractor;
    if (given("--prune-strategy")) cfg.prune_strategy = ald::parse_prune_strategy(strategy);
    if (given("--out")) cfg.out_dir = out;
    if (given("--hidden")) cfg.hidden = hidden;
    if (given("--grid-seeds")) cfg.grid_seeds = grid_seeds;
    cfg.verbose = verbose;
    cfg.validate();

    switch (cfg.mode) {
      case ald::RunMode::ald:
      case ald::RunMode::fixed: {
        const ald::RunLog log = cfg.mode == ald::RunMode::ald ? ald::run_ald(cfg) : ald::run_fixed(cfg);
        std::cout << ald::summary_json(log).dump(2) << "\n";
        break;
      }
      case ald::RunMode::grid: {
        const ald::GridTable table = ald::run_grid(cfg);
        std::cout << ald::grid_means_csv(table);
        break;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
