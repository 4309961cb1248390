#include "ald/pruning.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace ald {

std::string_view to_string(PruneStrategy s) {
  switch (s) {
    case PruneStrategy::random:
      return "random";
    case PruneStrategy::lowest_kl:
      return "lowest_kl";
  }
  return "random";
}

PruneStrategy parse_prune_strategy(std::string_view name) {
  if (name == "random") return PruneStrategy::random;
  if (name == "lowest_kl") return PruneStrategy::lowest_kl;
  throw std::invalid_argument("unknown prune strategy: " + std::string(name));
}

std::vector<std::size_t> select_prune_indices(const VaeParams& params, std::size_t n, PruneStrategy strategy,
                                              std::span<const double> per_dim_kl, Rng& rng) {
  const std::size_t nz = params.latent_dim();
  if (nz < kLatentFloor || n > nz - kLatentFloor) throw std::invalid_argument("would violate latent floor");

  std::vector<std::size_t> order(nz);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (strategy == PruneStrategy::random) {
    // Partial Fisher-Yates: the first n slots are a uniform sample.
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(nz - i));
      std::swap(order[i], order[j]);
    }
  } else {
    if (per_dim_kl.size() != nz) throw std::invalid_argument("lowest_kl needs one KL value per latent dimension");
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return per_dim_kl[a] < per_dim_kl[b]; });
  }
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

namespace {

std::vector<bool> removal_mask(std::span<const std::size_t> indices, std::size_t nz) {
  std::vector<bool> drop(nz, false);
  for (std::size_t idx : indices) {
    if (idx >= nz) throw std::out_of_range("prune index out of range");
    if (drop[idx]) throw std::invalid_argument("duplicate prune index");
    drop[idx] = true;
  }
  return drop;
}

// Drops rows of weight and the matching bias entries.
void drop_rows(DenseLayer& layer, const std::vector<bool>& drop) {
  std::size_t kept = 0;
  for (bool d : drop) kept += d ? 0 : 1;
  Matrix w(kept, layer.weight.cols());
  std::vector<double> b;
  b.reserve(kept);
  std::size_t out = 0;
  for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
    if (drop[r]) continue;
    std::copy_n(layer.weight.row(r).begin(), layer.weight.cols(), w.row(out).begin());
    b.push_back(layer.bias[r]);
    ++out;
  }
  layer.weight = std::move(w);
  layer.bias = std::move(b);
}

// Drops input columns of weight; bias is per output and stays.
void drop_cols(DenseLayer& layer, const std::vector<bool>& drop) {
  std::size_t kept = 0;
  for (bool d : drop) kept += d ? 0 : 1;
  Matrix w(layer.weight.rows(), kept);
  for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
    std::size_t out = 0;
    for (std::size_t c = 0; c < layer.weight.cols(); ++c) {
      if (drop[c]) continue;
      w(r, out++) = layer.weight(r, c);
    }
  }
  layer.weight = std::move(w);
}

void slice_latent(VaeParams& p, const std::vector<bool>& drop) {
  drop_rows(p.mu_head, drop);
  drop_rows(p.logvar_head, drop);
  drop_cols(p.decoder_input, drop);
}

}  // namespace

PruneResult prune_latent(const VaeParams& params, std::span<const std::size_t> indices, std::size_t epoch,
                         PruneStrategy strategy) {
  const std::size_t nz = params.latent_dim();
  const auto drop = removal_mask(indices, nz);
  if (nz - indices.size() < kLatentFloor) throw std::invalid_argument("would violate latent floor");

  PruneResult result{params, {}};
  if (!indices.empty()) slice_latent(result.params, drop);
  ++result.params.version;

  result.event.epoch = epoch;
  result.event.removed_indices.assign(indices.begin(), indices.end());
  std::sort(result.event.removed_indices.begin(), result.event.removed_indices.end());
  result.event.old_nz = nz;
  result.event.new_nz = result.params.latent_dim();
  result.event.strategy = strategy;
  return result;
}

void prune_optimizer(OptimizerState& optimizer, std::span<const std::size_t> indices) {
  if (indices.empty()) return;
  const auto drop = removal_mask(indices, optimizer.first_moment.latent_dim());
  slice_latent(optimizer.first_moment, drop);
  slice_latent(optimizer.second_moment, drop);
}

}  // namespace ald
