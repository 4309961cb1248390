#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ald/model.hpp"

namespace ald {

inline constexpr std::size_t kLatentFloor = 2;

enum class PruneStrategy { random, lowest_kl };

std::string_view to_string(PruneStrategy s);
PruneStrategy parse_prune_strategy(std::string_view name);

struct PruneEvent {
  std::size_t epoch = 0;
  std::vector<std::size_t> removed_indices;  // sorted, in pre-prune coordinates
  std::size_t old_nz = 0;
  std::size_t new_nz = 0;
  PruneStrategy strategy = PruneStrategy::random;

  friend bool operator==(const PruneEvent&, const PruneEvent&) = default;
};

// Chooses n latent coordinates to drop. `random` samples uniformly without
// replacement; `lowest_kl` takes the n smallest entries of per_dim_kl, lower
// index first on ties. Returned indices are sorted.
std::vector<std::size_t> select_prune_indices(const VaeParams& params, std::size_t n, PruneStrategy strategy,
                                              std::span<const double> per_dim_kl, Rng& rng);

struct PruneResult {
  VaeParams params;
  PruneEvent event;
};

// Deletes the given rows of mu_head and logvar_head and the same columns of
// decoder_input, copying every surviving weight unchanged.
PruneResult prune_latent(const VaeParams& params, std::span<const std::size_t> indices, std::size_t epoch = 0,
                         PruneStrategy strategy = PruneStrategy::random);

// Slices the Adam moments exactly like prune_latent slices the parameters.
void prune_optimizer(OptimizerState& optimizer, std::span<const std::size_t> indices);

}  // namespace ald
