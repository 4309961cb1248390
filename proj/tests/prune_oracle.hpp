#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "ald/model.hpp"

namespace testutil {

// z' (pruned width) padded with zeros at the removed coordinates.
inline ald::Matrix zero_pad(const ald::Matrix& z_pruned, std::span<const std::size_t> removed, std::size_t old_nz) {
  ald::Matrix z(z_pruned.rows(), old_nz);
  for (std::size_t r = 0; r < z_pruned.rows(); ++r) {
    std::size_t src = 0;
    for (std::size_t c = 0; c < old_nz; ++c) {
      if (std::find(removed.begin(), removed.end(), c) != removed.end()) continue;
      z(r, c) = z_pruned(r, src++);
    }
  }
  return z;
}

inline ald::Matrix drop_columns(const ald::Matrix& m, std::span<const std::size_t> removed) {
  ald::Matrix out(m.rows(), m.cols() - removed.size());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::size_t dst = 0;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (std::find(removed.begin(), removed.end(), c) != removed.end()) continue;
      out(r, dst++) = m(r, c);
    }
  }
  return out;
}

// decode(pruned, z') == decode(original, zero_pad(z')) bit for bit.
inline bool zero_fill_equivalent(const ald::VaeParams& original, const ald::VaeParams& pruned,
                                 std::span<const std::size_t> removed, ald::Rng& rng, std::size_t rows = 8) {
  ald::Matrix z(rows, pruned.latent_dim());
  for (auto& v : z.values()) v = 2.0 * rng.normal();
  return ald::decode(pruned, z) == ald::decode(original, zero_pad(z, removed, original.latent_dim()));
}

// encode(pruned).mu/logvar == encode(original) with removed columns deleted.
inline bool encoder_equivalent(const ald::VaeParams& original, const ald::VaeParams& pruned,
                               std::span<const std::size_t> removed, ald::Rng& rng, std::size_t rows = 8) {
  ald::Matrix x(rows, original.data_dim());
  for (auto& v : x.values()) v = rng.uniform();
  const auto a = ald::encode(pruned, x);
  const auto b = ald::encode(original, x);
  return a.mu == drop_columns(b.mu, removed) && a.logvar == drop_columns(b.logvar, removed);
}

// Maps indices of a second prune (in post-first-prune coordinates) back to the
// original coordinates and merges them with the first set.
inline std::vector<std::size_t> compose_indices(std::span<const std::size_t> first, std::span<const std::size_t> second,
                                                std::size_t original_nz) {
  std::vector<std::size_t> survivors;
  for (std::size_t c = 0; c < original_nz; ++c)
    if (std::find(first.begin(), first.end(), c) == first.end()) survivors.push_back(c);
  std::vector<std::size_t> out(first.begin(), first.end());
  for (auto i : second) out.push_back(survivors[i]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace testutil
