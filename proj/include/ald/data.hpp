#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ald/numerics.hpp"

namespace ald {

struct LabeledImages {
  Matrix images;  // rows x (height * width), values in [0, 1]
  std::vector<int> labels;
  std::size_t height = 0;
  std::size_t width = 0;
};

struct DatasetSplit {
  Matrix train_x;
  Matrix val_x;
  std::vector<int> train_labels;
  std::vector<int> val_labels;
  std::size_t k_classes = 0;
  std::size_t d = 0;
};

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
// Pixels are divided by 255.
LabeledImages load_idx(const std::string& images_path, const std::string& labels_path);

// Writes the IDX pair; pixels are scaled by 255 and rounded.
void write_idx(const std::string& images_path, const std::string& labels_path, const LabeledImages& data);

// Per class, the first floor(train_fraction * count) samples (in file order) go to train.
DatasetSplit split_stratified(const LabeledImages& data, std::size_t k_classes, double train_fraction = 0.8);

// k Gaussian clusters with centers uniform in [0.2, 0.8]^d and per-pixel noise
// sigma = spread, clamped to [0, 1]; stratified 80/20 split.
DatasetSplit make_blobs(std::size_t n_per_class, std::size_t k_classes, std::size_t d, double spread,
                        std::uint64_t seed);

// Shuffled partition of 0..n-1 into batches; the last batch may be short.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, Rng& rng);
std::vector<Matrix> batches(const Matrix& x, std::size_t batch_size, Rng& rng);

}  // namespace ald
