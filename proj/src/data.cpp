#include "ald/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <stdexcept>

namespace ald {

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::string& path) {
  if (offset + 4 > bytes.size()) throw std::runtime_error(path + ": truncated IDX header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

}  // namespace

LabeledImages load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);
  if (read_be32(img, 0, images_path) != 0x00000803U) throw std::runtime_error(images_path + ": not an IDX file");
  if (read_be32(lab, 0, labels_path) != 0x00000801U) throw std::runtime_error(labels_path + ": not an IDX file");

  const std::size_t count = read_be32(img, 4, images_path);
  const std::size_t rows = read_be32(img, 8, images_path);
  const std::size_t cols = read_be32(img, 12, images_path);
  const std::size_t label_count = read_be32(lab, 4, labels_path);
  if (count != label_count) throw std::runtime_error("IDX image count does not match label count");
  const std::size_t d = rows * cols;
  if (img.size() != 16 + count * d) throw std::runtime_error(images_path + ": truncated or oversized IDX payload");
  if (lab.size() != 8 + count) throw std::runtime_error(labels_path + ": truncated or oversized IDX payload");

  LabeledImages out{Matrix(count, d), std::vector<int>(count), rows, cols};
  for (std::size_t i = 0; i < count * d; ++i) out.images.values()[i] = static_cast<double>(img[16 + i]) / 255.0;
  for (std::size_t i = 0; i < count; ++i) out.labels[i] = lab[8 + i];
  return out;
}

void write_idx(const std::string& images_path, const std::string& labels_path, const LabeledImages& data) {
  if (data.labels.size() != data.images.rows()) throw std::invalid_argument("write_idx: label count mismatch");
  if (data.height * data.width != data.images.cols()) throw std::invalid_argument("write_idx: image shape mismatch");
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw std::runtime_error("write_idx: cannot open output files");
  write_be32(img, 0x00000803U);
  write_be32(img, static_cast<std::uint32_t>(data.images.rows()));
  write_be32(img, static_cast<std::uint32_t>(data.height));
  write_be32(img, static_cast<std::uint32_t>(data.width));
  for (double v : data.images.values()) {
    const long px = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
    img.put(static_cast<char>(static_cast<unsigned char>(px)));
  }
  write_be32(lab, 0x00000801U);
  write_be32(lab, static_cast<std::uint32_t>(data.labels.size()));
  for (int l : data.labels) lab.put(static_cast<char>(static_cast<unsigned char>(l)));
  if (!img || !lab) throw std::runtime_error("write_idx: write failed");
}

DatasetSplit split_stratified(const LabeledImages& data, std::size_t k_classes, double train_fraction) {
  if (k_classes < 2) throw std::invalid_argument("dataset needs at least 2 classes");
  std::vector<std::vector<std::size_t>> by_class(k_classes);
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    const int l = data.labels[i];
    if (l < 0 || static_cast<std::size_t>(l) >= k_classes) throw std::invalid_argument("label out of range");
    by_class[static_cast<std::size_t>(l)].push_back(i);
  }
  std::vector<std::size_t> train_idx, val_idx;
  for (const auto& members : by_class) {
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(members.size())));
    train_idx.insert(train_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    val_idx.insert(val_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  DatasetSplit split;
  split.k_classes = k_classes;
  split.d = data.images.cols();
  split.train_x = gather_rows(data.images, train_idx);
  split.val_x = gather_rows(data.images, val_idx);
  for (auto i : train_idx) split.train_labels.push_back(data.labels[i]);
  for (auto i : val_idx) split.val_labels.push_back(data.labels[i]);
  return split;
}

DatasetSplit make_blobs(std::size_t n_per_class, std::size_t k_classes, std::size_t d, double spread,
                        std::uint64_t seed) {
  if (k_classes < 2) throw std::invalid_argument("make_blobs: k_classes must be at least 2");
  if (d < 2) throw std::invalid_argument("make_blobs: d must be at least 2");
  Rng rng(seed);
  Matrix centers(k_classes, d);
  for (auto& c : centers.values()) c = rng.uniform(0.2, 0.8);

  LabeledImages all{Matrix(n_per_class * k_classes, d), {}, 1, d};
  std::size_t row = 0;
  for (std::size_t k = 0; k < k_classes; ++k) {
    for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
      for (std::size_t j = 0; j < d; ++j)
        all.images(row, j) = std::clamp(centers(k, j) + spread * rng.normal(), 0.0, 1.0);
      all.labels.push_back(static_cast<int>(k));
    }
  }
  return split_stratified(all, k_classes, 0.8);
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

std::vector<Matrix> batches(const Matrix& x, std::size_t batch_size, Rng& rng) {
  std::vector<Matrix> out;
  for (const auto& idx : batch_indices(x.rows(), batch_size, rng)) out.push_back(gather_rows(x, idx));
  return out;
}

}  // namespace ald
