#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ald/data.hpp"
#include "ald/model.hpp"
#include "ald/numerics.hpp"

namespace ald {

struct ClusterAssignment {
  std::vector<int> labels;  // cluster id in [0, k) per point
  Matrix centroids;         // k x dim
  std::size_t k = 0;
  bool degenerate = false;  // some cluster ended up empty
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after each assignment step
  int iterations = 0;
};

// Lloyd's algorithm from a k-means++ start. Stops after max_iter rounds or when
// no centroid moves by tol or more.
ClusterAssignment kmeans(const Matrix& points, std::size_t k, Rng& rng, int max_iter = 100, double tol = 1e-6);

// Mean silhouette over all points with Euclidean distance. Points in singleton
// clusters score 0.
double silhouette_score(const Matrix& points, std::span<const int> labels);

// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)) between Gaussians fitted to
// the rows of each input. The matrix root is taken as
// (S_a^(1/2) S_b S_a^(1/2))^(1/2), which has the same trace and stays symmetric.
double frechet_distance(const Matrix& feats_a, const Matrix& feats_b);

// Run-constant embedding used before the Frechet distance.
class FeatureExtractor {
 public:
  enum class Kind { identity_flatten, random_projection };

  static FeatureExtractor identity();
  static FeatureExtractor random_projection(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed);
  // "identity" or "projection:<dim>[:<seed>]"; default_seed is used when the seed is omitted.
  static FeatureExtractor parse(const std::string& spec, std::size_t input_dim, std::uint64_t default_seed);

  Kind kind() const { return kind_; }
  const Matrix& projection() const { return projection_; }
  std::string describe() const;
  Matrix extract(const Matrix& images) const;

 private:
  Kind kind_ = Kind::identity_flatten;
  std::uint64_t seed_ = 0;
  Matrix projection_;  // input_dim x output_dim
};

Matrix extract_features(const Matrix& images, const FeatureExtractor& extractor);

struct MetricRecord {
  std::size_t epoch = 0;
  std::size_t latent_dim = 0;
  double silhouette = 0.0;
  double fid_recon = 0.0;
  double fid_gen = 0.0;
  double recon_loss = 0.0;
  double kl = 0.0;
  double elbo = 0.0;  // -(recon_loss + kl) on the evaluation batch

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

struct ModelOutputs {
  Matrix mu;
  Matrix logvar;
  Matrix reconstructions;
  Matrix generations;
};

// Scores already-computed model outputs against the evaluation batch. Uses rng
// only for K-means seeding.
MetricRecord score_outputs(const Matrix& eval_x, const ModelOutputs& outputs, std::size_t k_classes, Rng& rng,
                           const FeatureExtractor& extractor);

// Draws min(eval_n, val rows) validation samples, encodes them, clusters the
// posterior means, and fills every metric. Same rng state and params give the
// same record.
MetricRecord evaluate_epoch(const VaeParams& params, const DatasetSplit& val_split, std::size_t k_classes,
                            std::size_t eval_n, Rng rng, const FeatureExtractor& extractor,
                            std::vector<double>* per_dim_kl_out = nullptr);

}  // namespace ald
