#include "ald/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ald/kernels.hpp"

namespace ald {

namespace {

Matrix kmeans_plus_plus(const Matrix& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();
  Matrix centroids(k, dim);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  std::size_t pick = rng.uniform_index(n);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(points.row(pick).begin(), dim, centroids.row(c).begin());
    if (c + 1 == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double diff = points(i, j) - centroids(c, j);
        acc += diff * diff;
      }
      d2[i] = std::min(d2[i], acc);
      total += d2[i];
    }
    if (total <= 0.0) {
      pick = rng.uniform_index(n);
      continue;
    }
    const double target = rng.uniform() * total;
    double running = 0.0;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      running += d2[i];
      if (running > target && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
  }
  return centroids;
}

}  // namespace

ClusterAssignment kmeans(const Matrix& points, std::size_t k, Rng& rng, int max_iter, double tol) {
  if (k < 2) throw std::invalid_argument("kmeans: k must be at least 2");
  if (points.rows() < k) throw std::invalid_argument("kmeans: fewer points than clusters");
  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();

  ClusterAssignment out;
  out.k = k;
  out.centroids = kmeans_plus_plus(points, k, rng);
  std::vector<double> d2;

  auto assign = [&] {
    kernels::assign_nearest(points, out.centroids, out.labels, d2);
    out.inertia = 0.0;
    for (double v : d2) out.inertia += v;
    out.inertia_history.push_back(out.inertia);
  };

  for (out.iterations = 0; out.iterations < max_iter; ++out.iterations) {
    assign();
    Matrix sums(k, dim);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(out.labels[i]);
      ++counts[c];
      for (std::size_t j = 0; j < dim; ++j) sums(c, j) += points(i, j);
    }
    double max_shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      double shift = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double updated = sums(c, j) / static_cast<double>(counts[c]);
        const double diff = updated - out.centroids(c, j);
        shift += diff * diff;
        out.centroids(c, j) = updated;
      }
      max_shift = std::max(max_shift, std::sqrt(shift));
    }
    if (max_shift < tol) {
      ++out.iterations;
      break;
    }
  }
  assign();

  std::vector<bool> seen(k, false);
  for (int l : out.labels) seen[static_cast<std::size_t>(l)] = true;
  out.degenerate = std::find(seen.begin(), seen.end(), false) != seen.end();
  return out;
}

double silhouette_score(const Matrix& points, std::span<const int> labels) {
  if (labels.size() != points.rows()) throw std::invalid_argument("silhouette: one label per point required");
  std::map<int, std::size_t> compact;
  for (int l : labels) compact.emplace(l, 0);
  if (compact.size() < 2) throw std::invalid_argument("silhouette undefined for k=1");
  std::size_t next = 0;
  for (auto& [label, id] : compact) id = next++;

  const std::size_t n = points.rows();
  const std::size_t m = compact.size();
  std::vector<std::size_t> cluster(n);
  std::vector<double> sizes(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    cluster[i] = compact.at(labels[i]);
    sizes[cluster[i]] += 1.0;
  }

  Matrix dist;
  kernels::pairwise_distances(points, dist);

  std::vector<double> s(n, 0.0);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t ii = 0; ii < count; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const std::size_t own = cluster[i];
    if (sizes[own] <= 1.0) continue;
    std::vector<double> sums(m, 0.0);
    for (std::size_t j = 0; j < n; ++j) sums[cluster[j]] += dist(i, j);
    const double a = sums[own] / (sizes[own] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m; ++c)
      if (c != own) b = std::min(b, sums[c] / sizes[c]);
    const double denom = std::max(a, b);
    s[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }
  double total = 0.0;
  for (double v : s) total += v;
  return total / static_cast<double>(n);
}

double frechet_distance(const Matrix& feats_a, const Matrix& feats_b) {
  if (feats_a.cols() != feats_b.cols()) throw std::invalid_argument("frechet_distance: feature width mismatch");
  const MeanCov a = mean_and_covariance(feats_a);
  const MeanCov b = mean_and_covariance(feats_b);

  double mean_term = 0.0;
  for (std::size_t j = 0; j < a.mean.size(); ++j) {
    const double diff = a.mean[j] - b.mean[j];
    mean_term += diff * diff;
  }
  const Matrix root_a = psd_sqrt(a.cov);
  Matrix inner = root_a * b.cov * root_a;
  for (std::size_t i = 0; i < inner.rows(); ++i)
    for (std::size_t j = i + 1; j < inner.cols(); ++j) {
      const double avg = 0.5 * (inner(i, j) + inner(j, i));
      inner(i, j) = avg;
      inner(j, i) = avg;
    }
  const double cross = trace(psd_sqrt(inner));
  const double value = mean_term + trace(a.cov) + trace(b.cov) - 2.0 * cross;
  return std::max(value, 0.0);
}

// ---------------------------------------------------------------------------

FeatureExtractor FeatureExtractor::identity() { return {}; }

FeatureExtractor FeatureExtractor::random_projection(std::size_t input_dim, std::size_t output_dim,
                                                     std::uint64_t seed) {
  if (input_dim == 0 || output_dim == 0) throw std::invalid_argument("random_projection: dimensions must be positive");
  FeatureExtractor fx;
  fx.kind_ = Kind::random_projection;
  fx.seed_ = seed;
  fx.projection_ = Matrix(input_dim, output_dim);
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (auto& v : fx.projection_.values()) v = scale * rng.normal();
  return fx;
}

FeatureExtractor FeatureExtractor::parse(const std::string& spec, std::size_t input_dim, std::uint64_t default_seed) {
  if (spec == "identity" || spec == "identity_flatten") return identity();
  const std::string prefix = "projection";
  if (spec.rfind(prefix, 0) == 0) {
    std::size_t dim = 32;
    std::uint64_t seed = default_seed;
    std::string rest = spec.substr(prefix.size());
    if (!rest.empty()) {
      if (rest[0] != ':') throw std::invalid_argument("bad extractor spec: " + spec);
      rest = rest.substr(1);
      const auto colon = rest.find(':');
      dim = std::stoul(rest.substr(0, colon));
      if (colon != std::string::npos) seed = std::stoull(rest.substr(colon + 1));
    }
    return random_projection(input_dim, dim, seed);
  }
  throw std::invalid_argument("unknown feature extractor: " + spec);
}

std::string FeatureExtractor::describe() const {
  if (kind_ == Kind::identity_flatten) return "identity";
  std::ostringstream os;
  os << "projection:" << projection_.cols() << ":" << seed_;
  return os.str();
}

Matrix FeatureExtractor::extract(const Matrix& images) const {
  if (kind_ == Kind::identity_flatten) return images;
  if (images.cols() != projection_.rows()) throw std::invalid_argument("feature extractor: input width mismatch");
  return images * projection_;
}

Matrix extract_features(const Matrix& images, const FeatureExtractor& extractor) { return extractor.extract(images); }

// ---------------------------------------------------------------------------

MetricRecord score_outputs(const Matrix& eval_x, const ModelOutputs& outputs, std::size_t k_classes, Rng& rng,
                           const FeatureExtractor& extractor) {
  MetricRecord r;
  r.latent_dim = outputs.mu.cols();

  const ClusterAssignment clusters = kmeans(outputs.mu, k_classes, rng);
  std::vector<int> distinct = clusters.labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  // Fully collapsed latents put everything in one cluster; score that as 0.
  r.silhouette = distinct.size() >= 2 ? silhouette_score(outputs.mu, clusters.labels) : 0.0;

  const Matrix real_features = extractor.extract(eval_x);
  r.fid_recon = frechet_distance(real_features, extractor.extract(outputs.reconstructions));
  r.fid_gen = frechet_distance(real_features, extractor.extract(outputs.generations));
  r.recon_loss = bernoulli_nll(eval_x, outputs.reconstructions);
  for (double v : per_dim_kl(outputs.mu, outputs.logvar)) r.kl += v;
  r.elbo = -(r.recon_loss + r.kl);
  return r;
}

MetricRecord evaluate_epoch(const VaeParams& params, const DatasetSplit& val_split, std::size_t k_classes,
                            std::size_t eval_n, Rng rng, const FeatureExtractor& extractor,
                            std::vector<double>* per_dim_kl_out) {
  const std::size_t available = val_split.val_x.rows();
  const std::size_t n = std::min(eval_n, available);
  if (n < 2) throw std::invalid_argument("evaluate_epoch: need at least 2 validation samples");

  std::vector<std::size_t> order(available);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) std::swap(order[i], order[i + rng.uniform_index(available - i)]);
  order.resize(n);
  const Matrix eval_x = gather_rows(val_split.val_x, order);

  ModelOutputs outputs;
  Posterior post = encode(params, eval_x);
  outputs.reconstructions = decode(params, post.mu);
  outputs.generations = generate(params, n, rng);
  outputs.mu = std::move(post.mu);
  outputs.logvar = std::move(post.logvar);
  if (per_dim_kl_out != nullptr) *per_dim_kl_out = per_dim_kl(outputs.mu, outputs.logvar);
  return score_outputs(eval_x, outputs, k_classes, rng, extractor);
}

}  // namespace ald
