#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ald/metrics.hpp"
#include "oracles.hpp"

using ald::Matrix;
using ald::Rng;

namespace {

Matrix two_blobs(std::size_t per_blob, Rng& rng) {
  Matrix pts(2 * per_blob, 2);
  for (std::size_t i = 0; i < 2 * per_blob; ++i) {
    const double c = i < per_blob ? 10.0 : -10.0;
    pts(i, 0) = c + 0.5 * rng.normal();
    pts(i, 1) = c + 0.5 * rng.normal();
  }
  return pts;
}

struct SilhouetteInstance {
  Matrix points;
  std::vector<int> labels;
};

SilhouetteInstance random_instance(Rng& rng) {
  const std::size_t k = 2 + rng.uniform_index(3);
  const std::size_t dim = 2 + rng.uniform_index(7);
  const std::size_t n = std::max<std::size_t>(k, 3 + rng.uniform_index(28));
  SilhouetteInstance inst{Matrix(n, dim), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    inst.labels[i] = i < k ? static_cast<int>(i) : static_cast<int>(rng.uniform_index(k));
    for (std::size_t c = 0; c < dim; ++c) inst.points(i, c) = 3.0 * inst.labels[i] + rng.normal();
  }
  return inst;
}

double self_nll(const Matrix& x) {
  double total = 0.0;
  for (double v : x.values()) {
    const double p = std::clamp(v, 1e-12, 1.0 - 1e-12);
    total -= v * std::log(p) + (1.0 - v) * std::log(1.0 - p);
  }
  return total / static_cast<double>(x.rows());
}

}  // namespace

TEST_CASE("kmeans recovers two separated blobs") {
  Rng data(3);
  const Matrix pts = two_blobs(100, data);
  Rng rng(11);
  const auto res = ald::kmeans(pts, 2, rng);
  CHECK_FALSE(res.degenerate);
  std::vector<std::pair<double, double>> cs{{res.centroids(0, 0), res.centroids(0, 1)},
                                            {res.centroids(1, 0), res.centroids(1, 1)}};
  std::sort(cs.begin(), cs.end());
  CHECK(std::abs(cs[0].first + 10.0) < 0.3);
  CHECK(std::abs(cs[0].second + 10.0) < 0.3);
  CHECK(std::abs(cs[1].first - 10.0) < 0.3);
  CHECK(std::abs(cs[1].second - 10.0) < 0.3);
  for (std::size_t i = 0; i < 200; ++i) CHECK(res.labels[i] == res.labels[i < 100 ? 0 : 100]);
}

TEST_CASE("kmeans with k equal to the point count has zero inertia") {
  Rng data(4);
  Matrix pts(6, 3);
  for (auto& v : pts.values()) v = data.normal();
  Rng rng(1);
  const auto res = ald::kmeans(pts, 6, rng);
  CHECK(res.inertia == 0.0);
  CHECK(std::set<int>(res.labels.begin(), res.labels.end()).size() == 6);
}

TEST_CASE("kmeans on a duplicated dataset gives the same centroids") {
  Rng data(5);
  const Matrix pts = two_blobs(40, data);
  Matrix twice(160, 2);
  for (std::size_t i = 0; i < 80; ++i)
    for (std::size_t c = 0; c < 2; ++c) twice(i, c) = twice(i + 80, c) = pts(i, c);
  Rng a(2), b(2);
  const auto single = ald::kmeans(pts, 2, a);
  const auto doubled = ald::kmeans(twice, 2, b);
  auto sorted_centroids = [](const Matrix& c) {
    std::vector<std::pair<double, double>> out{{c(0, 0), c(0, 1)}, {c(1, 0), c(1, 1)}};
    std::sort(out.begin(), out.end());
    return out;
  };
  const auto s = sorted_centroids(single.centroids);
  const auto d = sorted_centroids(doubled.centroids);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(s[i].first == doctest::Approx(d[i].first).epsilon(1e-12));
    CHECK(s[i].second == doctest::Approx(d[i].second).epsilon(1e-12));
  }
}

TEST_CASE("kmeans inertia never increases and runs are seeded") {
  Rng data(6);
  Matrix pts(300, 4);
  for (auto& v : pts.values()) v = data.normal();
  Rng rng(3);
  const auto res = ald::kmeans(pts, 5, rng);
  REQUIRE(res.inertia_history.size() >= 2);
  for (std::size_t i = 1; i < res.inertia_history.size(); ++i)
    CHECK(res.inertia_history[i] <= res.inertia_history[i - 1] * (1.0 + 1e-12));
  CHECK(res.iterations <= 100);

  Rng again(3);
  CHECK(ald::kmeans(pts, 5, again).labels == res.labels);
  Rng err(0);
  CHECK_THROWS(ald::kmeans(Matrix(2, 2), 3, err));
}

TEST_CASE("silhouette hand example") {
  const Matrix pts(4, 2, {0, 0, 0, 1, 10, 0, 10, 1});
  const std::vector<int> labels{0, 0, 1, 1};
  const double b = (10.0 + std::sqrt(101.0)) / 2.0;
  const double expected = (b - 1.0) / b;
  CHECK(ald::silhouette_score(pts, labels) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(expected == doctest::Approx(0.9003).epsilon(1e-4));
}

TEST_CASE("silhouette matches the brute-force oracle") {
  Rng rng(21);
  for (int t = 0; t < 200; ++t) {
    const auto inst = random_instance(rng);
    const double got = ald::silhouette_score(inst.points, inst.labels);
    CHECK(std::abs(got - oracle::silhouette(inst.points, inst.labels)) <= 1e-9);
    CHECK(got >= -1.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("silhouette edge cases") {
  // Point 0 is equidistant from both clusters, so s_0 = 0; the singleton scores 0.
  const Matrix pts(3, 1, {0.0, 1.0, -1.0});
  const std::vector<int> labels{0, 0, 1};
  // s_1: a = 1, b = 2 -> 0.5.
  CHECK(ald::silhouette_score(pts, labels) == doctest::Approx(0.5 / 3.0).epsilon(1e-14));
  CHECK_THROWS_WITH(ald::silhouette_score(pts, std::vector<int>{1, 1, 1}), "silhouette undefined for k=1");
}

TEST_CASE("frechet distance properties") {
  Rng rng(30);
  Matrix a(400, 3), b(300, 3);
  for (auto& v : a.values()) v = rng.normal();
  for (auto& v : b.values()) v = 0.5 + 2.0 * rng.normal();
  CHECK(ald::frechet_distance(a, a) <= 1e-8);
  const double ab = ald::frechet_distance(a, b);
  CHECK(ab > 0.0);
  CHECK(std::abs(ab - ald::frechet_distance(b, a)) <= 1e-10 * std::max(1.0, ab));
  CHECK_THROWS(ald::frechet_distance(a, Matrix(10, 2)));
}

TEST_CASE("frechet distance of 1-D Gaussians") {
  Rng rng(31);
  const std::size_t n = 20000;
  Matrix a(n, 1), b(n, 1);
  for (auto& v : a.values()) v = rng.normal();
  for (auto& v : b.values()) v = 3.0 + 2.0 * rng.normal();
  const double expected = oracle::gaussian_frechet_diagonal({0.0}, {1.0}, {3.0}, {4.0});
  CHECK(expected == doctest::Approx(10.0));
  CHECK(std::abs(ald::frechet_distance(a, b) - expected) <= 0.5);
}

TEST_CASE("feature extractors") {
  Rng rng(2);
  Matrix imgs(5, 784);
  for (auto& v : imgs.values()) v = rng.uniform();
  CHECK(ald::extract_features(imgs, ald::FeatureExtractor::identity()) == imgs);

  const auto proj = ald::FeatureExtractor::random_projection(784, 32, 9);
  const Matrix f = ald::extract_features(imgs, proj);
  CHECK(f.rows() == 5);
  CHECK(f.cols() == 32);
  CHECK(proj.projection() == ald::FeatureExtractor::random_projection(784, 32, 9).projection());
  CHECK_FALSE(proj.projection() == ald::FeatureExtractor::random_projection(784, 32, 10).projection());

  const auto parsed = ald::FeatureExtractor::parse("projection:16", 784, 9);
  CHECK(parsed.kind() == ald::FeatureExtractor::Kind::random_projection);
  CHECK(parsed.projection().cols() == 16);
  CHECK(ald::FeatureExtractor::parse("identity", 784, 0).kind() == ald::FeatureExtractor::Kind::identity_flatten);
  CHECK_THROWS(ald::FeatureExtractor::parse("inception", 784, 0));
}

TEST_CASE("evaluate_epoch on an untrained model") {
  const auto split = ald::make_blobs(50, 4, 16, 0.1, 7);
  Rng init(1);
  const auto params = ald::init_model(16, 12, 6, init);
  const auto extractor = ald::FeatureExtractor::random_projection(16, 8, 1);
  std::vector<double> kl;
  const auto rec = ald::evaluate_epoch(params, split, 4, 500, Rng(5), extractor, &kl);
  CHECK(rec.latent_dim == 6);
  CHECK(kl.size() == 6);
  for (double v : {rec.silhouette, rec.fid_recon, rec.fid_gen, rec.recon_loss, rec.kl, rec.elbo})
    CHECK(std::isfinite(v));
  CHECK(rec.elbo == -(rec.recon_loss + rec.kl));

  // Frozen params and a fixed evaluation seed give identical records.
  CHECK(ald::evaluate_epoch(params, split, 4, 500, Rng(5), extractor) == rec);
}

TEST_CASE("perfect autoencoder stub") {
  const auto split = ald::make_blobs(30, 3, 10, 0.1, 3);
  const Matrix& x = split.val_x;
  Rng rng(2);
  ald::ModelOutputs out;
  out.mu = Matrix(x.rows(), 2);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out.mu(i, 0) = split.val_labels[i] + 0.01 * rng.normal();
    out.mu(i, 1) = 0.01 * rng.normal();
  }
  out.logvar = Matrix(x.rows(), 2);
  out.reconstructions = x;
  out.generations = x;
  const auto rec = ald::score_outputs(x, out, 3, rng, ald::FeatureExtractor::identity());
  CHECK(rec.fid_recon <= 1e-8);
  CHECK(rec.fid_gen <= 1e-8);
  CHECK(rec.recon_loss == doctest::Approx(self_nll(x)).epsilon(1e-12));
  CHECK(rec.silhouette > 0.9);
}

TEST_CASE("collapsed latents score a zero silhouette") {
  const auto split = ald::make_blobs(20, 2, 6, 0.1, 3);
  const Matrix& x = split.val_x;
  ald::ModelOutputs out{Matrix(x.rows(), 2), Matrix(x.rows(), 2), x, x};
  Rng rng(1);
  CHECK(ald::score_outputs(x, out, 2, rng, ald::FeatureExtractor::identity()).silhouette == 0.0);
}
