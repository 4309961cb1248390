#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ald/model.hpp"
#include "gradcheck.hpp"

using ald::Matrix;
using ald::Rng;
using ald::VaeParams;

namespace {

VaeParams zero_model(std::size_t d, std::size_t h, std::size_t nz) {
  Rng rng(0);
  return ald::zeros_like(ald::init_model(d, h, nz, rng));
}

ald::DenseLayer layer(std::size_t out, std::size_t in, std::vector<double> w, std::vector<double> b,
                      ald::Activation act) {
  return {Matrix(out, in, std::move(w)), std::move(b), act};
}

}  // namespace

TEST_CASE("init_model shapes follow the architecture") {
  Rng rng(0);
  const VaeParams p = ald::init_model(784, 400, 100, rng);
  CHECK(p.mu_head.weight.rows() == 100);
  CHECK(p.mu_head.weight.cols() == 400);
  CHECK(p.logvar_head.weight.rows() == 100);
  CHECK(p.decoder_input.weight.rows() == 400);
  CHECK(p.decoder_input.weight.cols() == 100);
  CHECK(p.encoder_hidden.size() == 2);
  CHECK(p.decoder_hidden.size() == 1);
  CHECK(p.output_layer.activation == ald::Activation::sigmoid);
  CHECK(p.latent_dim() == 100);

  Rng small(1);
  const VaeParams q = ald::init_model(4, 8, 2, small);
  CHECK(q.output_layer.weight.rows() == 4);
  CHECK(q.output_layer.weight.cols() == 8);
}

TEST_CASE("init_model is deterministic and enforces the latent floor") {
  Rng a(5), b(5);
  CHECK(ald::init_model(10, 6, 4, a).same_tensors(ald::init_model(10, 6, 4, b)));
  Rng c(5);
  CHECK_THROWS_WITH(ald::init_model(10, 6, 1, c), "latent floor is 2");
}

TEST_CASE("init weights are fan-in scaled") {
  Rng rng(3);
  const VaeParams p = ald::init_model(50, 20, 5, rng);
  const double bound = 1.0 / std::sqrt(50.0);
  for (double w : p.encoder_hidden[0].weight.values()) CHECK(std::abs(w) <= bound);
}

TEST_CASE("encode output widths and zero network") {
  Rng rng(2);
  const VaeParams p = ald::init_model(6, 5, 3, rng);
  Matrix x(4, 6, 0.3);
  const auto post = ald::encode(p, x);
  CHECK(post.mu.cols() == 3);
  CHECK(post.logvar.cols() == 3);
  CHECK(post.mu.rows() == 4);
  CHECK_THROWS(ald::encode(p, Matrix(4, 5)));

  const VaeParams z = zero_model(6, 5, 3);
  const auto zp = ald::encode(z, x);
  for (double v : zp.mu.values()) CHECK(v == 0.0);
  for (double v : zp.logvar.values()) CHECK(v == 0.0);
}

TEST_CASE("encode matches a hand-evaluated tiny network") {
  VaeParams p;
  p.encoder_hidden.push_back(layer(2, 2, {1, 0, 0, -1}, {0, 0.5}, ald::Activation::relu));
  p.encoder_hidden.push_back(layer(2, 2, {2, 1, 1, 1}, {0, 0}, ald::Activation::relu));
  p.mu_head = layer(1, 2, {0.5, -1}, {0.1}, ald::Activation::identity);
  p.logvar_head = layer(1, 2, {1, 1}, {-1}, ald::Activation::identity);
  p.decoder_input = layer(2, 1, {1, 1}, {0, 0}, ald::Activation::relu);
  p.output_layer = layer(2, 2, {1, 0, 0, 1}, {0, 0}, ald::Activation::sigmoid);
  // x = (1, 2): layer 1 pre = (1, -1.5) -> (1, 0); layer 2 -> (2, 1);
  // mu = 0.5*2 - 1 + 0.1 = 0.1; logvar = 2 + 1 - 1 = 2.
  const auto post = ald::encode(p, Matrix(1, 2, {1.0, 2.0}));
  CHECK(post.mu(0, 0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(post.logvar(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("reparameterize noise handling") {
  const Matrix mu(3, 2, {1, -2, 3, 0.5, 0, 7});
  SUBCASE("vanishing variance") {
    Rng rng(1);
    const auto lat = ald::reparameterize(mu, Matrix(3, 2, -50.0), rng);
    for (std::size_t i = 0; i < mu.size(); ++i) CHECK(std::abs(lat.z.values()[i] - mu.values()[i]) <= 1e-10);
  }
  SUBCASE("unit posterior returns the noise") {
    Rng rng(9);
    const auto lat = ald::reparameterize(Matrix(3, 2), Matrix(3, 2), rng);
    CHECK(lat.z == lat.eps);
  }
  SUBCASE("sample moments") {
    Rng rng(4);
    const std::size_t n = 100000;
    const auto lat = ald::reparameterize(Matrix(n, 1, 1.0), Matrix(n, 1, std::log(4.0)), rng);
    double mean = 0.0;
    for (double v : lat.z.values()) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : lat.z.values()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
    CHECK(std::abs(mean - 1.0) <= 0.03);
    CHECK(std::abs(var - 4.0) <= 0.15);
  }
}

TEST_CASE("decode contracts") {
  const VaeParams z = zero_model(5, 4, 3);
  const Matrix out = ald::decode(z, Matrix(2, 3, 1.7));
  for (double v : out.values()) CHECK(v == 0.5);
  CHECK_THROWS(ald::decode(z, Matrix(2, 4)));

  VaeParams p;
  p.decoder_input = layer(2, 2, {1, 0, 0, 1}, {0, 0}, ald::Activation::relu);
  p.mu_head = layer(2, 1, {0, 0}, {0, 0}, ald::Activation::identity);
  p.output_layer = layer(1, 2, {1, -1}, {0.5}, ald::Activation::sigmoid);
  // z = (1, 3): relu -> (1, 3); logit = 1 - 3 + 0.5 = -1.5.
  const Matrix xhat = ald::decode(p, Matrix(1, 2, {1.0, 3.0}));
  CHECK(xhat(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(1.5))).epsilon(1e-15));
}

TEST_CASE("elbo terms on closed-form cases") {
  SUBCASE("posterior equal to prior has zero KL") {
    const VaeParams z = zero_model(4, 3, 2);
    Rng rng(1);
    const auto res = ald::elbo_loss(z, Matrix(3, 4, 0.5), rng);
    CHECK(res.kl == 0.0);
    // Zero decoder gives xhat = 0.5, so each pixel costs ln 2.
    CHECK(res.recon_nll == doctest::Approx(4.0 * std::log(2.0)).epsilon(1e-14));
    CHECK(res.loss == res.recon_nll);
  }
  SUBCASE("unit mean shift") {
    const auto kl = ald::per_dim_kl(Matrix(1, 1, 1.0), Matrix(1, 1, 0.0));
    CHECK(kl[0] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("KL is nonnegative and zero only at the prior") {
    Rng rng(8);
    for (int t = 0; t < 200; ++t) {
      const Matrix mu(1, 1, rng.uniform(-3, 3));
      const Matrix lv(1, 1, rng.uniform(-4, 4));
      CHECK(ald::per_dim_kl(mu, lv)[0] > 0.0);
    }
  }
  SUBCASE("data outside [0, 1] is rejected") {
    const VaeParams z = zero_model(4, 3, 2);
    Rng rng(1);
    CHECK_THROWS(ald::elbo_loss(z, Matrix(1, 4, 1.5), rng));
    CHECK_THROWS(ald::elbo_loss(z, Matrix(1, 4, -0.1), rng));
  }
}

TEST_CASE("analytic gradients match finite differences") {
  Rng rng(31);
  auto c = testutil::random_gradcheck_case(6, 5, 3, 4, rng);
  const auto result = testutil::check_elbo_gradients(c.params, c.x, c.eps);
  CHECK(result.failures == 0);
  CHECK(result.worst_relative <= 1e-4);
}

TEST_CASE("backward_and_step") {
  SUBCASE("one step lowers the loss on the same batch with the same noise") {
    Rng rng(12);
    auto c = testutil::random_gradcheck_case(8, 6, 3, 16, rng);
    auto opt = ald::make_optimizer(c.params);
    const auto before = ald::elbo_loss_with_noise(c.params, c.x, c.eps);
    ald::backward_and_step(c.params, before.cache, opt);
    const auto after = ald::elbo_loss_with_noise(c.params, c.x, c.eps);
    CHECK(after.loss < before.loss);
    CHECK(opt.step == 1);
    CHECK(ald::flatten(c.params).size() == c.params.parameter_count());
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    VaeParams p = zero_model(4, 3, 2);
    const VaeParams original = p;
    auto opt = ald::make_optimizer(p);
    Rng rng(2);
    const auto res = ald::elbo_loss(p, Matrix(5, 4, 0.5), rng);
    ald::backward_and_step(p, res.cache, opt);
    CHECK(p.same_tensors(original));
    CHECK(opt.step == 1);
  }
  SUBCASE("stale cache is rejected") {
    Rng rng(12);
    auto c = testutil::random_gradcheck_case(8, 6, 3, 4, rng);
    auto opt = ald::make_optimizer(c.params);
    const auto res = ald::elbo_loss_with_noise(c.params, c.x, c.eps);
    ald::backward_and_step(c.params, res.cache, opt);
    CHECK_THROWS_AS(ald::backward_and_step(c.params, res.cache, opt), std::logic_error);
  }
}

TEST_CASE("training trajectory is bit-reproducible") {
  auto run = [] {
    Rng rng(77);
    VaeParams p = ald::init_model(8, 6, 3, rng);
    auto opt = ald::make_optimizer(p);
    Matrix x(10, 8);
    for (auto& v : x.values()) v = rng.uniform();
    std::vector<double> losses;
    for (int step = 0; step < 25; ++step) {
      const auto res = ald::elbo_loss(p, x, rng);
      losses.push_back(res.loss);
      ald::backward_and_step(p, res.cache, opt);
    }
    return losses;
  };
  CHECK(run() == run());
}

TEST_CASE("generate shape, range and reproducibility") {
  Rng init(4);
  const VaeParams p = ald::init_model(7, 5, 3, init);
  Rng a(10), b(10);
  const Matrix g = ald::generate(p, 12, a);
  CHECK(g.rows() == 12);
  CHECK(g.cols() == 7);
  CHECK(g == ald::generate(p, 12, b));
  for (double v : g.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK_THROWS(ald::generate(p, 0, a));
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  Rng rng(6);
  const VaeParams p = ald::init_model(9, 7, 4, rng);
  std::stringstream buf;
  ald::write_checkpoint(buf, p, 42, 1234);
  const auto [header, loaded] = ald::read_checkpoint(buf);
  CHECK(header.data_dim == 9);
  CHECK(header.hidden == 7);
  CHECK(header.latent_dim == 4);
  CHECK(header.epoch == 42);
  CHECK(header.seed == 1234);
  CHECK(loaded.same_tensors(p));

  std::string bytes = buf.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS(ald::read_checkpoint(truncated));
  std::stringstream garbage("not a checkpoint at all");
  CHECK_THROWS(ald::read_checkpoint(garbage));
}
