#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ald/numerics.hpp"

namespace ald {

enum class Activation { relu, silu, sigmoid, identity };

struct DenseLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;
  Activation activation = Activation::identity;

  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Fully-connected VAE. The widths of mu_head, logvar_head (rows) and
// decoder_input (cols) are the latent dimensionality.
struct VaeParams {
  std::vector<DenseLayer> encoder_hidden;
  DenseLayer mu_head;
  DenseLayer logvar_head;
  DenseLayer decoder_input;
  std::vector<DenseLayer> decoder_hidden;
  DenseLayer output_layer;

  // Bumped by every update so a forward cache can tell it is stale.
  std::uint64_t version = 0;

  std::size_t latent_dim() const { return mu_head.out(); }
  std::size_t data_dim() const { return output_layer.out(); }
  std::size_t hidden_dim() const { return mu_head.in(); }
  std::size_t parameter_count() const;

  // Tensor contents only; version is ignored.
  bool same_tensors(const VaeParams& other) const;
};

// Visits every parameter tensor in a fixed order. Biases are reported as 1 x out.
template <typename Params, typename Fn>
void for_each_tensor(Params& params, Fn&& fn) {
  auto visit_layer = [&](std::string prefix, auto& layer) {
    fn(prefix + ".weight", layer.weight.rows(), layer.weight.cols(), layer.weight.values());
    fn(prefix + ".bias", std::size_t{1}, layer.bias.size(), std::span(layer.bias));
  };
  for (std::size_t i = 0; i < params.encoder_hidden.size(); ++i)
    visit_layer("encoder." + std::to_string(i), params.encoder_hidden[i]);
  visit_layer("mu", params.mu_head);
  visit_layer("logvar", params.logvar_head);
  visit_layer("decoder_input", params.decoder_input);
  for (std::size_t i = 0; i < params.decoder_hidden.size(); ++i)
    visit_layer("decoder." + std::to_string(i), params.decoder_hidden[i]);
  visit_layer("output", params.output_layer);
}

std::vector<double> flatten(const VaeParams& params);
void unflatten(VaeParams& params, std::span<const double> flat);
VaeParams zeros_like(const VaeParams& params);

// Encoder d -> hidden -> hidden, heads hidden -> n_z, decoder n_z -> hidden ->
// hidden -> d with a sigmoid output. Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
VaeParams init_model(std::size_t d, std::size_t hidden, std::size_t n_z, Rng& rng);

Matrix apply_layer(const DenseLayer& layer, const Matrix& x, Matrix* pre_activation = nullptr);

struct Posterior {
  Matrix mu;
  Matrix logvar;
};

Posterior encode(const VaeParams& params, const Matrix& x);

struct LatentBatch {
  Matrix mu;
  Matrix logvar;
  Matrix z;
  Matrix eps;
};

// z = mu + exp(logvar / 2) * eps with eps drawn row-major from rng.
LatentBatch reparameterize(const Matrix& mu, const Matrix& logvar, Rng& rng);
LatentBatch reparameterize(const Matrix& mu, const Matrix& logvar, const Matrix& eps);

Matrix decode_logits(const VaeParams& params, const Matrix& z);
Matrix decode(const VaeParams& params, const Matrix& z);

// Bernoulli negative log-likelihood summed over pixels and averaged over rows.
double bernoulli_nll(const Matrix& x, const Matrix& probabilities);
// Per-dimension KL(q || N(0, I)) averaged over rows.
std::vector<double> per_dim_kl(const Matrix& mu, const Matrix& logvar);

struct ElboCache {
  std::uint64_t params_version = 0;
  Matrix x;
  std::vector<Matrix> encoder_inputs;  // input to each encoder hidden layer
  std::vector<Matrix> encoder_pre;
  Matrix encoder_out;                  // input to the two heads
  LatentBatch latent;
  std::vector<Matrix> decoder_inputs;  // decoder_input, then each decoder_hidden
  std::vector<Matrix> decoder_pre;
  Matrix output_input;
  Matrix logits;
};

struct ElboResult {
  double loss = 0.0;       // recon_nll + kl, the negated ELBO
  double recon_nll = 0.0;
  double kl = 0.0;
  ElboCache cache;
};

ElboResult elbo_loss(const VaeParams& params, const Matrix& x, Rng& rng);
// Same objective with the reparameterization noise supplied by the caller.
ElboResult elbo_loss_with_noise(const VaeParams& params, const Matrix& x, const Matrix& eps);

// Reverse-mode gradient of the loss in cache, shaped like params.
VaeParams elbo_gradients(const VaeParams& params, const ElboCache& cache);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  VaeParams first_moment;
  VaeParams second_moment;
  std::uint64_t step = 0;
  AdamConfig config;
};

OptimizerState make_optimizer(const VaeParams& params, AdamConfig config = {});
void adam_step(VaeParams& params, const VaeParams& grads, OptimizerState& optimizer);
// Backpropagates the cached loss and applies one Adam update in place.
void backward_and_step(VaeParams& params, const ElboCache& cache, OptimizerState& optimizer);

// decode(z) for z ~ N(0, I).
Matrix generate(const VaeParams& params, std::size_t n, Rng& rng);

// -- checkpoints --------------------------------------------------------------

struct CheckpointHeader {
  std::uint32_t format_version = 1;
  std::uint64_t data_dim = 0;
  std::uint64_t hidden = 0;
  std::uint64_t latent_dim = 0;
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const CheckpointHeader&, const CheckpointHeader&) = default;
};

void write_checkpoint(std::ostream& out, const VaeParams& params, std::uint64_t epoch, std::uint64_t seed);
std::pair<CheckpointHeader, VaeParams> read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const VaeParams& params, std::uint64_t epoch, std::uint64_t seed);
std::pair<CheckpointHeader, VaeParams> load_checkpoint(const std::string& path);

}  // namespace ald
