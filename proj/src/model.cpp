#include "ald/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "ald/kernels.hpp"

namespace ald {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double activate(Activation a, double x) {
  switch (a) {
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::silu:
      return x * sigmoid(x);
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::identity:
      return x;
  }
  return x;
}

double activation_derivative(Activation a, double pre) {
  switch (a) {
    case Activation::relu:
      return pre > 0.0 ? 1.0 : 0.0;
    case Activation::silu: {
      const double s = sigmoid(pre);
      return s * (1.0 + pre * (1.0 - s));
    }
    case Activation::sigmoid: {
      const double s = sigmoid(pre);
      return s * (1.0 - s);
    }
    case Activation::identity:
      return 1.0;
  }
  return 1.0;
}

DenseLayer make_layer(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  DenseLayer layer{Matrix(out, in), std::vector<double>(out), act};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& w : layer.weight.values()) w = rng.uniform(-bound, bound);
  for (auto& b : layer.bias) b = rng.uniform(-bound, bound);
  return layer;
}

// Gradient of one dense layer given dL/d(pre-activation). Writes into grad and
// returns dL/d(input) when requested.
void backward_from_pre(const DenseLayer& layer, const Matrix& input, const Matrix& d_pre, DenseLayer& grad,
                       Matrix* d_input) {
  kernels::linear_grad_weight(d_pre, input, grad.weight);
  grad.bias.assign(layer.out(), 0.0);
  for (std::size_t r = 0; r < d_pre.rows(); ++r)
    for (std::size_t c = 0; c < d_pre.cols(); ++c) grad.bias[c] += d_pre(r, c);
  if (d_input != nullptr) kernels::linear_grad_input(d_pre, layer.weight, *d_input);
}

void layer_backward(const DenseLayer& layer, const Matrix& input, const Matrix& pre, const Matrix& d_out,
                    DenseLayer& grad, Matrix* d_input) {
  Matrix d_pre = d_out;
  if (layer.activation != Activation::identity) {
    for (std::size_t i = 0; i < d_pre.size(); ++i)
      d_pre.values()[i] *= activation_derivative(layer.activation, pre.values()[i]);
  }
  backward_from_pre(layer, input, d_pre, grad, d_input);
}

void check_width(const Matrix& m, std::size_t width, const char* what) {
  if (m.cols() != width) throw std::invalid_argument(std::string(what) + ": input width mismatch");
}

}  // namespace

// ---------------------------------------------------------------------------

std::size_t VaeParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor(*this, [&](const std::string&, std::size_t, std::size_t, auto values) { n += values.size(); });
  return n;
}

bool VaeParams::same_tensors(const VaeParams& other) const {
  return encoder_hidden == other.encoder_hidden && mu_head == other.mu_head && logvar_head == other.logvar_head &&
         decoder_input == other.decoder_input && decoder_hidden == other.decoder_hidden &&
         output_layer == other.output_layer;
}

std::vector<double> flatten(const VaeParams& params) {
  std::vector<double> flat;
  flat.reserve(params.parameter_count());
  for_each_tensor(params, [&](const std::string&, std::size_t, std::size_t, auto values) {
    flat.insert(flat.end(), values.begin(), values.end());
  });
  return flat;
}

void unflatten(VaeParams& params, std::span<const double> flat) {
  if (flat.size() != params.parameter_count()) throw std::invalid_argument("unflatten: wrong parameter count");
  std::size_t offset = 0;
  for_each_tensor(params, [&](const std::string&, std::size_t, std::size_t, std::span<double> values) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), values.size(), values.begin());
    offset += values.size();
  });
  ++params.version;
}

VaeParams zeros_like(const VaeParams& params) {
  VaeParams z = params;
  for_each_tensor(z, [](const std::string&, std::size_t, std::size_t, std::span<double> values) {
    std::fill(values.begin(), values.end(), 0.0);
  });
  z.version = 0;
  return z;
}

VaeParams init_model(std::size_t d, std::size_t hidden, std::size_t n_z, Rng& rng) {
  if (n_z < 2) throw std::invalid_argument("latent floor is 2");
  if (d < 1 || hidden < 1) throw std::invalid_argument("init_model: dimensions must be positive");
  VaeParams p;
  p.encoder_hidden.push_back(make_layer(d, hidden, Activation::relu, rng));
  p.encoder_hidden.push_back(make_layer(hidden, hidden, Activation::relu, rng));
  p.mu_head = make_layer(hidden, n_z, Activation::identity, rng);
  p.logvar_head = make_layer(hidden, n_z, Activation::identity, rng);
  p.decoder_input = make_layer(n_z, hidden, Activation::relu, rng);
  p.decoder_hidden.push_back(make_layer(hidden, hidden, Activation::relu, rng));
  p.output_layer = make_layer(hidden, d, Activation::sigmoid, rng);
  return p;
}

Matrix apply_layer(const DenseLayer& layer, const Matrix& x, Matrix* pre_activation) {
  Matrix pre;
  kernels::linear_forward(x, layer.weight, layer.bias, pre);
  Matrix out = pre;
  if (layer.activation != Activation::identity)
    for (auto& v : out.values()) v = activate(layer.activation, v);
  if (pre_activation != nullptr) *pre_activation = std::move(pre);
  return out;
}

Posterior encode(const VaeParams& params, const Matrix& x) {
  if (params.encoder_hidden.empty()) throw std::invalid_argument("encode: model has no encoder");
  check_width(x, params.encoder_hidden.front().in(), "encode");
  Matrix h = x;
  for (const auto& layer : params.encoder_hidden) h = apply_layer(layer, h);
  return {apply_layer(params.mu_head, h), apply_layer(params.logvar_head, h)};
}

LatentBatch reparameterize(const Matrix& mu, const Matrix& logvar, Rng& rng) {
  Matrix eps(mu.rows(), mu.cols());
  for (auto& e : eps.values()) e = rng.normal();
  return reparameterize(mu, logvar, eps);
}

LatentBatch reparameterize(const Matrix& mu, const Matrix& logvar, const Matrix& eps) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols() || mu.rows() != eps.rows() ||
      mu.cols() != eps.cols())
    throw std::invalid_argument("reparameterize: shape mismatch");
  LatentBatch out{mu, logvar, Matrix(mu.rows(), mu.cols()), eps};
  for (std::size_t i = 0; i < mu.size(); ++i)
    out.z.values()[i] = mu.values()[i] + std::exp(0.5 * logvar.values()[i]) * eps.values()[i];
  return out;
}

Matrix decode_logits(const VaeParams& params, const Matrix& z) {
  check_width(z, params.latent_dim(), "decode");
  Matrix h = apply_layer(params.decoder_input, z);
  for (const auto& layer : params.decoder_hidden) h = apply_layer(layer, h);
  Matrix logits;
  kernels::linear_forward(h, params.output_layer.weight, params.output_layer.bias, logits);
  return logits;
}

Matrix decode(const VaeParams& params, const Matrix& z) {
  Matrix out = decode_logits(params, z);
  for (auto& v : out.values()) v = sigmoid(v);
  return out;
}

double bernoulli_nll(const Matrix& x, const Matrix& probabilities) {
  if (x.rows() != probabilities.rows() || x.cols() != probabilities.cols())
    throw std::invalid_argument("bernoulli_nll: shape mismatch");
  if (x.rows() == 0) return 0.0;
  constexpr double kTiny = 1e-12;
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = x.values()[i];
    const double p = std::clamp(probabilities.values()[i], kTiny, 1.0 - kTiny);
    if (t > 0.0) total -= t * std::log(p);
    if (t < 1.0) total -= (1.0 - t) * std::log1p(-p);
  }
  return total / static_cast<double>(x.rows());
}

std::vector<double> per_dim_kl(const Matrix& mu, const Matrix& logvar) {
  std::vector<double> kl(mu.cols(), 0.0);
  if (mu.rows() == 0) return kl;
  for (std::size_t r = 0; r < mu.rows(); ++r)
    for (std::size_t c = 0; c < mu.cols(); ++c) {
      const double m = mu(r, c);
      const double lv = logvar(r, c);
      kl[c] += 0.5 * (m * m + std::exp(lv) - 1.0 - lv);
    }
  for (auto& v : kl) v /= static_cast<double>(mu.rows());
  return kl;
}

// ---------------------------------------------------------------------------

ElboResult elbo_loss(const VaeParams& params, const Matrix& x, Rng& rng) {
  // Noise is drawn after the encoder shapes are known; the encoder itself is
  // deterministic so the draw order matches reparameterize().
  Matrix eps(x.rows(), params.latent_dim());
  for (auto& e : eps.values()) e = rng.normal();
  return elbo_loss_with_noise(params, x, eps);
}

ElboResult elbo_loss_with_noise(const VaeParams& params, const Matrix& x, const Matrix& eps) {
  check_width(x, params.data_dim(), "elbo_loss");
  for (double v : x.values())
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("elbo_loss: data must lie in [0, 1]");
  if (x.rows() == 0) throw std::invalid_argument("elbo_loss: empty batch");

  ElboResult result;
  ElboCache& c = result.cache;
  c.params_version = params.version;
  c.x = x;

  Matrix h = x;
  for (const auto& layer : params.encoder_hidden) {
    c.encoder_inputs.push_back(h);
    Matrix pre;
    h = apply_layer(layer, h, &pre);
    c.encoder_pre.push_back(std::move(pre));
  }
  c.encoder_out = h;
  Matrix mu = apply_layer(params.mu_head, h);
  Matrix logvar = apply_layer(params.logvar_head, h);
  c.latent = reparameterize(mu, logvar, eps);

  h = c.latent.z;
  auto forward_decoder = [&](const DenseLayer& layer) {
    c.decoder_inputs.push_back(h);
    Matrix pre;
    h = apply_layer(layer, h, &pre);
    c.decoder_pre.push_back(std::move(pre));
  };
  forward_decoder(params.decoder_input);
  for (const auto& layer : params.decoder_hidden) forward_decoder(layer);
  c.output_input = h;
  kernels::linear_forward(h, params.output_layer.weight, params.output_layer.bias, c.logits);

  const auto batch = static_cast<double>(x.rows());
  double recon = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double l = c.logits.values()[i];
    recon += softplus(l) - x.values()[i] * l;
  }
  result.recon_nll = recon / batch;
  for (double v : per_dim_kl(mu, logvar)) result.kl += v;
  result.loss = result.recon_nll + result.kl;
  return result;
}

VaeParams elbo_gradients(const VaeParams& params, const ElboCache& c) {
  if (c.params_version != params.version) throw std::logic_error("stale cache: parameters changed since forward pass");
  const double inv_batch = 1.0 / static_cast<double>(c.x.rows());
  VaeParams g = zeros_like(params);

  // Output layer: d(softplus(l) - x l)/dl = sigmoid(l) - x.
  Matrix d_logits(c.logits.rows(), c.logits.cols());
  for (std::size_t i = 0; i < d_logits.size(); ++i)
    d_logits.values()[i] = (sigmoid(c.logits.values()[i]) - c.x.values()[i]) * inv_batch;
  Matrix d_h;
  backward_from_pre(params.output_layer, c.output_input, d_logits, g.output_layer, &d_h);

  for (std::size_t i = params.decoder_hidden.size(); i-- > 0;) {
    Matrix d_in;
    layer_backward(params.decoder_hidden[i], c.decoder_inputs[i + 1], c.decoder_pre[i + 1], d_h,
                   g.decoder_hidden[i], &d_in);
    d_h = std::move(d_in);
  }
  Matrix d_z;
  layer_backward(params.decoder_input, c.decoder_inputs[0], c.decoder_pre[0], d_h, g.decoder_input, &d_z);

  const LatentBatch& lat = c.latent;
  Matrix d_mu(lat.mu.rows(), lat.mu.cols());
  Matrix d_logvar(lat.mu.rows(), lat.mu.cols());
  for (std::size_t i = 0; i < d_mu.size(); ++i) {
    const double m = lat.mu.values()[i];
    const double lv = lat.logvar.values()[i];
    const double sd = std::exp(0.5 * lv);
    d_mu.values()[i] = d_z.values()[i] + m * inv_batch;
    d_logvar.values()[i] = d_z.values()[i] * lat.eps.values()[i] * 0.5 * sd + 0.5 * (sd * sd - 1.0) * inv_batch;
  }

  Matrix d_enc;
  Matrix d_enc_lv;
  layer_backward(params.mu_head, c.encoder_out, Matrix(), d_mu, g.mu_head, &d_enc);
  layer_backward(params.logvar_head, c.encoder_out, Matrix(), d_logvar, g.logvar_head, &d_enc_lv);
  for (std::size_t i = 0; i < d_enc.size(); ++i) d_enc.values()[i] += d_enc_lv.values()[i];

  for (std::size_t i = params.encoder_hidden.size(); i-- > 0;) {
    Matrix d_in;
    layer_backward(params.encoder_hidden[i], c.encoder_inputs[i], c.encoder_pre[i], d_enc, g.encoder_hidden[i],
                   i > 0 ? &d_in : nullptr);
    d_enc = std::move(d_in);
  }
  return g;
}

OptimizerState make_optimizer(const VaeParams& params, AdamConfig config) {
  return {zeros_like(params), zeros_like(params), 0, config};
}

void adam_step(VaeParams& params, const VaeParams& grads, OptimizerState& opt) {
  std::vector<std::span<double>> p_views, m_views, v_views;
  std::vector<std::span<const double>> g_views;
  auto collect = [](auto& vec) {
    return [&vec](const std::string&, std::size_t, std::size_t, auto values) { vec.push_back(values); };
  };
  for_each_tensor(params, collect(p_views));
  for_each_tensor(grads, collect(g_views));
  for_each_tensor(opt.first_moment, collect(m_views));
  for_each_tensor(opt.second_moment, collect(v_views));
  if (g_views.size() != p_views.size() || m_views.size() != p_views.size() || v_views.size() != p_views.size())
    throw std::invalid_argument("adam_step: optimizer state does not mirror parameters");

  ++opt.step;
  const AdamConfig& cfg = opt.config;
  const double t = static_cast<double>(opt.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < p_views.size(); ++k) {
    auto p = p_views[k];
    auto g = g_views[k];
    auto m = m_views[k];
    auto v = v_views[k];
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size())
      throw std::invalid_argument("adam_step: tensor shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
  ++params.version;
}

void backward_and_step(VaeParams& params, const ElboCache& cache, OptimizerState& optimizer) {
  const VaeParams grads = elbo_gradients(params, cache);
  adam_step(params, grads, optimizer);
}

Matrix generate(const VaeParams& params, std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("generate: n must be at least 1");
  Matrix z(n, params.latent_dim());
  for (auto& v : z.values()) v = rng.normal();
  return decode(params, z);
}

// -- checkpoints --------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'A', 'L', 'D', 'V', 'A', 'E', 'C', 'K'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
  out.write(bytes, 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
  out.write(bytes, 4);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw std::runtime_error("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const VaeParams& params, std::uint64_t epoch, std::uint64_t seed) {
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, 1);
  put_u64(out, params.data_dim());
  put_u64(out, params.hidden_dim());
  put_u64(out, params.latent_dim());
  put_u64(out, epoch);
  put_u64(out, seed);
  std::uint32_t count = 0;
  for_each_tensor(params, [&](const std::string&, std::size_t, std::size_t, auto) { ++count; });
  put_u32(out, count);
  for_each_tensor(params, [&](const std::string& name, std::size_t rows, std::size_t cols, auto values) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, rows);
    put_u64(out, cols);
    for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  });
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

std::pair<CheckpointHeader, VaeParams> read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  CheckpointHeader h;
  h.format_version = get_u32(in);
  if (h.format_version != 1) throw std::runtime_error("checkpoint: unsupported format version");
  h.data_dim = get_u64(in);
  h.hidden = get_u64(in);
  h.latent_dim = get_u64(in);
  h.epoch = get_u64(in);
  h.seed = get_u64(in);

  Rng scratch(0);
  VaeParams params = init_model(h.data_dim, h.hidden, h.latent_dim, scratch);
  std::uint32_t expected = 0;
  for_each_tensor(params, [&](const std::string&, std::size_t, std::size_t, auto) { ++expected; });
  if (get_u32(in) != expected) throw std::runtime_error("checkpoint: unexpected tensor count");

  for_each_tensor(params, [&](const std::string& name, std::size_t rows, std::size_t cols, std::span<double> values) {
    const std::uint32_t len = get_u32(in);
    if (len > 1024) throw std::runtime_error("checkpoint: corrupt tensor name");
    std::string stored(len, '\0');
    if (!in.read(stored.data(), len)) throw std::runtime_error("checkpoint: truncated file");
    if (stored != name) throw std::runtime_error("checkpoint: expected tensor " + name + ", found " + stored);
    if (get_u64(in) != rows || get_u64(in) != cols)
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    for (auto& v : values) v = std::bit_cast<double>(get_u64(in));
  });
  return {h, std::move(params)};
}

void save_checkpoint(const std::string& path, const VaeParams& params, std::uint64_t epoch, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  write_checkpoint(out, params, epoch, seed);
}

std::pair<CheckpointHeader, VaeParams> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace ald
