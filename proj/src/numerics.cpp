#include "ald/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ald/kernels.hpp"

namespace ald {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("Matrix: data length does not match rows x cols");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  Matrix out;
  kernels::matmul(a, b, out);
  return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("matrix sum: shape mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += b.values()[i];
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("matrix difference: shape mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] -= b.values()[i];
  return out;
}

double trace(const Matrix& m) {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(m.rows(), m.cols()); ++i) t += m(i, i);
  return t;
}

double frobenius_norm(const Matrix& m) {
  double acc = 0.0;
  for (double v : m.values()) acc += v * v;
  return std::sqrt(acc);
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), m.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= m.rows()) throw std::out_of_range("gather_rows: index out of range");
    std::copy_n(m.row(indices[i]).begin(), m.cols(), out.row(i).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % n);
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 is shifted away from zero so the log stays finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Rng Rng::derive(std::uint64_t stream) const {
  std::uint64_t x = seed_ ^ (0xd1b54a32d192ed03ULL * (stream + 1));
  return Rng(splitmix64(x));
}

std::vector<double> standard_normal(Rng& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("standard_normal: n must be at least 1");
  std::vector<double> out(n);
  for (auto& v : out) v = rng.normal();
  return out;
}

// ---------------------------------------------------------------------------

double least_squares_slope(std::span<const double> ys) {
  if (ys.size() < 2) throw std::invalid_argument("insufficient points for slope");
  const std::size_t n = ys.size();
  const double x_mean = (static_cast<double>(n) - 1.0) / 2.0;
  // x offsets are symmetric around the mean, so pairing j with n-1-j gives
  // sum dx*(y - y_mean) without ever forming y_mean: a constant shift of y
  // cancels inside each difference.
  double sxy = 0.0;
  for (std::size_t j = 0; j < n / 2; ++j) {
    const double dx = static_cast<double>(j) - x_mean;
    sxy += dx * (ys[j] - ys[n - 1 - j]);
  }
  double sxx = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double dx = static_cast<double>(j) - x_mean;
    sxx += dx * dx;
  }
  return sxy / sxx;
}

std::pair<std::vector<double>, Matrix> symmetric_eigen(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("symmetric_eigen: matrix is not square");
  const std::size_t n = m.rows();
  Matrix a = m;
  Matrix v = Matrix::identity(n);

  double scale = 0.0;
  for (double x : a.values()) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return {std::vector<double>(n, 0.0), v};

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-15 * scale) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  std::vector<double> values(n);
  Matrix vectors(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) vectors(r, c) = v(r, order[c]);
  }
  return {std::move(values), std::move(vectors)};
}

Matrix psd_sqrt(const Matrix& m, double symmetry_tol) {
  if (m.rows() != m.cols()) throw std::invalid_argument("psd_sqrt: matrix is not square");
  const std::size_t n = m.rows();
  double scale = 1.0;
  for (double x : m.values()) scale = std::max(scale, std::abs(x));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > symmetry_tol * scale)
        throw std::invalid_argument("psd_sqrt: matrix is not symmetric");

  auto [values, vectors] = symmetric_eigen(m);
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double root = std::sqrt(std::max(values[k], 0.0));
    if (root == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double vik = vectors(i, k) * root;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * vectors(j, k);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (out(i, j) + out(j, i));
      out(i, j) = avg;
      out(j, i) = avg;
    }
  return out;
}

MeanCov mean_and_covariance(const Matrix& samples) {
  if (samples.rows() < 2) throw std::invalid_argument("mean_and_covariance: need at least 2 rows");
  const std::size_t n = samples.rows();
  const std::size_t d = samples.cols();
  MeanCov out{std::vector<double>(d, 0.0), Matrix(d, d)};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out.mean[c] += samples(r, c);
  for (auto& m : out.mean) m /= static_cast<double>(n);

  Matrix centered(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) centered(r, c) = samples(r, c) - out.mean[c];
  // Upper triangle only, mirrored, so the result is exactly symmetric.
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += centered(r, i) * centered(r, j);
      out.cov(i, j) = acc / denom;
      out.cov(j, i) = acc / denom;
    }
  }
  return out;
}

std::vector<double> finite_difference_gradient(const ScalarFn& f, std::span<const double> params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: h must be positive");
  std::vector<double> p(params.begin(), params.end());
  std::vector<double> grad(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double up = f(p);
    p[i] = orig - h;
    const double down = f(p);
    p[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace ald
