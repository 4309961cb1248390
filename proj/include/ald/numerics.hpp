#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace ald {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  Matrix transposed() const;
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
double trace(const Matrix& m);
double frobenius_norm(const Matrix& m);

// Selects rows by index, in the given order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);

// xoshiro256** seeded through splitmix64. The generator is the single source of
// randomness for the whole project, so a seed plus call sequence fixes every result.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n), unbiased. n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();

  // Independent child stream; does not advance this generator.
  Rng derive(std::uint64_t stream) const;

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::vector<double> standard_normal(Rng& rng, std::size_t n);

// Slope of the degree-1 least-squares fit through (j, ys[j]), j = 0..len-1.
double least_squares_slope(std::span<const double> ys);

// Symmetric eigendecomposition by cyclic Jacobi rotations.
// Returns eigenvalues (ascending) and eigenvectors stored as columns.
std::pair<std::vector<double>, Matrix> symmetric_eigen(const Matrix& m);

// Principal square root of a symmetric PSD matrix; negative eigenvalues clamp to 0.
Matrix psd_sqrt(const Matrix& m, double symmetry_tol = 1e-8);

struct MeanCov {
  std::vector<double> mean;
  Matrix cov;
};

// Column means and unbiased (n-1) covariance of the rows.
MeanCov mean_and_covariance(const Matrix& samples);

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h.
std::vector<double> finite_difference_gradient(const ScalarFn& f, std::span<const double> params,
                                               double h);

}  // namespace ald
