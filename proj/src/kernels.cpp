#include "ald/kernels.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ald::kernels {

namespace {

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_forward(const Matrix& x, const Matrix& w, std::span<const double> bias) {
  check(x.cols() == w.cols(), "linear_forward: input width does not match weight");
  check(bias.size() == w.rows(), "linear_forward: bias length does not match weight");
}

void resize(Matrix& m, std::size_t rows, std::size_t cols) {
  if (m.rows() != rows || m.cols() != cols) m = Matrix(rows, cols);
}

}  // namespace

namespace serial {

void linear_forward(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out) {
  check_forward(x, w, bias);
  resize(out, x.rows(), w.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t o = 0; o < w.rows(); ++o) {
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols(); ++k) acc += x(i, k) * w(o, k);
      out(i, o) = acc + bias[o];
    }
  }
}

void linear_grad_weight(const Matrix& delta, const Matrix& x, Matrix& dw) {
  check(delta.rows() == x.rows(), "linear_grad_weight: batch mismatch");
  resize(dw, delta.cols(), x.cols());
  for (std::size_t o = 0; o < delta.cols(); ++o) {
    for (std::size_t k = 0; k < x.cols(); ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x.rows(); ++i) acc += delta(i, o) * x(i, k);
      dw(o, k) = acc;
    }
  }
}

void linear_grad_input(const Matrix& delta, const Matrix& w, Matrix& dx) {
  check(delta.cols() == w.rows(), "linear_grad_input: width mismatch");
  resize(dx, delta.rows(), w.cols());
  for (std::size_t i = 0; i < delta.rows(); ++i) {
    for (std::size_t k = 0; k < w.cols(); ++k) {
      double acc = 0.0;
      for (std::size_t o = 0; o < w.rows(); ++o) acc += delta(i, o) * w(o, k);
      dx(i, k) = acc;
    }
  }
}

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  check(a.cols() == b.rows(), "matmul: inner dimensions differ");
  resize(out, a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
}

void pairwise_distances(const Matrix& points, Matrix& out) {
  const std::size_t n = points.rows();
  resize(out, n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < points.cols(); ++k) {
        const double diff = points(i, k) - points(j, k);
        acc += diff * diff;
      }
      out(i, j) = std::sqrt(acc);
    }
  }
}

void assign_nearest(const Matrix& points, const Matrix& centroids, std::vector<int>& labels,
                    std::vector<double>& dist2) {
  check(points.cols() == centroids.cols(), "assign_nearest: width mismatch");
  labels.assign(points.rows(), 0);
  dist2.assign(points.rows(), 0.0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < points.cols(); ++k) {
        const double diff = points(i, k) - centroids(c, k);
        acc += diff * diff;
      }
      if (acc < best) {
        best = acc;
        best_c = static_cast<int>(c);
      }
    }
    labels[i] = best_c;
    dist2[i] = best;
  }
}

}  // namespace serial

namespace parallel {

void linear_forward(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out) {
  check_forward(x, w, bias);
  resize(out, x.rows(), w.rows());
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  const std::size_t in = x.cols();
  const std::size_t width = w.rows();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double* xr = x.data() + i * in;
    double* yr = out.data() + i * width;
    for (std::size_t o = 0; o < width; ++o) {
      const double* wr = w.data() + o * in;
      double acc = 0.0;
      for (std::size_t k = 0; k < in; ++k) acc += xr[k] * wr[k];
      yr[o] = acc + bias[o];
    }
  }
}

void linear_grad_weight(const Matrix& delta, const Matrix& x, Matrix& dw) {
  check(delta.rows() == x.rows(), "linear_grad_weight: batch mismatch");
  resize(dw, delta.cols(), x.cols());
  const auto outs = static_cast<std::ptrdiff_t>(delta.cols());
  const std::size_t n = x.rows();
  const std::size_t in = x.cols();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < outs; ++o) {
    double* dr = dw.data() + o * in;
    for (std::size_t k = 0; k < in; ++k) dr[k] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = delta(i, static_cast<std::size_t>(o));
      const double* xr = x.data() + i * in;
      for (std::size_t k = 0; k < in; ++k) dr[k] += d * xr[k];
    }
  }
}

void linear_grad_input(const Matrix& delta, const Matrix& w, Matrix& dx) {
  check(delta.cols() == w.rows(), "linear_grad_input: width mismatch");
  resize(dx, delta.rows(), w.cols());
  const auto n = static_cast<std::ptrdiff_t>(delta.rows());
  const std::size_t outs = w.rows();
  const std::size_t in = w.cols();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double* xr = dx.data() + i * in;
    for (std::size_t k = 0; k < in; ++k) xr[k] = 0.0;
    for (std::size_t o = 0; o < outs; ++o) {
      const double d = delta(static_cast<std::size_t>(i), o);
      const double* wr = w.data() + o * in;
      for (std::size_t k = 0; k < in; ++k) xr[k] += d * wr[k];
    }
  }
}

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  check(a.cols() == b.rows(), "matmul: inner dimensions differ");
  resize(out, a.rows(), b.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
  const std::size_t inner = a.cols();
  const std::size_t m = b.cols();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double* orow = out.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) orow[j] = 0.0;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = a(static_cast<std::size_t>(i), k);
      const double* brow = b.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
    }
  }
}

void pairwise_distances(const Matrix& points, Matrix& out) {
  const auto n = static_cast<std::ptrdiff_t>(points.rows());
  const std::size_t dim = points.cols();
  resize(out, points.rows(), points.rows());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double* pi = points.data() + i * dim;
    for (std::ptrdiff_t j = 0; j < n; ++j) {
      const double* pj = points.data() + j * dim;
      double acc = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = pi[k] - pj[k];
        acc += diff * diff;
      }
      out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = std::sqrt(acc);
    }
  }
}

void assign_nearest(const Matrix& points, const Matrix& centroids, std::vector<int>& labels,
                    std::vector<double>& dist2) {
  check(points.cols() == centroids.cols(), "assign_nearest: width mismatch");
  labels.assign(points.rows(), 0);
  dist2.assign(points.rows(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(points.rows());
  const std::size_t dim = points.cols();
  const std::size_t k = centroids.rows();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double* p = points.data() + i * dim;
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double* q = centroids.data() + c * dim;
      double acc = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double diff = p[j] - q[j];
        acc += diff * diff;
      }
      if (acc < best) {
        best = acc;
        best_c = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = best_c;
    dist2[static_cast<std::size_t>(i)] = best;
  }
}

}  // namespace parallel

}  // namespace ald::kernels
