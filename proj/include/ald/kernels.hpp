#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ald/numerics.hpp"

// Hot loops of training and evaluation. Every kernel has a plain serial
// reference and an OpenMP version. Both accumulate each output element in the
// same order, so their results are bit-identical regardless of thread count.
namespace ald::kernels {

namespace serial {

// out = x * w^T + bias   (x: n x in, w: out x in)
void linear_forward(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out);
// dw = delta^T * x       (delta: n x out)
void linear_grad_weight(const Matrix& delta, const Matrix& x, Matrix& dw);
// dx = delta * w
void linear_grad_input(const Matrix& delta, const Matrix& w, Matrix& dx);
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
// Euclidean distance between every pair of rows.
void pairwise_distances(const Matrix& points, Matrix& out);
// Index of the nearest centroid for each row and the squared distance to it.
void assign_nearest(const Matrix& points, const Matrix& centroids, std::vector<int>& labels,
                    std::vector<double>& dist2);

}  // namespace serial

namespace parallel {

void linear_forward(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out);
void linear_grad_weight(const Matrix& delta, const Matrix& x, Matrix& dw);
void linear_grad_input(const Matrix& delta, const Matrix& w, Matrix& dx);
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
void pairwise_distances(const Matrix& points, Matrix& out);
void assign_nearest(const Matrix& points, const Matrix& centroids, std::vector<int>& labels,
                    std::vector<double>& dist2);

}  // namespace parallel

using parallel::assign_nearest;
using parallel::linear_forward;
using parallel::linear_grad_input;
using parallel::linear_grad_weight;
using parallel::matmul;
using parallel::pairwise_distances;

}  // namespace ald::kernels
