#pragma once

// Data-parallel inner loops. Every kernel in `sage::kernels` is OpenMP
// parallel over independent rows and produces bit-identical output for any
// thread count; `sage::kernels::reference` holds the plain serial versions the
// tests and benchmarks compare against.

#include <cstddef>
#include <cstdint>
#include <span>

#include "sage/matrix.hpp"

namespace sage::kernels {

/// k nearest neighbors per query, ascending by (distance, index).
struct KnnResult {
  Matrix<std::uint32_t> indices;
  Matrix<double> distances;  // Euclidean
};

/// Neighbors of every row of `points` among the other rows (self excluded).
/// Requires k < points.rows().
KnnResult knn_self(const Matrix<float>& points, std::size_t k);

/// Neighbors of every row of `queries` among the rows of `reference`.
/// Requires k <= reference.rows().
KnnResult knn_query(const Matrix<float>& reference, const Matrix<float>& queries, std::size_t k);

/// out = in * weights + bias (weights is in_dim × out_dim).
void affine(const Matrix<double>& in, const Matrix<double>& weights, std::span<const double> bias,
            Matrix<double>& out);

/// grad_in = grad_out * weights^T.
void affine_backward_input(const Matrix<double>& grad_out, const Matrix<double>& weights,
                           Matrix<double>& grad_in);

/// grad_weights = in^T * grad_out, grad_bias = column sums of grad_out.
void affine_backward_params(const Matrix<double>& in, const Matrix<double>& grad_out,
                            Matrix<double>& grad_weights, std::span<double> grad_bias);

namespace reference {

KnnResult knn_self(const Matrix<float>& points, std::size_t k);
KnnResult knn_query(const Matrix<float>& reference, const Matrix<float>& queries, std::size_t k);
void affine(const Matrix<double>& in, const Matrix<double>& weights, std::span<const double> bias,
            Matrix<double>& out);
void affine_backward_input(const Matrix<double>& grad_out, const Matrix<double>& weights,
                           Matrix<double>& grad_in);
void affine_backward_params(const Matrix<double>& in, const Matrix<double>& grad_out,
                            Matrix<double>& grad_weights, std::span<double> grad_bias);

}  // namespace reference

}  // namespace sage::kernels
