#include "sage/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace sage::kernels {

namespace {

using Candidate = std::pair<double, std::uint32_t>;  // (squared distance, index)

void check_k(std::size_t k, std::size_t available, const char* what) {
  if (k == 0 || k > available) {
    throw ValidationError("k", std::string(what) + ": k = " + std::to_string(k) +
                                   " must lie in [1, " + std::to_string(available) + "]");
  }
}

/// Smallest k candidates of one query, written in ascending order.
void select_row(const Matrix<float>& reference, std::span<const float> query, std::size_t skip,
                std::size_t k, std::vector<Candidate>& scratch, KnnResult& out, std::size_t row) {
  scratch.clear();
  for (std::size_t j = 0; j < reference.rows(); ++j) {
    if (j == skip) continue;
    scratch.emplace_back(squared_distance(query, reference.row(j)), static_cast<std::uint32_t>(j));
  }
  std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k), scratch.end());
  for (std::size_t t = 0; t < k; ++t) {
    out.indices(row, t) = scratch[t].second;
    out.distances(row, t) = std::sqrt(scratch[t].first);
  }
}

KnnResult knn_impl(const Matrix<float>& reference, const Matrix<float>& queries, std::size_t k,
                   bool self) {
  if (reference.cols() != queries.cols()) throw ShapeError("knn: dimension mismatch");
  const std::size_t n = queries.rows();
  KnnResult out{Matrix<std::uint32_t>(n, k), Matrix<double>(n, k)};
  const auto none = reference.rows();
#pragma omp parallel
  {
    std::vector<Candidate> scratch;
    scratch.reserve(reference.rows());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const auto r = static_cast<std::size_t>(i);
      select_row(reference, queries.row(r), self ? r : none, k, scratch, out, r);
    }
  }
  return out;
}

}  // namespace

KnnResult knn_self(const Matrix<float>& points, std::size_t k) {
  check_k(k, points.rows() == 0 ? 0 : points.rows() - 1, "knn_self");
  return knn_impl(points, points, k, true);
}

KnnResult knn_query(const Matrix<float>& reference, const Matrix<float>& queries, std::size_t k) {
  check_k(k, reference.rows(), "knn_query");
  return knn_impl(reference, queries, k, false);
}

void affine(const Matrix<double>& in, const Matrix<double>& weights, std::span<const double> bias,
            Matrix<double>& out) {
  const std::size_t n = in.rows(), din = weights.rows(), dout = weights.cols();
  out = Matrix<double>(n, dout);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto r = static_cast<std::size_t>(i);
    double* o = out.row(r).data();
    std::copy(bias.begin(), bias.end(), o);
    const double* x = in.row(r).data();
    for (std::size_t k = 0; k < din; ++k) {
      const double a = x[k];
      const double* w = weights.row(k).data();
      for (std::size_t j = 0; j < dout; ++j) o[j] += a * w[j];
    }
  }
}

void affine_backward_input(const Matrix<double>& grad_out, const Matrix<double>& weights,
                           Matrix<double>& grad_in) {
  const std::size_t n = grad_out.rows(), din = weights.rows(), dout = weights.cols();
  grad_in = Matrix<double>(n, din);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto r = static_cast<std::size_t>(i);
    const double* g = grad_out.row(r).data();
    double* o = grad_in.row(r).data();
    for (std::size_t k = 0; k < din; ++k) {
      const double* w = weights.row(k).data();
      double acc = 0.0;
      for (std::size_t j = 0; j < dout; ++j) acc += g[j] * w[j];
      o[k] = acc;
    }
  }
}

void affine_backward_params(const Matrix<double>& in, const Matrix<double>& grad_out,
                            Matrix<double>& grad_weights, std::span<double> grad_bias) {
  const std::size_t n = in.rows(), din = in.cols(), dout = grad_out.cols();
  grad_weights = Matrix<double>(din, dout);
  // Each weight row sums over the batch in row order regardless of schedule.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t kk = 0; kk < static_cast<std::ptrdiff_t>(din); ++kk) {
    const auto k = static_cast<std::size_t>(kk);
    double* gw = grad_weights.row(k).data();
    for (std::size_t r = 0; r < n; ++r) {
      const double a = in(r, k);
      const double* g = grad_out.row(r).data();
      for (std::size_t j = 0; j < dout; ++j) gw[j] += a * g[j];
    }
  }
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double* g = grad_out.row(r).data();
    for (std::size_t j = 0; j < dout; ++j) grad_bias[j] += g[j];
  }
}

namespace reference {

namespace {

KnnResult knn_full_sort(const Matrix<float>& reference, const Matrix<float>& queries,
                        std::size_t k, bool self) {
  if (reference.cols() != queries.cols()) throw ShapeError("knn: dimension mismatch");
  KnnResult out{Matrix<std::uint32_t>(queries.rows(), k), Matrix<double>(queries.rows(), k)};
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    std::vector<Candidate> all;
    for (std::size_t j = 0; j < reference.rows(); ++j) {
      if (self && i == j) continue;
      all.emplace_back(squared_distance(queries.row(i), reference.row(j)),
                       static_cast<std::uint32_t>(j));
    }
    std::sort(all.begin(), all.end());
    for (std::size_t t = 0; t < k; ++t) {
      out.indices(i, t) = all[t].second;
      out.distances(i, t) = std::sqrt(all[t].first);
    }
  }
  return out;
}

}  // namespace

KnnResult knn_self(const Matrix<float>& points, std::size_t k) {
  check_k(k, points.rows() == 0 ? 0 : points.rows() - 1, "knn_self");
  return knn_full_sort(points, points, k, true);
}

KnnResult knn_query(const Matrix<float>& reference, const Matrix<float>& queries, std::size_t k) {
  check_k(k, reference.rows(), "knn_query");
  return knn_full_sort(reference, queries, k, false);
}

void affine(const Matrix<double>& in, const Matrix<double>& weights, std::span<const double> bias,
            Matrix<double>& out) {
  out = Matrix<double>(in.rows(), weights.cols());
  for (std::size_t r = 0; r < in.rows(); ++r) {
    for (std::size_t j = 0; j < weights.cols(); ++j) {
      double acc = bias[j];
      for (std::size_t k = 0; k < weights.rows(); ++k) acc += in(r, k) * weights(k, j);
      out(r, j) = acc;
    }
  }
}

void affine_backward_input(const Matrix<double>& grad_out, const Matrix<double>& weights,
                           Matrix<double>& grad_in) {
  grad_in = Matrix<double>(grad_out.rows(), weights.rows());
  for (std::size_t r = 0; r < grad_out.rows(); ++r) {
    for (std::size_t k = 0; k < weights.rows(); ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < weights.cols(); ++j) acc += grad_out(r, j) * weights(k, j);
      grad_in(r, k) = acc;
    }
  }
}

void affine_backward_params(const Matrix<double>& in, const Matrix<double>& grad_out,
                            Matrix<double>& grad_weights, std::span<double> grad_bias) {
  grad_weights = Matrix<double>(in.cols(), grad_out.cols());
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    for (std::size_t k = 0; k < in.cols(); ++k) {
      for (std::size_t j = 0; j < grad_out.cols(); ++j) grad_weights(k, j) += in(r, k) * grad_out(r, j);
    }
    for (std::size_t j = 0; j < grad_out.cols(); ++j) grad_bias[j] += grad_out(r, j);
  }
}

}  // namespace reference

}  // namespace sage::kernels
