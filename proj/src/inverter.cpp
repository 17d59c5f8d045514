#include "sage/inverter.hpp"

#include <algorithm>
#include <cmath>

#include "sage/kernels.hpp"

namespace sage {

std::string to_string(InverseKernel k) {
  return k == InverseKernel::inverse_distance ? "inverse_distance" : "fuzzy";
}

InverseKernel inverse_kernel_from_string(const std::string& s) {
  if (s == "inverse_distance") return InverseKernel::inverse_distance;
  if (s == "fuzzy") return InverseKernel::fuzzy;
  throw ValidationError("kernel", "unknown inverse kernel '" + s + "'");
}

EmbeddingMatrix inverse_transform(const Coords& anchor_coords, const EmbeddingMatrix& anchor_embeddings,
                                  const Coords& points, std::size_t k_inv, InverseKernel kernel) {
  if (anchor_coords.rows() != anchor_embeddings.rows()) throw ShapeError("anchor coords and embeddings differ in rows");
  if (points.rows() > 0 && points.cols() != anchor_coords.cols()) {
    throw ShapeError("query dimension " + std::to_string(points.cols()) + " does not match model dimension " +
                     std::to_string(anchor_coords.cols()));
  }
  if (k_inv == 0 || k_inv > anchor_coords.rows()) {
    throw ValidationError("k_inv", "must lie in [1, " + std::to_string(anchor_coords.rows()) + "]");
  }
  const std::size_t d = anchor_embeddings.cols();
  EmbeddingMatrix out(points.rows(), d);
  if (points.rows() == 0) return out;

  const auto knn = kernels::knn_query(anchor_coords, points, k_inv);
  const double target = std::log2(static_cast<double>(k_inv));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t qq = 0; qq < static_cast<std::ptrdiff_t>(points.rows()); ++qq) {
    const auto q = static_cast<std::size_t>(qq);
    auto dist = knn.distances.row(q);
    auto nbrs = knn.indices.row(q);
    auto dst = out.row(q);
    if (dist[0] < kAnchorDistance) {
      auto src = anchor_embeddings.row(nbrs[0]);
      std::copy(src.begin(), src.end(), dst.begin());
      continue;
    }
    std::vector<double> w(k_inv);
    if (kernel == InverseKernel::inverse_distance) {
      for (std::size_t t = 0; t < k_inv; ++t) w[t] = 1.0 / dist[t];
    } else {
      const double sigma = manifold::solve_sigma(dist, dist[0], target);
      for (std::size_t t = 0; t < k_inv; ++t) w[t] = std::exp(-std::max(0.0, dist[t] - dist[0]) / sigma);
    }
    double wsum = 0.0;
    for (double v : w) wsum += v;
    std::vector<double> acc(d, 0.0);
    for (std::size_t t = 0; t < k_inv; ++t) {
      auto src = anchor_embeddings.row(nbrs[t]);
      const double wt = w[t] / wsum;
      for (std::size_t c = 0; c < d; ++c) acc[c] += wt * src[c];
    }
    for (std::size_t c = 0; c < d; ++c) dst[c] = static_cast<float>(acc[c]);
  }
  return out;
}

EmbeddingMatrix inverse_transform(const manifold::ProjectionModel& model, const Coords& points,
                                  std::size_t k_inv, InverseKernel kernel) {
  return inverse_transform(model.coords, model.train_embeddings, points, k_inv, kernel);
}

FidelityReport fidelity(const EmbeddingMatrix& original, const EmbeddingMatrix& reconstructed) {
  if (original.rows() != reconstructed.rows() || original.cols() != reconstructed.cols()) {
    throw ShapeError("fidelity: shapes differ");
  }
  FidelityReport report;
  const std::size_t n = original.rows();
  report.per_instance.resize(n);
  double cos_sum = 0.0, mse_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto x = original.row(i);
    auto y = reconstructed.row(i);
    double dot = 0.0, nx = 0.0, ny = 0.0, se = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
      const double a = x[c], b = y[c];
      dot += a * b;
      nx += a * a;
      ny += b * b;
      se += (a - b) * (a - b);
    }
    nx = std::sqrt(nx);
    ny = std::sqrt(ny);
    double cosine = 0.0;
    if (nx >= 1e-12 && ny >= 1e-12) {
      cosine = x.size() > 0 && std::equal(x.begin(), x.end(), y.begin()) ? 1.0 : std::clamp(dot / (nx * ny), -1.0, 1.0);
    }
    const double mse = x.empty() ? 0.0 : se / static_cast<double>(x.size());
    report.per_instance[i] = {cosine, mse};
    cos_sum += cosine;
    mse_sum += mse;
  }
  if (n > 0) {
    report.mean_cosine = cos_sum / static_cast<double>(n);
    report.mean_mse = mse_sum / static_cast<double>(n);
  }
  return report;
}

}  // namespace sage
