#include <algorithm>
#include <cmath>
#include <tuple>

#include "sage/kernels.hpp"
#include "sage/manifold.hpp"

namespace sage::manifold {

void NeighborGraph::validate() const {
  if (indices.rows() != distances.rows() || indices.cols() != k || distances.cols() != k) {
    throw ShapeError("neighbor graph arrays disagree with k");
  }
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const auto j = indices(i, t);
      if (j >= n || j == i) throw ValidationError("indices", "row " + std::to_string(i) + " has an invalid neighbor");
      if (!(distances(i, t) >= 0.0)) throw ValidationError("distances", "negative or NaN distance");
      if (t > 0 && distances(i, t) < distances(i, t - 1)) {
        throw ValidationError("distances", "row " + std::to_string(i) + " not ascending");
      }
    }
  }
}

NeighborGraph knn_graph(const EmbeddingMatrix& x, std::size_t k, Metric /*metric*/) {
  if (k == 0 || k >= x.rows()) {
    throw ValidationError("k", "must satisfy 1 <= k < n (k = " + std::to_string(k) +
                                   ", n = " + std::to_string(x.rows()) + ")");
  }
  auto knn = kernels::knn_self(x, k);
  return NeighborGraph{k, std::move(knn.indices), std::move(knn.distances)};
}

namespace {

double membership_sum(std::span<const double> distances, double rho, double sigma) {
  double sum = 0.0;
  for (double d : distances) sum += std::exp(-std::max(0.0, d - rho) / sigma);
  return sum;
}

}  // namespace

double solve_sigma(std::span<const double> distances, double rho, double target) {
  double lo = kSigmaLower, hi = kSigmaUpper;
  const double at_lo = membership_sum(distances, rho, lo);
  if (at_lo >= target - kSmoothKnnTolerance) return lo;
  const double at_hi = membership_sum(distances, rho, hi);
  if (at_hi <= target + kSmoothKnnTolerance) return hi;
  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < kSmoothKnnMaxIter; ++iter) {
    mid = 0.5 * (lo + hi);
    const double sum = membership_sum(distances, rho, mid);
    if (std::abs(sum - target) < kSmoothKnnTolerance) break;
    if (sum > target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return mid;
}

RhoSigma smooth_knn(const NeighborGraph& graph) {
  const std::size_t n = graph.size();
  RhoSigma rs{std::vector<double>(n), std::vector<double>(n)};
  const double target = std::log2(static_cast<double>(graph.k));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    auto row = graph.distances.row(i);
    rs.rho[i] = row[0];
    rs.sigma[i] = solve_sigma(row, rs.rho[i], target);
  }
  return rs;
}

void FuzzyGraph::validate() const {
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& edge = edges[e];
    if (edge.i >= edge.j || edge.j >= n) throw ValidationError("edges", "edge " + std::to_string(e) + " is not i < j < n");
    if (!(edge.weight > 0.0f && edge.weight <= 1.0f)) {
      throw ValidationError("edges", "edge " + std::to_string(e) + " weight outside (0, 1]");
    }
    if (e > 0 && std::tie(edges[e - 1].i, edges[e - 1].j) >= std::tie(edge.i, edge.j)) {
      throw ValidationError("edges", "edges not strictly sorted by (i, j)");
    }
  }
}

FuzzyGraph fuzzy_union(const NeighborGraph& graph, const RhoSigma& rs) {
  const std::size_t n = graph.size();
  if (rs.rho.size() != n || rs.sigma.size() != n) throw ShapeError("rho/sigma length does not match graph");

  struct Directed {
    std::uint32_t lo, hi;
    bool forward;  // true when the source row is `lo`
    double w;
  };
  std::vector<Directed> directed;
  directed.reserve(n * graph.k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < graph.k; ++t) {
      const std::uint32_t j = graph.indices(i, t);
      const double w = std::exp(-std::max(0.0, graph.distances(i, t) - rs.rho[i]) / rs.sigma[i]);
      const auto src = static_cast<std::uint32_t>(i);
      directed.push_back({std::min(src, j), std::max(src, j), src < j, w});
    }
  }
  std::sort(directed.begin(), directed.end(), [](const Directed& a, const Directed& b) {
    return std::tie(a.lo, a.hi, a.forward) < std::tie(b.lo, b.hi, b.forward);
  });

  FuzzyGraph out;
  out.n = n;
  for (std::size_t p = 0; p < directed.size();) {
    double w_fwd = 0.0, w_bwd = 0.0;
    std::size_t q = p;
    for (; q < directed.size() && directed[q].lo == directed[p].lo && directed[q].hi == directed[p].hi; ++q) {
      (directed[q].forward ? w_fwd : w_bwd) = directed[q].w;
    }
    const double w = fuzzy_union_weight(w_fwd, w_bwd);
    if (w >= kMinEdgeWeight) out.edges.push_back({directed[p].lo, directed[p].hi, static_cast<float>(std::min(1.0, w))});
    p = q;
  }
  return out;
}

}  // namespace sage::manifold
