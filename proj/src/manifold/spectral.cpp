#include <Eigen/Dense>
#include <cmath>
#include <numeric>

#include "sage/log.hpp"
#include "sage/manifold.hpp"
#include "sage/rng.hpp"

namespace sage::manifold {

std::string to_string(InitMode mode) { return mode == InitMode::spectral ? "spectral" : "random"; }

InitMode init_mode_from_string(const std::string& s) {
  if (s == "spectral") return InitMode::spectral;
  if (s == "random") return InitMode::random;
  throw ValidationError("init", "unknown init mode '" + s + "'");
}

std::size_t connected_components(const FuzzyGraph& graph) {
  std::vector<std::size_t> parent(graph.n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  std::size_t components = graph.n;
  for (const auto& e : graph.edges) {
    const std::size_t a = find(e.i), b = find(e.j);
    if (a != b) {
      parent[std::max(a, b)] = std::min(a, b);
      --components;
    }
  }
  return components;
}

SpectralDecomposition normalized_laplacian_spectrum(const FuzzyGraph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.n);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : graph.edges) {
    w(e.i, e.j) = e.weight;
    w(e.j, e.i) = e.weight;
  }
  Eigen::VectorXd inv_sqrt_deg = w.rowwise().sum();
  for (Eigen::Index i = 0; i < n; ++i) {
    inv_sqrt_deg(i) = inv_sqrt_deg(i) > 0.0 ? 1.0 / std::sqrt(inv_sqrt_deg(i)) : 0.0;
  }
  Eigen::MatrixXd lap = -(inv_sqrt_deg.asDiagonal() * w * inv_sqrt_deg.asDiagonal());
  lap.diagonal().array() += 1.0;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success) throw DivergenceError("normalized Laplacian eigensolve failed");

  SpectralDecomposition out;
  out.eigenvalues.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + n);
  out.eigenvectors = Matrix<double>(graph.n, graph.n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      out.eigenvectors(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = solver.eigenvectors()(r, c);
    }
  }
  return out;
}

namespace {

Coords random_coords(std::size_t n, std::size_t m, std::uint64_t seed) {
  Coords out(n, m);
  Rng rng(derive_seed(seed, "init_random"));
  for (float& v : out.values()) v = static_cast<float>(rng.uniform(-10.0, 10.0));
  return out;
}

}  // namespace

Coords init_coords(const FuzzyGraph& graph, std::size_t m, InitMode mode, std::uint64_t seed,
                   bool* fell_back) {
  if (m == 0) throw ValidationError("target_dim", "must be >= 1");
  if (fell_back) *fell_back = false;
  const std::size_t n = graph.n;
  if (mode == InitMode::random) return random_coords(n, m, seed);

  const char* reason = nullptr;
  if (n > kMaxSpectralPoints) {
    reason = "graph exceeds the dense eigensolve limit";
  } else if (n < m + 1) {
    reason = "too few points for the requested dimension";
  } else if (connected_components(graph) > 1) {
    reason = "graph has more than one connected component";
  }
  if (reason) {
    log().warn("spectral init falling back to random: {}", reason);
    if (fell_back) *fell_back = true;
    return random_coords(n, m, seed);
  }

  const auto spectrum = normalized_laplacian_spectrum(graph);
  Matrix<double> picked(n, m);
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t arg = 0;
    for (std::size_t r = 1; r < n; ++r) {
      if (std::abs(spectrum.eigenvectors(r, c + 1)) > std::abs(spectrum.eigenvectors(arg, c + 1))) arg = r;
    }
    const double sign = spectrum.eigenvectors(arg, c + 1) < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < n; ++r) picked(r, c) = sign * spectrum.eigenvectors(r, c + 1);
  }
  double max_abs = 0.0;
  for (double v : picked.values()) max_abs = std::max(max_abs, std::abs(v));
  const double scale = max_abs > 0.0 ? 10.0 / max_abs : 1.0;
  Coords out(n, m);
  for (std::size_t i = 0; i < out.values().size(); ++i) {
    out.values()[i] = static_cast<float>(picked.values()[i] * scale);
  }
  return out;
}

}  // namespace sage::manifold
