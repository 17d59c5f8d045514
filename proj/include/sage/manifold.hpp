#pragma once

// UMAP-style neighbor embedding: exact kNN graph, smooth-kNN calibration,
// fuzzy union, (a, b) curve fit, spectral/random initialization, and the
// negative-sampling layout optimizer, plus out-of-sample transform.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sage/matrix.hpp"

namespace sage::manifold {

enum class Metric { euclidean };

struct NeighborGraph {
  std::size_t k = 0;
  Matrix<std::uint32_t> indices;  // n × k
  Matrix<double> distances;       // n × k, ascending per row

  std::size_t size() const noexcept { return indices.rows(); }
  void validate() const;
};

/// Exact brute-force kNN; ties broken by ascending index. Requires 1 <= k < n.
NeighborGraph knn_graph(const EmbeddingMatrix& x, std::size_t k, Metric metric = Metric::euclidean);

inline constexpr double kSigmaLower = 1e-8;
inline constexpr double kSigmaUpper = 1e4;
inline constexpr double kSmoothKnnTolerance = 1e-5;
inline constexpr int kSmoothKnnMaxIter = 64;

struct RhoSigma {
  std::vector<double> rho;
  std::vector<double> sigma;
};

/// Bandwidth sigma solving sum_j exp(-max(0, d_j - rho) / sigma) = target by
/// bisection on [kSigmaLower, kSigmaUpper]. Unreachable targets return the
/// nearer bracket bound.
double solve_sigma(std::span<const double> distances, double rho, double target);

/// Per-row rho (nearest distance) and sigma with target log2(k).
RhoSigma smooth_knn(const NeighborGraph& graph);

struct FuzzyEdge {
  std::uint32_t i = 0;  // i < j
  std::uint32_t j = 0;
  float weight = 0.0f;  // (0, 1]

  friend bool operator==(const FuzzyEdge&, const FuzzyEdge&) = default;
};

/// Symmetric membership graph, one edge per unordered pair, sorted by (i, j).
struct FuzzyGraph {
  std::size_t n = 0;
  std::vector<FuzzyEdge> edges;

  void validate() const;
  friend bool operator==(const FuzzyGraph&, const FuzzyGraph&) = default;
};

/// Probabilistic t-conorm a + b - ab.
constexpr double fuzzy_union_weight(double w_ij, double w_ji) noexcept {
  return w_ij + w_ji - w_ij * w_ji;
}

inline constexpr double kMinEdgeWeight = 1e-8;

FuzzyGraph fuzzy_union(const NeighborGraph& graph, const RhoSigma& rs);

/// Least-squares (a, b) of 1 / (1 + a x^(2b)) against the min_dist/spread
/// target curve on 300 points in (0, 3 * spread].
std::pair<double, double> fit_ab(double min_dist, double spread);

enum class InitMode { spectral, random };

std::string to_string(InitMode mode);
InitMode init_mode_from_string(const std::string& s);

inline constexpr std::size_t kMaxSpectralPoints = 5000;

/// Eigen-decomposition of the symmetric normalized Laplacian I - D^-1/2 W D^-1/2,
/// eigenvalues ascending, eigenvectors as columns.
struct SpectralDecomposition {
  std::vector<double> eigenvalues;
  Matrix<double> eigenvectors;
};
SpectralDecomposition normalized_laplacian_spectrum(const FuzzyGraph& graph);

std::size_t connected_components(const FuzzyGraph& graph);

/// Spectral: eigenvectors 2..m+1 scaled to max-abs 10, each signed so its
/// largest-magnitude entry is positive. Falls back to random (logging a
/// warning and setting *fell_back) when the graph is disconnected, larger
/// than kMaxSpectralPoints, or has fewer than m + 1 nodes.
/// Random: uniform in [-10, 10].
Coords init_coords(const FuzzyGraph& graph, std::size_t m, InitMode mode, std::uint64_t seed,
                   bool* fell_back = nullptr);

struct ProjectionParams {
  /// Neighbors per point; fit() clamps it to n - 1.
  std::size_t n_neighbors = 100;
  std::size_t target_dim = 2;
  double min_dist = 0.1;
  double spread = 1.0;
  /// Curve parameters; non-positive means "fit from min_dist/spread".
  double a = 0.0;
  double b = 0.0;
  std::size_t epochs = 200;
  std::size_t neg_sample_rate = 5;
  InitMode init = InitMode::spectral;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const ProjectionParams&, const ProjectionParams&) = default;
};

inline constexpr double kRepulsionStabilizer = 0.001;
inline constexpr double kLayoutClamp = 4.0;

/// Coefficient c of the attractive step c * (y_i - y_j) for squared distance
/// d2: -2ab d2^(b-1) / (1 + a d2^b); zero at d2 = 0.
double attractive_coefficient(double d2, double a, double b) noexcept;

/// Coefficient of the repulsive step: 2b / ((0.001 + d2)(1 + a d2^b)).
double repulsive_coefficient(double d2, double a, double b) noexcept;

/// Stochastic layout: edges sampled on the standard epochs-per-sample
/// schedule, neg_sample_rate negatives per sampled edge, per-coordinate steps
/// clamped to [-4, 4], learning rate decaying linearly from 1 to 0.
/// Uses params.a/params.b as given.
Coords optimize_layout(const FuzzyGraph& graph, Coords coords, const ProjectionParams& params);

struct ProjectionModel {
  EmbeddingMatrix train_embeddings;
  Coords coords;
  FuzzyGraph graph;
  /// Resolved params: n_neighbors clamped, a/b fitted.
  ProjectionParams params;
  bool spectral_fell_back = false;

  std::size_t size() const noexcept { return coords.rows(); }
  std::size_t input_dim() const noexcept { return train_embeddings.cols(); }
  std::size_t target_dim() const noexcept { return coords.cols(); }

  friend bool operator==(const ProjectionModel&, const ProjectionModel&) = default;
};

ProjectionModel fit(const EmbeddingMatrix& x, ProjectionParams params);

/// Out-of-sample placement. Each new point starts at the membership-weighted
/// mean of its k nearest training coords (exactly the nearest coord when that
/// distance is zero) and is refined for `refine_epochs` passes (default
/// epochs / 3) against fixed training coords.
Coords transform(const ProjectionModel& model, const EmbeddingMatrix& x_new,
                 std::optional<std::size_t> refine_epochs = std::nullopt);

// Checkpoint: one JSON header line (params, n, d, m, num_edges,
// format_version), '\n', then float32 LE train embeddings, float32 LE coords,
// and num_edges × (u32 i, u32 j, f32 w).
std::vector<std::byte> encode_model(const ProjectionModel& model);
ProjectionModel decode_model(std::span<const std::byte> bytes);
void save_model(const ProjectionModel& model, const std::string& path);
ProjectionModel load_model(const std::string& path);

}  // namespace sage::manifold
