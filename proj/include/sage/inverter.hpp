#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sage/manifold.hpp"

namespace sage {

enum class InverseKernel { inverse_distance, fuzzy };

std::string to_string(InverseKernel k);
InverseKernel inverse_kernel_from_string(const std::string& s);

inline constexpr double kAnchorDistance = 1e-12;

/// Maps low-dimensional points back to the high-dimensional space by
/// interpolating the embeddings of the k_inv nearest anchors (in anchor_coords).
/// A query closer than kAnchorDistance to its nearest anchor returns that
/// anchor's embedding verbatim.
EmbeddingMatrix inverse_transform(const Coords& anchor_coords, const EmbeddingMatrix& anchor_embeddings,
                                  const Coords& points, std::size_t k_inv,
                                  InverseKernel kernel = InverseKernel::inverse_distance);

EmbeddingMatrix inverse_transform(const manifold::ProjectionModel& model, const Coords& points,
                                  std::size_t k_inv,
                                  InverseKernel kernel = InverseKernel::inverse_distance);

struct FidelityReport {
  double mean_cosine = 0.0;
  double mean_mse = 0.0;
  std::vector<std::pair<double, double>> per_instance;  // (cosine, mse)
};

/// Cosine (0 when either norm < 1e-12) and mean squared error per row.
FidelityReport fidelity(const EmbeddingMatrix& original, const EmbeddingMatrix& reconstructed);

}  // namespace sage
