#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sage/inverter.hpp"
#include "sage/manifold.hpp"
#include "sage/nets.hpp"

namespace sage {

struct Provenance {
  std::uint32_t seed_index = 0;      // hard point the row was generated from
  std::uint32_t neighbor_index = 0;  // interpolation partner
  double mix = 0.0;                  // weight of the partner, in [0, 1]
  std::vector<float> jitter;         // added offset, one entry per coordinate

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct SamplerParams {
  std::size_t per_seed = 1;
  std::size_t k_samp = 10;
  double jitter_scale = 0.1;
  std::uint64_t seed = 0;
  /// Pins every mix draw to this value; for tests of the interpolation endpoints.
  std::optional<double> forced_mix;
};

struct SampledPoints {
  Coords points;
  std::vector<Provenance> provenance;
};

/// For each hard index h, per_seed points (1 - mix) * y_h + mix * y_j + jitter,
/// with j uniform among h's k_samp nearest coords, mix ~ U[0, 1], and
/// isotropic Gaussian jitter of std jitter_scale * (distance to the k_samp-th
/// neighbor). Rows are grouped by hard index in the order given.
SampledPoints sample_near(const Coords& coords, std::span<const std::size_t> hard,
                          const SamplerParams& params);

struct SyntheticBatch {
  Coords low_points;
  EmbeddingMatrix high_vectors;
  Logits teacher_logits;
  std::vector<Provenance> provenance;

  std::size_t size() const noexcept { return high_vectors.rows(); }
};

/// Lifts sampled low-dimensional points through inverse_transform and labels
/// them with the teacher.
SyntheticBatch build_batch(const manifold::ProjectionModel& model, const NeuralNet& teacher,
                           SampledPoints sampled, std::size_t k_inv,
                           InverseKernel kernel = InverseKernel::inverse_distance);

/// Batch whose points already live in the teacher's input space (no projection).
SyntheticBatch build_batch_native(const NeuralNet& teacher, SampledPoints sampled);

/// Provenance sidecar: one JSON object per row.
std::string provenance_jsonl(const std::vector<Provenance>& provenance);
std::vector<Provenance> parse_provenance_jsonl(const std::string& text);

}  // namespace sage
