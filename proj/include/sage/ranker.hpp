#pragma once

#include <cstddef>
#include <vector>

#include "sage/nets.hpp"

namespace sage {

/// Per-instance losses and their descending rank order (ties by ascending index).
struct LossProfile {
  std::vector<double> losses;
  std::vector<std::size_t> order;

  std::size_t size() const noexcept { return losses.size(); }
  /// rank[i] = position of row i in `order`.
  std::vector<std::size_t> ranks() const;
  void validate() const;
};

/// Builds the rank order for precomputed losses.
LossProfile make_profile(std::vector<double> losses);

/// distill_loss of the student against the teacher on every row of `data`.
LossProfile profile_losses(const NeuralNet& student, const NeuralNet& teacher,
                           const EmbeddingMatrix& data, const TrainConfig& cfg);

/// The first ceil(fraction * n) entries of profile.order, in rank order.
std::vector<std::size_t> hard_set(const LossProfile& profile, double fraction);

/// Number of rows hard_set selects for n rows.
std::size_t hard_set_size(std::size_t n, double fraction);

}  // namespace sage
