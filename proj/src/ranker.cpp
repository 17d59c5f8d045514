#include "sage/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sage {

std::vector<std::size_t> LossProfile::ranks() const {
  std::vector<std::size_t> r(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) r[order[pos]] = pos;
  return r;
}

void LossProfile::validate() const {
  if (order.size() != losses.size()) throw ShapeError("loss profile order has the wrong length");
  std::vector<bool> seen(losses.size(), false);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t i = order[pos];
    if (i >= losses.size() || seen[i]) throw ValidationError("order", "not a permutation");
    seen[i] = true;
    if (pos > 0 && losses[order[pos - 1]] < losses[i]) throw ValidationError("order", "losses not non-increasing");
  }
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (!std::isfinite(losses[i]) || losses[i] < 0.0) throw DataError("loss must be finite and >= 0", i);
  }
}

LossProfile make_profile(std::vector<double> losses) {
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (!std::isfinite(losses[i]) || losses[i] < 0.0) throw DataError("loss must be finite and >= 0", i);
  }
  LossProfile p;
  p.order.resize(losses.size());
  std::iota(p.order.begin(), p.order.end(), std::size_t{0});
  std::sort(p.order.begin(), p.order.end(), [&](std::size_t a, std::size_t b) {
    if (losses[a] != losses[b]) return losses[a] > losses[b];
    return a < b;
  });
  p.losses = std::move(losses);
  return p;
}

LossProfile profile_losses(const NeuralNet& student, const NeuralNet& teacher,
                           const EmbeddingMatrix& data, const TrainConfig& cfg) {
  return make_profile(distill_loss(forward(student, data), forward(teacher, data), cfg));
}

std::size_t hard_set_size(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("hard_fraction", "must lie in (0, 1]");
  // Shave a relative ulp-scale amount so that e.g. 0.1 * 30 selects 3, not 4.
  const double raw = fraction * static_cast<double>(n) * (1.0 - 1e-12);
  return std::min(n, static_cast<std::size_t>(std::ceil(raw)));
}

std::vector<std::size_t> hard_set(const LossProfile& profile, double fraction) {
  const std::size_t count = hard_set_size(profile.size(), fraction);
  return {profile.order.begin(), profile.order.begin() + static_cast<std::ptrdiff_t>(count)};
}

}  // namespace sage
