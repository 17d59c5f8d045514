#pragma once

#include <string>
#include <vector>

#include "sage/matrix.hpp"

namespace sage::cli {

struct ScatterInput {
  Coords coords;                   // one row per dataset point; the first two axes are drawn
  std::vector<double> losses;      // per dataset row, drives the color
  std::vector<bool> hard;          // per dataset row
  Coords synthetic;                // sampled points, same space as coords
  std::string title;
};

/// Deterministic SVG scatter: one <circle class="pt"> per dataset row (hard
/// rows carry class "pt hard"), synthetic points as <rect class="syn">.
std::string scatter_svg(const ScatterInput& in);

}  // namespace sage::cli
