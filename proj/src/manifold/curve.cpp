#include <array>
#include <cmath>

#include "sage/manifold.hpp"

namespace sage::manifold {

namespace {

constexpr int kCurvePoints = 300;

struct CurveData {
  std::array<double, kCurvePoints> x;
  std::array<double, kCurvePoints> y;
};

CurveData target_curve(double min_dist, double spread) {
  CurveData c{};
  for (int i = 0; i < kCurvePoints; ++i) {
    const double x = 3.0 * spread * static_cast<double>(i + 1) / kCurvePoints;
    c.x[static_cast<std::size_t>(i)] = x;
    c.y[static_cast<std::size_t>(i)] = x <= min_dist ? 1.0 : std::exp(-(x - min_dist) / spread);
  }
  return c;
}

double sum_squares(const CurveData& c, double a, double b) {
  double acc = 0.0;
  for (int i = 0; i < kCurvePoints; ++i) {
    const auto s = static_cast<std::size_t>(i);
    const double r = 1.0 / (1.0 + a * std::pow(c.x[s], 2.0 * b)) - c.y[s];
    acc += r * r;
  }
  return acc;
}

}  // namespace

std::pair<double, double> fit_ab(double min_dist, double spread) {
  if (!(spread > 0.0) || !std::isfinite(spread)) throw ValidationError("spread", "must be positive");
  if (!(min_dist > 0.0 && min_dist < spread)) throw ValidationError("min_dist", "must satisfy 0 < min_dist < spread");
  const CurveData c = target_curve(min_dist, spread);

  // Levenberg-Marquardt on the two parameters.
  double a = 1.0, b = 1.0;
  double cost = sum_squares(c, a, b);
  double lambda = 1e-3;
  for (int iter = 0; iter < 500; ++iter) {
    double jtj00 = 0.0, jtj01 = 0.0, jtj11 = 0.0, jtr0 = 0.0, jtr1 = 0.0;
    for (int i = 0; i < kCurvePoints; ++i) {
      const auto s = static_cast<std::size_t>(i);
      const double x = c.x[s];
      const double p = std::pow(x, 2.0 * b);
      const double denom = 1.0 + a * p;
      const double f = 1.0 / denom;
      const double r = f - c.y[s];
      const double da = -p / (denom * denom);
      const double db = -a * p * 2.0 * std::log(x) / (denom * denom);
      jtj00 += da * da;
      jtj01 += da * db;
      jtj11 += db * db;
      jtr0 += da * r;
      jtr1 += db * r;
    }
    bool improved = false;
    while (lambda < 1e12) {
      const double m00 = jtj00 * (1.0 + lambda), m11 = jtj11 * (1.0 + lambda), m01 = jtj01;
      const double det = m00 * m11 - m01 * m01;
      const double step_a = -(m11 * jtr0 - m01 * jtr1) / det;
      const double step_b = -(m00 * jtr1 - m01 * jtr0) / det;
      const double na = a + step_a, nb = b + step_b;
      if (na > 0.0 && nb > 0.0) {
        const double ncost = sum_squares(c, na, nb);
        if (ncost < cost) {
          const double rel = (cost - ncost) / std::max(cost, 1e-300);
          a = na;
          b = nb;
          cost = ncost;
          lambda = std::max(lambda * 0.3, 1e-12);
          improved = true;
          if (rel < 1e-12) return {a, b};
          break;
        }
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  return {a, b};
}

}  // namespace sage::manifold
