#pragma once

// Independent reference computations and seeded generators for the tests.
// Nothing here calls the library routine it is meant to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sage/corpus.hpp"
#include "sage/matrix.hpp"
#include "sage/nets.hpp"

namespace sage::test {

// Generators ---------------------------------------------------------------

/// Uniform matrix from std::mt19937_64 (deliberately not the library Rng).
inline EmbeddingMatrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed, float lo = -1.0f,
                                     float hi = 1.0f) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> dist(lo, hi);
  EmbeddingMatrix m(n, d);
  for (auto& v : m.values()) v = dist(gen);
  return m;
}

inline Logits random_logits(std::size_t n, std::size_t c, std::uint64_t seed, double scale = 2.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, scale);
  Logits m(n, c);
  for (auto& v : m.values()) v = dist(gen);
  return m;
}

inline std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> out(n);
  for (auto& v : out) v = dist(gen);
  return out;
}

/// Small integer drawn from [lo, hi] for property-test case sizes.
inline std::size_t random_size(std::mt19937_64& gen, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(gen);
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("sage_test_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

// Oracles ------------------------------------------------------------------

/// Exhaustive kNN: every pairwise distance, full sort on (distance, index).
inline std::vector<std::vector<std::pair<double, std::uint32_t>>> oracle_knn(const EmbeddingMatrix& x,
                                                                             std::size_t k) {
  const std::size_t n = x.rows();
  std::vector<std::vector<std::pair<double, std::uint32_t>>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double acc = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double diff = static_cast<double>(x(i, c)) - static_cast<double>(x(j, c));
        acc += diff * diff;
      }
      all.emplace_back(std::sqrt(acc), static_cast<std::uint32_t>(j));
    }
    std::sort(all.begin(), all.end());
    all.resize(k);
    out[i] = std::move(all);
  }
  return out;
}

inline double smooth_sum(const std::vector<double>& d, double rho, double sigma) {
  double s = 0.0;
  for (double v : d) s += std::exp(-std::max(0.0, v - rho) / sigma);
  return s;
}

/// Bisection on log(sigma): a different parameterization and stopping rule
/// than the library, run to machine precision.
inline double oracle_sigma(const std::vector<double>& d, double rho, double target) {
  double lo = std::log(1e-8), hi = std::log(1e4);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (smooth_sum(d, rho, std::exp(mid)) > target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

inline double ab_target(double x, double min_dist, double spread) {
  return x <= min_dist ? 1.0 : std::exp(-(x - min_dist) / spread);
}

/// Sum of squared residuals of 1/(1 + a x^(2b)) on the 300-point grid.
inline double ab_residual(double a, double b, double min_dist, double spread) {
  double r = 0.0;
  for (int i = 1; i <= 300; ++i) {
    const double x = 3.0 * spread * i / 300.0;
    const double f = 1.0 / (1.0 + a * std::pow(x, 2.0 * b));
    const double e = f - ab_target(x, min_dist, spread);
    r += e * e;
  }
  return r;
}

/// Coarse-to-fine grid search over (a, b).
inline std::pair<double, double> oracle_fit_ab(double min_dist, double spread) {
  double best_a = 1.0, best_b = 1.0, best = ab_residual(1.0, 1.0, min_dist, spread);
  double a_lo = 0.05, a_hi = 5.0, b_lo = 0.3, b_hi = 2.0;
  for (int level = 0; level < 4; ++level) {
    const int steps = 80;
    const double da = (a_hi - a_lo) / steps, db = (b_hi - b_lo) / steps;
    for (int i = 0; i <= steps; ++i) {
      for (int j = 0; j <= steps; ++j) {
        const double a = a_lo + i * da, b = b_lo + j * db;
        const double r = ab_residual(a, b, min_dist, spread);
        if (r < best) {
          best = r;
          best_a = a;
          best_b = b;
        }
      }
    }
    a_lo = std::max(1e-3, best_a - 2 * da);
    a_hi = best_a + 2 * da;
    b_lo = std::max(1e-3, best_b - 2 * db);
    b_hi = best_b + 2 * db;
  }
  return {best_a, best_b};
}

/// Mean distillation loss computed from forward + distill_loss only.
inline double mean_distill_loss(const NeuralNet& net, const EmbeddingMatrix& x, const Logits& t,
                                const TrainConfig& cfg) {
  const auto losses = distill_loss(forward(net, x), t, cfg);
  double s = 0.0;
  for (double v : losses) s += v;
  return s / static_cast<double>(losses.size());
}

/// Max relative error between analytic and central-difference gradients over
/// every parameter; the denominator is floored at `floor`.
template <typename LossFn>
double max_gradient_error(NeuralNet net, const Gradients& analytic, LossFn&& loss, double h = 1e-4,
                          double floor = 1e-6) {
  double worst = 0.0;
  auto check = [&](double& param, double grad) {
    const double saved = param;
    param = saved + h;
    const double up = loss(net);
    param = saved - h;
    const double down = loss(net);
    param = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({floor, std::abs(numeric), std::abs(grad)});
    worst = std::max(worst, std::abs(numeric - grad) / denom);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    for (std::size_t i = 0; i < layer.weights.values().size(); ++i) {
      check(layer.weights.values()[i], analytic[l].weights.values()[i]);
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) check(layer.bias[i], analytic[l].bias[i]);
  }
  return worst;
}

/// 1-nearest-neighbor accuracy under a k-fold split by row index modulo k.
inline double one_nn_kfold_accuracy(const LabeledCorpus& c, std::size_t folds) {
  const std::size_t n = c.size();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = INFINITY;
    std::uint32_t label = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j % folds == i % folds) continue;  // same fold: not in the training part
      double acc = 0.0;
      for (std::size_t d = 0; d < c.dim(); ++d) {
        const double diff = static_cast<double>(c.embeddings(i, d)) - c.embeddings(j, d);
        acc += diff * diff;
      }
      if (acc < best) {
        best = acc;
        label = c.labels[j];
      }
    }
    hits += label == c.labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

/// Mean fraction of each point's k high-dimensional neighbors that are also
/// among its k neighbors in `low`.
inline double knn_recall(const EmbeddingMatrix& high, const Coords& low, std::size_t k) {
  const auto hi = oracle_knn(high, k);
  const auto lo = oracle_knn(low, k);
  double total = 0.0;
  for (std::size_t i = 0; i < high.rows(); ++i) {
    std::size_t shared = 0;
    for (const auto& [_, a] : hi[i]) {
      for (const auto& [__, b] : lo[i]) shared += a == b;
    }
    total += static_cast<double>(shared) / static_cast<double>(k);
  }
  return total / static_cast<double>(high.rows());
}

}  // namespace sage::test
