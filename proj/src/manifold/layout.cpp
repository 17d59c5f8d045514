#include <algorithm>
#include <cmath>

#include "sage/kernels.hpp"
#include "sage/log.hpp"
#include "sage/manifold.hpp"
#include "sage/rng.hpp"

namespace sage::manifold {

void ProjectionParams::validate() const {
  if (n_neighbors == 0) throw ValidationError("n_neighbors", "must be >= 1");
  if (target_dim == 0) throw ValidationError("target_dim", "must be >= 1");
  if (!(spread > 0.0)) throw ValidationError("spread", "must be positive");
  if (!(min_dist > 0.0 && min_dist < spread)) throw ValidationError("min_dist", "must satisfy 0 < min_dist < spread");
  if (!std::isfinite(a) || !std::isfinite(b)) throw ValidationError("a", "curve parameters must be finite");
}

double attractive_coefficient(double d2, double a, double b) noexcept {
  if (d2 <= 0.0) return 0.0;
  const double pb = std::pow(d2, b);
  return -2.0 * a * b * (pb / d2) / (1.0 + a * pb);
}

double repulsive_coefficient(double d2, double a, double b) noexcept {
  const double pb = d2 > 0.0 ? std::pow(d2, b) : 0.0;
  return 2.0 * b / ((kRepulsionStabilizer + d2) * (1.0 + a * pb));
}

namespace {

double clamp_step(double v) { return std::clamp(v, -kLayoutClamp, kLayoutClamp); }

void require_finite_coords(const Coords& coords, std::size_t epoch) {
  for (float v : coords.values()) {
    if (!std::isfinite(v)) throw DivergenceError("non-finite coordinate after layout epoch " + std::to_string(epoch));
  }
}

}  // namespace

Coords optimize_layout(const FuzzyGraph& graph, Coords coords, const ProjectionParams& params) {
  if (coords.rows() != graph.n) throw ShapeError("coords rows do not match graph size");
  require_finite(coords, "initial coords");
  if (!(params.a > 0.0 && params.b > 0.0)) throw ValidationError("a", "layout needs fitted a > 0, b > 0");
  if (params.epochs == 0 || graph.edges.empty()) return coords;

  const std::size_t n = coords.rows(), m = coords.cols();
  const double a = params.a, b = params.b;

  // Both orientations of every stored pair, as in the standard directed edge list.
  const std::size_t num = 2 * graph.edges.size();
  std::vector<std::uint32_t> head(num), tail(num);
  std::vector<double> epochs_per_sample(num), next_sample(num);
  float max_w = 0.0f;
  for (const auto& e : graph.edges) max_w = std::max(max_w, e.weight);
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto& edge = graph.edges[e];
    const double eps = static_cast<double>(max_w) / static_cast<double>(edge.weight);
    head[2 * e] = edge.i;
    tail[2 * e] = edge.j;
    head[2 * e + 1] = edge.j;
    tail[2 * e + 1] = edge.i;
    epochs_per_sample[2 * e] = epochs_per_sample[2 * e + 1] = eps;
    next_sample[2 * e] = next_sample[2 * e + 1] = eps;
  }

  Rng rng(derive_seed(params.seed, "layout"));
  const double total = static_cast<double>(params.epochs);
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    const double alpha = 1.0 - static_cast<double>(epoch) / total;
    const double now = static_cast<double>(epoch);
    for (std::size_t e = 0; e < num; ++e) {
      if (next_sample[e] > now) continue;
      const std::uint32_t i = head[e], j = tail[e];
      float* yi = coords.row(i).data();
      float* yj = coords.row(j).data();

      const double d2 = squared_distance(coords.row(i), coords.row(j));
      const double attract = attractive_coefficient(d2, a, b);
      for (std::size_t c = 0; c < m; ++c) {
        const double step = clamp_step(attract * (static_cast<double>(yi[c]) - yj[c])) * alpha;
        yi[c] = static_cast<float>(yi[c] + step);
        yj[c] = static_cast<float>(yj[c] - step);
      }
      next_sample[e] += epochs_per_sample[e];

      for (std::size_t s = 0; s < params.neg_sample_rate; ++s) {
        const auto k = static_cast<std::uint32_t>(rng.index(n));
        if (k == i) continue;
        const float* yk = coords.row(k).data();
        const double nd2 = squared_distance(coords.row(i), coords.row(k));
        const double repel = repulsive_coefficient(nd2, a, b);
        for (std::size_t c = 0; c < m; ++c) {
          const double step = clamp_step(repel * (static_cast<double>(yi[c]) - yk[c])) * alpha;
          yi[c] = static_cast<float>(yi[c] + step);
        }
      }
    }
    require_finite_coords(coords, epoch);
  }
  return coords;
}

ProjectionModel fit(const EmbeddingMatrix& x, ProjectionParams params) {
  params.validate();
  require_finite(x, "projection input");
  if (x.rows() < 2) throw ValidationError("n", "projection needs at least 2 points");
  params.n_neighbors = std::min(params.n_neighbors, x.rows() - 1);
  if (!(params.a > 0.0 && params.b > 0.0)) {
    std::tie(params.a, params.b) = fit_ab(params.min_dist, params.spread);
  }

  ProjectionModel model;
  model.params = params;
  model.train_embeddings = x;
  const auto graph = knn_graph(x, params.n_neighbors);
  model.graph = fuzzy_union(graph, smooth_knn(graph));
  Coords init = init_coords(model.graph, params.target_dim, params.init, params.seed, &model.spectral_fell_back);
  model.coords = optimize_layout(model.graph, std::move(init), params);
  return model;
}

Coords transform(const ProjectionModel& model, const EmbeddingMatrix& x_new,
                 std::optional<std::size_t> refine_epochs) {
  const std::size_t m = model.target_dim();
  if (x_new.rows() == 0) return Coords(0, m);
  if (x_new.cols() != model.input_dim()) {
    throw ShapeError("transform input has dimension " + std::to_string(x_new.cols()) + ", model expects " +
                     std::to_string(model.input_dim()));
  }
  const std::size_t n_train = model.size();
  const std::size_t k = std::min(model.params.n_neighbors, n_train);
  const auto knn = kernels::knn_query(model.train_embeddings, x_new, k);
  const double target = std::log2(static_cast<double>(k));
  const std::size_t epochs = refine_epochs.value_or(model.params.epochs / 3);
  const double a = model.params.a, b = model.params.b;

  Coords out(x_new.rows(), m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pp = 0; pp < static_cast<std::ptrdiff_t>(x_new.rows()); ++pp) {
    const auto p = static_cast<std::size_t>(pp);
    auto dist = knn.distances.row(p);
    auto nbrs = knn.indices.row(p);
    std::vector<double> y(m, 0.0);
    std::vector<double> w(k, 0.0);

    const double rho = dist[0];
    const double sigma = solve_sigma(dist, rho, target);
    for (std::size_t t = 0; t < k; ++t) w[t] = std::exp(-std::max(0.0, dist[t] - rho) / sigma);
    if (dist[0] < 1e-12) {
      auto src = model.coords.row(nbrs[0]);
      for (std::size_t c = 0; c < m; ++c) y[c] = src[c];
    } else {
      double wsum = 0.0;
      for (std::size_t t = 0; t < k; ++t) {
        auto src = model.coords.row(nbrs[t]);
        for (std::size_t c = 0; c < m; ++c) y[c] += w[t] * src[c];
        wsum += w[t];
      }
      for (double& v : y) v /= wsum;
    }

    if (epochs > 0) {
      Rng rng(derive_seed(model.params.seed, "transform", p));
      double max_w = 0.0;
      for (double v : w) max_w = std::max(max_w, v);
      std::vector<double> per_sample(k), next(k);
      for (std::size_t t = 0; t < k; ++t) {
        per_sample[t] = w[t] >= kMinEdgeWeight ? max_w / w[t] : -1.0;
        next[t] = per_sample[t];
      }
      auto sq_to = [&](std::span<const float> other) {
        double acc = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
          const double diff = y[c] - other[c];
          acc += diff * diff;
        }
        return acc;
      };
      for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        const double alpha = 1.0 - static_cast<double>(epoch) / static_cast<double>(epochs);
        for (std::size_t t = 0; t < k; ++t) {
          if (per_sample[t] < 0.0 || next[t] > static_cast<double>(epoch)) continue;
          auto other = model.coords.row(nbrs[t]);
          const double attract = attractive_coefficient(sq_to(other), a, b);
          for (std::size_t c = 0; c < m; ++c) y[c] += clamp_step(attract * (y[c] - other[c])) * alpha;
          next[t] += per_sample[t];
          for (std::size_t s = 0; s < model.params.neg_sample_rate; ++s) {
            auto neg = model.coords.row(rng.index(n_train));
            const double repel = repulsive_coefficient(sq_to(neg), a, b);
            for (std::size_t c = 0; c < m; ++c) y[c] += clamp_step(repel * (y[c] - neg[c])) * alpha;
          }
        }
      }
    }
    for (std::size_t c = 0; c < m; ++c) out(p, c) = static_cast<float>(y[c]);
  }
  require_finite_coords(out, epochs);
  return out;
}

}  // namespace sage::manifold
