#include <doctest.h>

#include "sage/inverter.hpp"
#include "sage/manifold.hpp"
#include "support.hpp"

using namespace sage;

namespace {

/// Indices of the k nearest anchors to row p of `points`, by full sort.
std::vector<std::size_t> nearest_anchors(const Coords& anchors, const Coords& points, std::size_t p,
                                         std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < anchors.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < anchors.cols(); ++c) {
      const double diff = static_cast<double>(anchors(i, c)) - points(p, c);
      acc += diff * diff;
    }
    all.emplace_back(acc, i);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < k; ++t) out.push_back(all[t].second);
  return out;
}

}  // namespace

TEST_CASE("inverse_transform: stored anchors come back verbatim for any k_inv") {
  const auto coords = test::random_matrix(50, 2, 1, -10.0f, 10.0f);
  const auto emb = test::random_matrix(50, 16, 2);
  for (std::size_t k : {1u, 3u, 50u}) CHECK(inverse_transform(coords, emb, coords, k) == emb);
  CHECK(inverse_transform(coords, emb, coords, 4, InverseKernel::fuzzy) == emb);
}

TEST_CASE("inverse_transform: k_inv = 1 and the equidistant midpoint") {
  const Coords anchors(3, 2, std::vector<float>{0, 0, 2, 0, 10, 10});
  const EmbeddingMatrix emb(3, 3, std::vector<float>{1, 2, 3, 5, 6, 7, -1, -1, -1});
  const Coords near_first(1, 2, std::vector<float>{0.4f, 0.3f});
  CHECK(inverse_transform(anchors, emb, near_first, 1) == EmbeddingMatrix(1, 3, std::vector<float>{1, 2, 3}));

  const Coords mid(1, 2, std::vector<float>{1.0f, 0.0f});
  CHECK(inverse_transform(anchors, emb, mid, 2) == EmbeddingMatrix(1, 3, std::vector<float>{3, 4, 5}));

  CHECK_THROWS_AS(inverse_transform(anchors, emb, mid, 4), ValidationError);
  CHECK_THROWS_AS(inverse_transform(anchors, emb, mid, 0), ValidationError);
  CHECK_THROWS_AS(inverse_transform(anchors, emb, Coords(1, 3), 1), ShapeError);
}

TEST_CASE("inverse_transform properties: per-dimension convex hull and scale invariance") {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = test::random_size(gen, 3, 60), m = test::random_size(gen, 1, 4);
    const std::size_t d = test::random_size(gen, 1, 10), k = test::random_size(gen, 1, n);
    const auto anchors = test::random_matrix(n, m, 100 + trial, -5.0f, 5.0f);
    const auto emb = test::random_matrix(n, d, 200 + trial);
    const auto queries = test::random_matrix(20, m, 300 + trial, -6.0f, 6.0f);
    const auto rec = inverse_transform(anchors, emb, queries, k);
    for (std::size_t p = 0; p < 20; ++p) {
      const auto src = nearest_anchors(anchors, queries, p, k);
      for (std::size_t c = 0; c < d; ++c) {
        float lo = INFINITY, hi = -INFINITY;
        for (std::size_t s : src) {
          lo = std::min(lo, emb(s, c));
          hi = std::max(hi, emb(s, c));
        }
        CHECK(rec(p, c) >= lo - 1e-6f);
        CHECK(rec(p, c) <= hi + 1e-6f);
      }
    }

    // Scaling the low-dimensional space by a power of two scales every
    // distance exactly, so normalized weights are unchanged.
    Coords a2 = anchors, q2 = queries;
    for (auto& v : a2.values()) v *= 4.0f;
    for (auto& v : q2.values()) v *= 4.0f;
    const auto rec2 = inverse_transform(a2, emb, q2, k);
    for (std::size_t i = 0; i < rec.values().size(); ++i) {
      CHECK(std::abs(rec2.values()[i] - rec.values()[i]) <= 1e-5f);
    }
  }
}

TEST_CASE("fidelity: identity, orthogonal vectors, zero norms, aggregates") {
  const auto x = test::random_matrix(25, 9, 4);
  const auto self = fidelity(x, x);
  CHECK(self.mean_cosine == 1.0);
  CHECK(self.mean_mse == 0.0);

  const EmbeddingMatrix v(1, 2, std::vector<float>{1, 0}), w(1, 2, std::vector<float>{0, 1});
  const auto ortho = fidelity(v, w);
  CHECK(ortho.mean_cosine == 0.0);
  CHECK(ortho.mean_mse == 1.0);

  const EmbeddingMatrix zero(1, 2, std::vector<float>{0, 0});
  CHECK(fidelity(zero, v).mean_cosine == 0.0);

  const auto y = test::random_matrix(25, 9, 5);
  const auto r = fidelity(x, y);
  double cs = 0.0, ms = 0.0;
  for (const auto& [c, m] : r.per_instance) {
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
    CHECK(m >= 0.0);
    cs += c;
    ms += m;
  }
  CHECK(std::abs(cs / 25.0 - r.mean_cosine) <= 1e-9);
  CHECK(std::abs(ms / 25.0 - r.mean_mse) <= 1e-9);
  CHECK_THROWS_AS(fidelity(x, test::random_matrix(25, 8, 1)), ShapeError);
}

TEST_CASE("transform then inverse_transform of the training set is the identity") {
  const auto x = test::random_matrix(120, 10, 6);
  manifold::ProjectionParams p;
  p.n_neighbors = 12;
  p.epochs = 30;
  const auto model = manifold::fit(x, p);
  const auto placed = manifold::transform(model, x, 0);
  const auto rec = inverse_transform(model, placed, 1);
  CHECK(rec == x);
  CHECK(fidelity(x, rec).mean_cosine == 1.0);
}
