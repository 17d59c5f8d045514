#include <doctest.h>

#include <map>

#include "sage/augmentor.hpp"
#include "sage/manifold.hpp"
#include "support.hpp"

using namespace sage;

namespace {

double dist(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) acc += (static_cast<double>(a[c]) - b[c]) * (static_cast<double>(a[c]) - b[c]);
  return std::sqrt(acc);
}

}  // namespace

TEST_CASE("sample_near: mix pinned to 0 without jitter returns the hard points") {
  const auto coords = test::random_matrix(40, 3, 1);
  const std::vector<std::size_t> hard{4, 0, 33};
  SamplerParams p;
  p.per_seed = 2;
  p.jitter_scale = 0.0;
  p.forced_mix = 0.0;
  const auto s = sample_near(coords, hard, p);
  REQUIRE(s.points.rows() == 6);
  for (std::size_t r = 0; r < 6; ++r) {
    const auto h = hard[r / 2];
    CHECK(s.provenance[r].seed_index == h);
    for (std::size_t c = 0; c < 3; ++c) CHECK(s.points(r, c) == coords(h, c));
  }
}

TEST_CASE("sample_near: counting, provenance grouping, errors") {
  const auto coords = test::random_matrix(100, 2, 2);
  std::vector<std::size_t> hard{1, 5, 9, 13, 17, 21, 25, 29};
  SamplerParams p;
  p.per_seed = 4;
  p.seed = 3;
  const auto s = sample_near(coords, hard, p);
  CHECK(s.points.rows() == 32);
  CHECK(s.provenance.size() == 32);
  std::map<std::uint32_t, int> counts;
  for (const auto& pr : s.provenance) {
    ++counts[pr.seed_index];
    CHECK(pr.jitter.size() == 2);
    CHECK(pr.mix >= 0.0);
    CHECK(pr.mix <= 1.0);
  }
  CHECK(counts.size() == 8);
  for (const auto& [h, c] : counts) CHECK(c == 4);

  p.k_samp = 100;
  CHECK_THROWS_AS(sample_near(coords, hard, p), ValidationError);
  p.k_samp = 10;
  CHECK_THROWS_AS(sample_near(coords, std::vector<std::size_t>{}, p), ValidationError);
  CHECK_THROWS_AS(sample_near(coords, std::vector<std::size_t>{100}, p), ValidationError);
}

TEST_CASE("sample_near properties: convexity and proximity without jitter") {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = test::random_size(gen, 5, 80), m = test::random_size(gen, 1, 5);
    const std::size_t k = test::random_size(gen, 1, n - 1);
    const auto coords = test::random_matrix(n, m, trial, -3.0f, 3.0f);
    const auto oracle = test::oracle_knn(coords, k);
    std::vector<std::size_t> hard;
    for (std::size_t i = 0; i < n; i += 3) hard.push_back(i);
    SamplerParams p;
    p.per_seed = 3;
    p.k_samp = k;
    p.jitter_scale = 0.0;
    p.seed = static_cast<std::uint64_t>(trial);
    const auto s = sample_near(coords, hard, p);
    for (std::size_t r = 0; r < s.points.rows(); ++r) {
      const auto& pr = s.provenance[r];
      const auto& nbrs = oracle[pr.seed_index];
      CHECK(std::any_of(nbrs.begin(), nbrs.end(), [&](const auto& e) { return e.second == pr.neighbor_index; }));
      for (std::size_t c = 0; c < m; ++c) {
        const double expect = (1.0 - pr.mix) * coords(pr.seed_index, c) + pr.mix * coords(pr.neighbor_index, c);
        CHECK(std::abs(s.points(r, c) - expect) <= 1e-5);
      }
      CHECK(dist(s.points.row(r), coords.row(pr.seed_index)) <= nbrs.back().first + 1e-5);
    }
  }
}

TEST_CASE("sample_near: deterministic and independent of hard-set order") {
  const auto coords = test::random_matrix(60, 2, 9);
  SamplerParams p;
  p.per_seed = 3;
  p.seed = 11;
  const std::vector<std::size_t> ab{7, 20}, ba{20, 7};
  const auto s1 = sample_near(coords, ab, p);
  const auto s2 = sample_near(coords, ab, p);
  CHECK(s1.points == s2.points);
  CHECK(s1.provenance == s2.provenance);
  const auto s3 = sample_near(coords, ba, p);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 2; ++c) CHECK(s3.points(r + 3, c) == s1.points(r, c));
  }
}

TEST_CASE("build_batch: stored coords lift to training rows with teacher labels") {
  const auto x = test::random_matrix(90, 6, 12);
  manifold::ProjectionParams pp;
  pp.n_neighbors = 10;
  pp.epochs = 30;
  const auto model = manifold::fit(x, pp);
  const auto teacher = init_net({6, 8, 3}, Activation::relu, 1);

  const std::vector<std::size_t> rows{3, 40, 41, 88};
  SampledPoints sp{model.coords.gather(std::span<const std::size_t>(rows)), {}};
  for (std::size_t r : rows) sp.provenance.push_back({static_cast<std::uint32_t>(r), 0, 0.0, {0.0f, 0.0f}});
  const auto batch = build_batch(model, teacher, sp, 5);
  const auto expect = x.gather(std::span<const std::size_t>(rows));
  CHECK(batch.size() == 4);
  CHECK(batch.high_vectors == expect);
  CHECK(batch.teacher_logits == forward(teacher, expect));
  CHECK(batch.provenance == sp.provenance);

  const auto again = build_batch(model, teacher, sp, 5);
  CHECK(again.high_vectors == batch.high_vectors);

  const auto empty = build_batch(model, teacher, SampledPoints{Coords(0, 2), {}}, 5);
  CHECK(empty.size() == 0);
  CHECK(empty.teacher_logits.rows() == 0);
}

TEST_CASE("build_batch: teacher logits equal a fresh forward pass on random samples") {
  const auto x = test::random_matrix(70, 5, 13);
  manifold::ProjectionParams pp;
  pp.n_neighbors = 10;
  pp.epochs = 20;
  const auto model = manifold::fit(x, pp);
  const auto teacher = init_net({5, 7, 2}, Activation::tanh, 2);
  SamplerParams p;
  p.per_seed = 2;
  p.seed = 5;
  const std::vector<std::size_t> hard{0, 1, 2, 3, 4, 5};
  const auto batch = build_batch(model, teacher, sample_near(model.coords, hard, p), 5);
  CHECK(batch.size() == 12);
  CHECK(batch.teacher_logits == forward(teacher, batch.high_vectors));

  const auto native = build_batch_native(teacher, sample_near(x, hard, p));
  CHECK(native.high_vectors.cols() == 5);
  CHECK(native.teacher_logits == forward(teacher, native.high_vectors));
}

TEST_CASE("provenance sidecar round-trips") {
  const auto coords = test::random_matrix(30, 3, 14);
  SamplerParams p;
  p.per_seed = 2;
  const std::vector<std::size_t> hard{2, 9, 17};
  const auto s = sample_near(coords, hard, p);
  const auto text = provenance_jsonl(s.provenance);
  CHECK(parse_provenance_jsonl(text) == s.provenance);
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);
  CHECK_THROWS_AS(parse_provenance_jsonl("{\"seed_index\": 1}\nnot json\n"), ParseError);
}
