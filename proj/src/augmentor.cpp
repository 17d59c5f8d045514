#include "sage/augmentor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sage/kernels.hpp"
#include "sage/rng.hpp"

namespace sage {

SampledPoints sample_near(const Coords& coords, std::span<const std::size_t> hard,
                          const SamplerParams& params) {
  const std::size_t n = coords.rows(), m = coords.cols();
  if (params.k_samp == 0 || params.k_samp >= n) {
    throw ValidationError("k_samp", "must satisfy 1 <= k_samp < n (k_samp = " + std::to_string(params.k_samp) +
                                        ", n = " + std::to_string(n) + ")");
  }
  if (hard.empty()) throw ValidationError("hard", "hard set is empty");
  if (params.per_seed == 0) throw ValidationError("per_seed", "must be positive");
  if (!(params.jitter_scale >= 0.0)) throw ValidationError("jitter_scale", "must be non-negative");
  if (params.forced_mix && !(*params.forced_mix >= 0.0 && *params.forced_mix <= 1.0)) {
    throw ValidationError("forced_mix", "must lie in [0, 1]");
  }
  for (std::size_t h : hard) {
    if (h >= n) throw ValidationError("hard", "index " + std::to_string(h) + " out of range");
  }

  const Coords queries = coords.gather(hard);
  const auto knn = kernels::knn_query(coords, queries, params.k_samp + 1);

  SampledPoints out{Coords(hard.size() * params.per_seed, m),
                    std::vector<Provenance>(hard.size() * params.per_seed)};
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t qq = 0; qq < static_cast<std::ptrdiff_t>(hard.size()); ++qq) {
    const auto q = static_cast<std::size_t>(qq);
    const std::size_t h = hard[q];
    // Neighbor list without h itself.
    std::vector<std::uint32_t> nbrs;
    std::vector<double> dists;
    for (std::size_t t = 0; t < params.k_samp + 1 && nbrs.size() < params.k_samp; ++t) {
      if (knn.indices(q, t) == h) continue;
      nbrs.push_back(knn.indices(q, t));
      dists.push_back(knn.distances(q, t));
    }
    const double jitter_std = params.jitter_scale * dists.back();
    Rng rng(derive_seed(params.seed, "sample_near", h));
    auto yh = coords.row(h);
    for (std::size_t s = 0; s < params.per_seed; ++s) {
      const std::size_t row = q * params.per_seed + s;
      const std::uint32_t j = nbrs[rng.index(nbrs.size())];
      const double mix = params.forced_mix ? *params.forced_mix : rng.uniform();
      auto yj = coords.row(j);
      Provenance& prov = out.provenance[row];
      prov.seed_index = static_cast<std::uint32_t>(h);
      prov.neighbor_index = j;
      prov.mix = mix;
      prov.jitter.assign(m, 0.0f);
      auto dst = out.points.row(row);
      for (std::size_t c = 0; c < m; ++c) {
        const double jitter = jitter_std > 0.0 ? jitter_std * rng.normal() : 0.0;
        prov.jitter[c] = static_cast<float>(jitter);
        dst[c] = static_cast<float>((1.0 - mix) * yh[c] + mix * yj[c] + jitter);
      }
    }
  }
  return out;
}

SyntheticBatch build_batch(const manifold::ProjectionModel& model, const NeuralNet& teacher,
                           SampledPoints sampled, std::size_t k_inv, InverseKernel kernel) {
  SyntheticBatch batch;
  batch.high_vectors = inverse_transform(model, sampled.points, k_inv, kernel);
  batch.teacher_logits = batch.high_vectors.rows() > 0 ? forward(teacher, batch.high_vectors)
                                                       : Logits(0, teacher.num_classes());
  batch.low_points = std::move(sampled.points);
  batch.provenance = std::move(sampled.provenance);
  return batch;
}

SyntheticBatch build_batch_native(const NeuralNet& teacher, SampledPoints sampled) {
  SyntheticBatch batch;
  batch.high_vectors = sampled.points;
  batch.teacher_logits = batch.high_vectors.rows() > 0 ? forward(teacher, batch.high_vectors)
                                                       : Logits(0, teacher.num_classes());
  batch.low_points = std::move(sampled.points);
  batch.provenance = std::move(sampled.provenance);
  return batch;
}

std::string provenance_jsonl(const std::vector<Provenance>& provenance) {
  std::string out;
  for (std::size_t r = 0; r < provenance.size(); ++r) {
    const auto& p = provenance[r];
    nlohmann::json obj = {{"row", r},
                          {"seed_index", p.seed_index},
                          {"neighbor_index", p.neighbor_index},
                          {"mix", p.mix},
                          {"jitter", p.jitter}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::vector<Provenance> parse_provenance_jsonl(const std::string& text) {
  std::vector<Provenance> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      Provenance p;
      p.seed_index = obj.at("seed_index").get<std::uint32_t>();
      p.neighbor_index = obj.at("neighbor_index").get<std::uint32_t>();
      p.mix = obj.at("mix").get<double>();
      p.jitter = obj.at("jitter").get<std::vector<float>>();
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid provenance record: ") + e.what(), line_no, ParseError::Location::line);
    }
  }
  return out;
}

}  // namespace sage
