#include "sage/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sage/rng.hpp"

namespace sage {

void LabeledCorpus::validate() const {
  if (embeddings.rows() == 0) throw ValidationError("embeddings", "n must be >= 1");
  if (embeddings.cols() == 0) throw ValidationError("embeddings", "d must be >= 1");
  if (labels.size() != embeddings.rows()) {
    throw ValidationError("labels", "length " + std::to_string(labels.size()) +
                                        " != number of rows " +
                                        std::to_string(embeddings.rows()));
  }
  if (num_classes < 2) throw ValidationError("num_classes", "must be >= 2");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw DataError("label out of range", i);
  }
  require_finite(embeddings, "embeddings");
}

LabeledCorpus LabeledCorpus::subset(std::span<const std::size_t> rows) const {
  LabeledCorpus out;
  out.embeddings = embeddings.gather(rows);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) out.labels.push_back(labels[r]);
  out.num_classes = num_classes;
  return out;
}

std::string to_string(LabelRule rule) {
  return rule == LabelRule::cluster_id ? "cluster-id" : "xor-of-top2-coords";
}

LabelRule label_rule_from_string(const std::string& s) {
  if (s == "cluster-id") return LabelRule::cluster_id;
  if (s == "xor-of-top2-coords") return LabelRule::xor_top2;
  throw ValidationError("label_rule", "unknown rule '" + s + "'");
}

void MixtureSpec::validate() const {
  if (num_clusters == 0) throw ValidationError("num_clusters", "must be positive");
  if (label_rule == LabelRule::cluster_id && num_clusters < 2) {
    throw ValidationError("num_clusters", "must be >= 2 for cluster-id labels");
  }
  if (d == 0) throw ValidationError("d", "must be positive");
  if (label_rule == LabelRule::xor_top2 && d < 2) {
    throw ValidationError("d", "xor-of-top2-coords needs d >= 2");
  }
  if (points_per_cluster == 0) throw ValidationError("points_per_cluster", "must be positive");
  if (!(cluster_std > 0.0) || !std::isfinite(cluster_std)) {
    throw ValidationError("cluster_std", "must be a positive finite number");
  }
}

LabeledCorpus generate_corpus(const MixtureSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  Matrix<double> means(spec.num_clusters, spec.d);
  for (double& v : means.values()) v = rng.uniform(-5.0, 5.0);

  const std::size_t n = std::size_t{spec.num_clusters} * spec.points_per_cluster;
  LabeledCorpus out;
  out.embeddings = EmbeddingMatrix(n, spec.d);
  out.labels.resize(n);
  out.num_classes = spec.label_rule == LabelRule::cluster_id ? spec.num_clusters : 2;

  std::size_t r = 0;
  for (std::uint32_t c = 0; c < spec.num_clusters; ++c) {
    for (std::uint32_t p = 0; p < spec.points_per_cluster; ++p, ++r) {
      auto dst = out.embeddings.row(r);
      for (std::uint32_t j = 0; j < spec.d; ++j) {
        dst[j] = static_cast<float>(means(c, j) + spec.cluster_std * rng.normal());
      }
      if (spec.label_rule == LabelRule::cluster_id) {
        out.labels[r] = c;
      } else {
        out.labels[r] = static_cast<std::uint32_t>((dst[0] > 0.0f) != (dst[1] > 0.0f));
      }
    }
  }
  require_finite(out.embeddings, "generated corpus");
  return out;
}

Split split(const LabeledCorpus& corpus, double eval_fraction, std::uint64_t seed) {
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw ValidationError("eval_fraction", "must lie in (0, 1)");
  }
  const std::size_t n = corpus.size();
  const auto n_eval = static_cast<std::size_t>(std::llround(eval_fraction * static_cast<double>(n)));
  if (n_eval == 0 || n_eval >= n) {
    throw ValidationError("eval_fraction", "leaves an empty partition for n = " + std::to_string(n));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());

  Split out;
  out.eval_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_eval));
  out.train_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_eval), order.end());
  std::sort(out.eval_rows.begin(), out.eval_rows.end());
  std::sort(out.train_rows.begin(), out.train_rows.end());
  out.train = corpus.subset(out.train_rows);
  out.eval = corpus.subset(out.eval_rows);
  return out;
}

}  // namespace sage
