#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sage/matrix.hpp"

namespace sage {

struct LabeledCorpus {
  EmbeddingMatrix embeddings;
  std::vector<std::uint32_t> labels;
  std::uint32_t num_classes = 0;

  std::size_t size() const noexcept { return embeddings.rows(); }
  std::size_t dim() const noexcept { return embeddings.cols(); }

  /// Throws ValidationError/DataError when an invariant is broken.
  void validate() const;

  LabeledCorpus subset(std::span<const std::size_t> rows) const;

  friend bool operator==(const LabeledCorpus&, const LabeledCorpus&) = default;
};

enum class LabelRule { cluster_id, xor_top2 };

std::string to_string(LabelRule rule);
LabelRule label_rule_from_string(const std::string& s);

/// Gaussian-mixture corpus description.
struct MixtureSpec {
  std::uint32_t num_clusters = 4;
  std::uint32_t d = 32;
  std::uint32_t points_per_cluster = 250;
  double cluster_std = 0.5;
  LabelRule label_rule = LabelRule::cluster_id;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Cluster means uniform in [-5, 5]^d, points isotropic Gaussian around them,
/// rows ordered cluster by cluster.
LabeledCorpus generate_corpus(const MixtureSpec& spec);

struct Split {
  LabeledCorpus train;
  LabeledCorpus eval;
  /// Original row index of every train/eval row.
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> eval_rows;
};

/// Seeded shuffle, then the first round(eval_fraction * n) rows go to eval.
/// Both partitions keep their rows in ascending original order.
Split split(const LabeledCorpus& corpus, double eval_fraction, std::uint64_t seed);

}  // namespace sage
