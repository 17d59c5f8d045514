#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sage/augmentor.hpp"
#include "sage/corpus.hpp"
#include "sage/io.hpp"
#include "sage/manifold.hpp"
#include "sage/nets.hpp"
#include "sage/ranker.hpp"

namespace sage {

struct CorpusSource {
  /// Synthetic mixture; when `mixture_seed` is unset the seed derives from the master seed.
  std::optional<MixtureSpec> mixture;
  std::optional<std::uint64_t> mixture_seed;
  /// Labeled file (EMBL / CSV / JSONL) used when `mixture` is empty.
  std::string path;
  io::Format format = io::Format::emb1;
};

struct StudentSpec {
  std::vector<std::uint32_t> hidden = {64};
  Activation activation = Activation::relu;
  TrainConfig train;
};

struct TeacherSpec {
  std::vector<std::uint32_t> hidden = {128, 128, 64};
  Activation activation = Activation::relu;
  TrainConfig train;
  double target_acc = 0.95;
  std::size_t max_epochs = 100;
  /// Load a frozen teacher instead of fitting one.
  std::string checkpoint;
};

struct AugmentorConfig {
  /// 0 = choose so the synthetic batch matches the current dataset size.
  std::size_t per_seed = 0;
  std::size_t k_samp = 10;
  double jitter_scale = 0.1;
  std::size_t k_inv = 5;
  InverseKernel kernel = InverseKernel::inverse_distance;
};

struct RunConfig {
  CorpusSource corpus;
  TeacherSpec teacher;
  StudentSpec student;
  manifold::ProjectionParams projection;
  /// Projection dimension; nullopt = native (no projection, sampling in d dims).
  std::optional<std::size_t> target_dim = 2;
  double hard_fraction = 0.25;
  AugmentorConfig augmentor;
  double agreement_threshold = 0.99;
  std::size_t max_epochs = 10;
  double eval_fraction = 0.2;
  std::uint64_t seed = 0;
  /// Fraction of the base training split appended to every synthetic dataset.
  double retain_base_fraction = 0.0;

  void validate() const;
};

/// "native" or the decimal dimension.
std::string dim_label(const std::optional<std::size_t>& dim);
std::optional<std::size_t> parse_dim(const std::string& token);

/// Strict JSON → RunConfig: unknown keys raise ValidationError naming the key.
/// `extra_top_level` lists additional keys the caller handles itself.
RunConfig run_config_from_json(const nlohmann::json& j,
                               const std::vector<std::string>& extra_top_level = {});
nlohmann::json to_json(const RunConfig& cfg);

enum class StopReason { threshold_met, max_epochs, aborted };
std::string to_string(StopReason r);

struct FidelitySummary {
  double mean_cosine = 0.0;
  double mean_mse = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t dataset_size = 0;
  double mean_loss = 0.0;
  double train_agreement = 0.0;
  double eval_agreement = 0.0;
  double eval_gold_accuracy = 0.0;
  std::optional<double> hard_set_mean_loss;
  std::optional<FidelitySummary> fidelity;
  double drift = 0.0;
  bool spectral_fell_back = false;
};

struct PhaseTiming {
  double warm_up = 0.0;
  double rank = 0.0;
  double project = 0.0;
  double sample = 0.0;
  double invert = 0.0;
  double train = 0.0;
  double evaluate = 0.0;
  double total = 0.0;
};

struct RunReport {
  std::string mode;  // "adaptive" or "baseline"
  std::vector<EpochRecord> epochs;
  StopReason stop_reason = StopReason::max_epochs;
  std::string error;
  double teacher_eval_accuracy = 0.0;
  bool teacher_reached_target = false;
  RunConfig config;
  PhaseTiming timing;

  double final_eval_agreement() const { return epochs.empty() ? 0.0 : epochs.back().eval_agreement; }
  double final_train_agreement() const { return epochs.empty() ? 0.0 : epochs.back().train_agreement; }
};

/// Report as JSON (format_version "1"). Wall-clock values live only under
/// "timing", which is omitted when include_timing is false.
nlohmann::json to_json(const RunReport& report, bool include_timing = true);

/// State of the last adaptive epoch, kept for inspection and plotting.
struct EpochSnapshot {
  std::size_t epoch = 0;
  EmbeddingMatrix dataset;  // the dataset that was ranked and projected
  LossProfile profile;
  std::vector<std::size_t> seeds;  // hard set (or uniform pool for the baseline)
  Coords coords;                   // projection of `dataset`; the raw rows for native runs
  std::optional<manifold::ProjectionModel> projection;
  SyntheticBatch batch;
  FidelitySummary fidelity;
};

struct RunArtifacts {
  NeuralNet teacher;
  NeuralNet student;
  std::optional<EpochSnapshot> last_epoch;
};

struct WarmUpResult {
  NeuralNet teacher;
  TeacherFit teacher_fit;
  Trainer student;
  Split base;
  EpochRecord record;
};

/// Loads or generates the corpus, splits it, fits (or loads) and freezes the
/// teacher, and trains a fresh student for exactly one epoch on the base
/// training split.
WarmUpResult warm_up(const RunConfig& cfg);

/// Warm-up followed by rank → project → sample → invert → replace → train
/// epochs until the train agreement reaches the threshold or max_epochs.
RunReport run_adaptive(const RunConfig& cfg, RunArtifacts* artifacts = nullptr);

/// Same loop with the hard set replaced by a uniform random pool of the same size.
RunReport run_baseline(const RunConfig& cfg, RunArtifacts* artifacts = nullptr);

/// Adaptive loop starting from a caller-supplied teacher and student (used
/// when both already exist, e.g. a student cloned from the teacher).
RunReport run_adaptive_with(const RunConfig& cfg, const NeuralNet& teacher, const NeuralNet& student,
                            RunArtifacts* artifacts = nullptr);

struct AblationRow {
  std::optional<std::size_t> dim;
  double final_eval_agreement = 0.0;
  std::size_t epochs_used = 0;
  double mean_fidelity_cosine = 0.0;
  double mean_fidelity_mse = 0.0;
  std::string error;
};

/// One adaptive run per projection dimension, all from the same master seed.
/// A failing arm records its error and the others proceed. `jobs` > 1 runs
/// arms concurrently; results do not depend on it.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, const std::vector<std::optional<std::size_t>>& dims,
                                      std::size_t jobs = 1);

inline constexpr const char* kAblationCsvHeader =
    "dim,final_eval_agreement,epochs_used,mean_fidelity_cosine,mean_fidelity_mse";

std::string ablation_csv(const std::vector<AblationRow>& rows);
nlohmann::json ablation_json(const std::vector<AblationRow>& rows);

/// Mean distance from each row of `current` to its nearest row of `base`.
double dataset_drift(const EmbeddingMatrix& current, const EmbeddingMatrix& base);

}  // namespace sage
