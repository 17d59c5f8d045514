#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <numeric>

#include "sage/curriculum.hpp"
#include "sage/kernels.hpp"
#include "sage/log.hpp"
#include "sage/rng.hpp"

namespace sage {

namespace {

using Clock = std::chrono::steady_clock;

class Stopwatch {
public:
  explicit Stopwatch(double& sink) : sink_(sink), start_(Clock::now()) {}
  ~Stopwatch() { sink_ += std::chrono::duration<double>(Clock::now() - start_).count(); }
  Stopwatch(const Stopwatch&) = delete;
  Stopwatch& operator=(const Stopwatch&) = delete;

private:
  double& sink_;
  Clock::time_point start_;
};

TrainConfig seeded(TrainConfig cfg, std::uint64_t master, const char* stream) {
  cfg.seed = derive_seed(master, stream);
  return cfg;
}

std::vector<std::uint32_t> layer_dims(std::size_t input, const std::vector<std::uint32_t>& hidden,
                                      std::size_t classes) {
  std::vector<std::uint32_t> dims;
  dims.push_back(static_cast<std::uint32_t>(input));
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(static_cast<std::uint32_t>(classes));
  return dims;
}

LabeledCorpus load_base_corpus(const RunConfig& cfg) {
  if (cfg.corpus.mixture) {
    MixtureSpec spec = *cfg.corpus.mixture;
    spec.seed = cfg.corpus.mixture_seed.value_or(derive_seed(cfg.seed, "corpus"));
    return generate_corpus(spec);
  }
  return io::load_corpus(cfg.corpus.path, cfg.corpus.format);
}

double gold_accuracy(const Logits& logits, const std::vector<std::uint32_t>& labels) {
  if (labels.empty()) return 0.0;
  const auto pred = predict(logits);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

enum class Mode { adaptive, baseline };

/// Everything the epoch loop needs that is fixed for the whole run.
struct RunState {
  NeuralNet teacher;
  Split base;
  Logits base_teacher_logits;
  Logits eval_teacher_logits;
};

struct Evaluation {
  double eval_agreement = 0.0;
  double eval_gold_accuracy = 0.0;
};

Evaluation evaluate(const NeuralNet& student, const RunState& state) {
  const Logits student_eval = forward(student, state.base.eval.embeddings);
  return {agreement(student_eval, state.eval_teacher_logits),
          gold_accuracy(student_eval, state.base.eval.labels)};
}

std::size_t resolve_per_seed(const RunConfig& cfg, std::size_t base_size, std::size_t seeds) {
  if (cfg.augmentor.per_seed > 0) return cfg.augmentor.per_seed;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(base_size) /
                                                                        static_cast<double>(seeds))));
}

/// Uniform draw of `count` distinct indices from [0, n).
std::vector<std::size_t> uniform_pool(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(all.begin(), all.end());
  all.resize(std::min(count, n));
  return all;
}

WarmUpResult warm_up_from(const RunConfig& cfg, const NeuralNet* given_teacher, const NeuralNet* given_student,
                          Logits* base_logits) {
  cfg.validate();
  LabeledCorpus corpus = load_base_corpus(cfg);
  corpus.validate();
  Split base = split(corpus, cfg.eval_fraction, derive_seed(cfg.seed, "split"));

  NeuralNet teacher;
  TeacherFit fit;
  if (given_teacher != nullptr) {
    teacher = *given_teacher;
  } else if (!cfg.teacher.checkpoint.empty()) {
    teacher = load_net(cfg.teacher.checkpoint);
  } else {
    const auto dims = layer_dims(corpus.dim(), cfg.teacher.hidden, corpus.num_classes);
    fit = fit_teacher(base.train, &base.eval, dims, cfg.teacher.activation,
                      seeded(cfg.teacher.train, cfg.seed, "teacher"), cfg.teacher.target_acc,
                      cfg.teacher.max_epochs);
    // Frozen at checkpoint precision so a saved teacher reproduces the run.
    teacher = quantize_to_f32(fit.net);
  }
  if (teacher.input_dim() != corpus.dim()) {
    throw ShapeError("teacher expects input dimension " + std::to_string(teacher.input_dim()) + ", corpus has " +
                     std::to_string(corpus.dim()));
  }
  fit.net = teacher;
  fit.accuracy = accuracy(teacher, base.eval);
  fit.reached_target = fit.accuracy >= cfg.teacher.target_acc;
  if (!fit.reached_target) {
    log().warn("teacher eval accuracy {:.4f} is below target {:.4f}; continuing", fit.accuracy,
               cfg.teacher.target_acc);
  }

  NeuralNet student_init =
      given_student != nullptr
          ? *given_student
          : init_net(layer_dims(corpus.dim(), cfg.student.hidden, teacher.num_classes()), cfg.student.activation,
                     derive_seed(cfg.seed, "student"));
  if (student_init.input_dim() != teacher.input_dim() || student_init.num_classes() != teacher.num_classes()) {
    throw ShapeError("student and teacher disagree on input or output width");
  }

  Trainer student(std::move(student_init), seeded(cfg.student.train, cfg.seed, "student_train"));
  Logits logits = forward(teacher, base.train.embeddings);
  EpochRecord record;
  record.epoch = 1;
  record.dataset_size = base.train.size();
  record.mean_loss = student.train_epoch(base.train.embeddings, logits);
  record.train_agreement = agreement(forward(student.net(), base.train.embeddings), logits);
  if (base_logits != nullptr) *base_logits = std::move(logits);

  return WarmUpResult{std::move(teacher), std::move(fit), std::move(student), std::move(base), record};
}

RunReport run_loop(const RunConfig& cfg, WarmUpResult warm, Logits base_logits, Mode mode, double warm_up_seconds,
                   RunArtifacts* artifacts) {
  const auto started = Clock::now();
  RunReport report;
  report.mode = mode == Mode::adaptive ? "adaptive" : "baseline";
  report.config = cfg;
  report.teacher_eval_accuracy = warm.teacher_fit.accuracy;
  report.teacher_reached_target = warm.teacher_fit.reached_target;
  report.timing.warm_up = warm_up_seconds;

  RunState state{warm.teacher, warm.base, std::move(base_logits), forward(warm.teacher, warm.base.eval.embeddings)};
  Trainer student = std::move(warm.student);

  EpochRecord first = warm.record;
  {
    Stopwatch sw(report.timing.evaluate);
    const auto ev = evaluate(student.net(), state);
    first.eval_agreement = ev.eval_agreement;
    first.eval_gold_accuracy = ev.eval_gold_accuracy;
  }
  report.epochs.push_back(first);
  log().info("[{}] epoch 1 (warm-up): loss {:.5f}, train agreement {:.4f}, eval agreement {:.4f}", report.mode,
             first.mean_loss, first.train_agreement, first.eval_agreement);

  EmbeddingMatrix dataset = state.base.train.embeddings;
  Logits dataset_logits = state.base_teacher_logits;
  const std::size_t base_size = dataset.rows();

  if (first.train_agreement >= cfg.agreement_threshold) {
    report.stop_reason = StopReason::threshold_met;
  } else {
    report.stop_reason = StopReason::max_epochs;
    for (std::size_t epoch = 2; epoch <= cfg.max_epochs; ++epoch) {
      try {
        EpochRecord rec;
        rec.epoch = epoch;
        EpochSnapshot snap;
        snap.epoch = epoch;

        // (1) + (2): rank the current dataset, then pick the seed pool.
        {
          Stopwatch sw(report.timing.rank);
          snap.profile = make_profile(distill_loss(forward(student.net(), dataset), dataset_logits, cfg.student.train));
          const std::size_t count = hard_set_size(dataset.rows(), cfg.hard_fraction);
          snap.seeds = mode == Mode::adaptive
                           ? hard_set(snap.profile, cfg.hard_fraction)
                           : uniform_pool(dataset.rows(), count, derive_seed(cfg.seed, "baseline_pool", epoch));
          double sum = 0.0;
          for (std::size_t s : snap.seeds) sum += snap.profile.losses[s];
          rec.hard_set_mean_loss = sum / static_cast<double>(snap.seeds.size());
        }

        // (3): projection of the current dataset, refit every epoch.
        {
          Stopwatch sw(report.timing.project);
          if (cfg.target_dim) {
            auto params = cfg.projection;
            params.target_dim = *cfg.target_dim;
            params.seed = derive_seed(cfg.seed, "projection", epoch);
            snap.projection = manifold::fit(dataset, params);
            snap.coords = snap.projection->coords;
            rec.spectral_fell_back = snap.projection->spectral_fell_back;
          } else {
            snap.coords = dataset;
          }
        }

        // (4): sample around the seeds and lift back through the teacher.
        SampledPoints sampled;
        {
          Stopwatch sw(report.timing.sample);
          SamplerParams sp;
          sp.per_seed = resolve_per_seed(cfg, base_size, snap.seeds.size());
          sp.k_samp = std::min(cfg.augmentor.k_samp, dataset.rows() - 1);
          sp.jitter_scale = cfg.augmentor.jitter_scale;
          sp.seed = derive_seed(cfg.seed, "sample", epoch);
          sampled = sample_near(snap.coords, snap.seeds, sp);
        }
        {
          Stopwatch sw(report.timing.invert);
          snap.batch = snap.projection
                           ? build_batch(*snap.projection, state.teacher, std::move(sampled),
                                         std::min(cfg.augmentor.k_inv, dataset.rows()), cfg.augmentor.kernel)
                           : build_batch_native(state.teacher, std::move(sampled));
          std::vector<std::size_t> origin(snap.batch.size());
          for (std::size_t r = 0; r < origin.size(); ++r) origin[r] = snap.batch.provenance[r].seed_index;
          const auto report_fid =
              fidelity(dataset.gather(std::span<const std::size_t>(origin)), snap.batch.high_vectors);
          snap.fidelity = {report_fid.mean_cosine, report_fid.mean_mse};
          rec.fidelity = snap.fidelity;
        }

        // (5): the synthetic batch replaces the dataset.
        snap.dataset = std::move(dataset);
        dataset = snap.batch.high_vectors;
        dataset_logits = snap.batch.teacher_logits;
        if (cfg.retain_base_fraction > 0.0) {
          const auto keep = static_cast<std::size_t>(
              std::llround(cfg.retain_base_fraction * static_cast<double>(base_size)));
          const auto rows = uniform_pool(base_size, keep, derive_seed(cfg.seed, "retain", epoch));
          dataset.append_rows(state.base.train.embeddings.gather(std::span<const std::size_t>(rows)));
          Logits kept = state.base_teacher_logits.gather(std::span<const std::size_t>(rows));
          dataset_logits.append_rows(kept);
        }
        rec.dataset_size = dataset.rows();

        // (6): one training epoch on the new dataset.
        {
          Stopwatch sw(report.timing.train);
          rec.mean_loss = student.train_epoch(dataset, dataset_logits);
        }

        // (7): metrics and the stopping rule.
        {
          Stopwatch sw(report.timing.evaluate);
          rec.train_agreement = agreement(forward(student.net(), dataset), dataset_logits);
          const auto ev = evaluate(student.net(), state);
          rec.eval_agreement = ev.eval_agreement;
          rec.eval_gold_accuracy = ev.eval_gold_accuracy;
          rec.drift = dataset_drift(dataset, state.base.train.embeddings);
        }
        report.epochs.push_back(rec);
        log().info("[{}] epoch {}: loss {:.5f}, train agreement {:.4f}, eval agreement {:.4f}, fidelity cos {:.4f}",
                   report.mode, epoch, rec.mean_loss, rec.train_agreement, rec.eval_agreement,
                   rec.fidelity->mean_cosine);
        if (artifacts != nullptr) artifacts->last_epoch = std::move(snap);
        if (rec.train_agreement >= cfg.agreement_threshold) {
          report.stop_reason = StopReason::threshold_met;
          break;
        }
      } catch (const Error& e) {
        log().error("[{}] epoch {} aborted: {}", report.mode, epoch, e.what());
        report.stop_reason = StopReason::aborted;
        report.error = e.what();
        break;
      }
    }
  }

  if (artifacts != nullptr) {
    artifacts->teacher = state.teacher;
    artifacts->student = student.net();
  }
  report.timing.total = warm_up_seconds + std::chrono::duration<double>(Clock::now() - started).count();
  return report;
}

RunReport run_mode(const RunConfig& cfg, Mode mode, RunArtifacts* artifacts) {
  double seconds = 0.0;
  Logits base_logits;
  std::optional<WarmUpResult> warm;
  {
    Stopwatch sw(seconds);
    warm.emplace(warm_up_from(cfg, nullptr, nullptr, &base_logits));
  }
  return run_loop(cfg, std::move(*warm), std::move(base_logits), mode, seconds, artifacts);
}

}  // namespace

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::threshold_met: return "threshold_met";
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::aborted: return "aborted";
  }
  return "unknown";
}

double dataset_drift(const EmbeddingMatrix& current, const EmbeddingMatrix& base) {
  if (current.rows() == 0) return 0.0;
  const auto nn = kernels::knn_query(base, current, 1);
  double sum = 0.0;
  for (std::size_t r = 0; r < current.rows(); ++r) sum += nn.distances(r, 0);
  return sum / static_cast<double>(current.rows());
}

WarmUpResult warm_up(const RunConfig& cfg) { return warm_up_from(cfg, nullptr, nullptr, nullptr); }

RunReport run_adaptive(const RunConfig& cfg, RunArtifacts* artifacts) {
  return run_mode(cfg, Mode::adaptive, artifacts);
}

RunReport run_baseline(const RunConfig& cfg, RunArtifacts* artifacts) {
  return run_mode(cfg, Mode::baseline, artifacts);
}

RunReport run_adaptive_with(const RunConfig& cfg, const NeuralNet& teacher, const NeuralNet& student,
                            RunArtifacts* artifacts) {
  double seconds = 0.0;
  Logits base_logits;
  std::optional<WarmUpResult> warm;
  {
    Stopwatch sw(seconds);
    warm.emplace(warm_up_from(cfg, &teacher, &student, &base_logits));
  }
  return run_loop(cfg, std::move(*warm), std::move(base_logits), Mode::adaptive, seconds, artifacts);
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, const std::vector<std::optional<std::size_t>>& dims,
                                      std::size_t jobs) {
  if (dims.empty()) throw ValidationError("dims", "must name at least one dimension");
  for (const auto& d : dims) {
    if (d && *d == 0) throw ValidationError("dims", "dimension must be >= 1");
  }

  // Every arm shares the master seed, so corpus, teacher and warm-up are
  // identical across arms; compute them once.
  double warm_seconds = 0.0;
  Logits base_logits;
  std::optional<WarmUpResult> warm;
  {
    Stopwatch sw(warm_seconds);
    warm.emplace(warm_up_from(cfg, nullptr, nullptr, &base_logits));
  }

  auto run_arm = [&](std::size_t i) {
    AblationRow row;
    row.dim = dims[i];
    RunConfig arm = cfg;
    arm.target_dim = dims[i];
    try {
      arm.validate();
      const RunReport rep = run_loop(arm, *warm, base_logits, Mode::adaptive, warm_seconds, nullptr);
      row.final_eval_agreement = rep.final_eval_agreement();
      row.epochs_used = rep.epochs.size();
      std::size_t counted = 0;
      for (const auto& e : rep.epochs) {
        if (!e.fidelity) continue;
        row.mean_fidelity_cosine += e.fidelity->mean_cosine;
        row.mean_fidelity_mse += e.fidelity->mean_mse;
        ++counted;
      }
      if (counted > 0) {
        row.mean_fidelity_cosine /= static_cast<double>(counted);
        row.mean_fidelity_mse /= static_cast<double>(counted);
      } else {
        row.mean_fidelity_cosine = row.mean_fidelity_mse = std::nan("");
      }
      row.error = rep.error;
    } catch (const Error& e) {
      log().error("ablation arm {} failed: {}", dim_label(dims[i]), e.what());
      row.error = e.what();
    }
    return row;
  };

  std::vector<AblationRow> rows(dims.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < dims.size(); ++i) rows[i] = run_arm(i);
    return rows;
  }
  std::size_t next = 0;
  while (next < dims.size()) {
    std::vector<std::future<AblationRow>> wave;
    const std::size_t first = next;
    for (; next < dims.size() && next - first < jobs; ++next) {
      wave.push_back(std::async(std::launch::async, run_arm, next));
    }
    for (std::size_t w = 0; w < wave.size(); ++w) rows[first + w] = wave[w].get();
  }
  return rows;
}

}  // namespace sage
