#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sage/corpus.hpp"
#include "sage/matrix.hpp"

namespace sage {

enum class Activation { relu, tanh };
enum class OptimizerKind { adam, sgd };
enum class LossKind { mse_logits, soft_ce };

std::string to_string(Activation a);
std::string to_string(OptimizerKind o);
std::string to_string(LossKind l);
Activation activation_from_string(const std::string& s);
OptimizerKind optimizer_from_string(const std::string& s);
LossKind loss_kind_from_string(const std::string& s);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  OptimizerKind optimizer = OptimizerKind::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Softening temperature for soft_ce.
  double temperature = 2.0;
  LossKind loss_kind = LossKind::soft_ce;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DenseLayer {
  Matrix<double> weights;  // fan_in × fan_out
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Feed-forward network; `activation` applies to every hidden layer, the
/// final layer is linear (logits).
struct NeuralNet {
  std::vector<std::uint32_t> layer_dims;
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t num_classes() const { return layer_dims.back(); }
  std::size_t parameter_count() const;
  void validate() const;

  friend bool operator==(const NeuralNet&, const NeuralNet&) = default;
};

/// Weights ~ N(0, 1/fan_in), biases zero.
NeuralNet init_net(const std::vector<std::uint32_t>& layer_dims, Activation activation,
                   std::uint64_t seed);

Logits forward(const NeuralNet& net, const EmbeddingMatrix& batch);

/// Per-instance student-vs-teacher loss.
///   mse_logits: mean over classes of (s - t)^2
///   soft_ce:    T^2 * CE(softmax(t/T), softmax(s/T))
std::vector<double> distill_loss(const Logits& student, const Logits& teacher,
                                 const TrainConfig& cfg);

/// Per-instance hard-label cross-entropy.
std::vector<double> hard_label_loss(const Logits& logits, std::span<const std::uint32_t> labels);

/// Parameter gradients, same shapes as NeuralNet::layers.
using Gradients = std::vector<DenseLayer>;

/// Mean distillation loss over all rows of `data` and its analytic gradient.
double distill_objective(const NeuralNet& net, const EmbeddingMatrix& data,
                         const Logits& teacher_logits, const TrainConfig& cfg, Gradients& grad);

/// Mean hard-label cross-entropy and its analytic gradient.
double hard_label_objective(const NeuralNet& net, const EmbeddingMatrix& data,
                            std::span<const std::uint32_t> labels, Gradients& grad);

/// Owns a network plus optimizer state across epochs. Epoch e shuffles with
/// derive_seed(cfg.seed, "shuffle", e), so a run is a pure function of its
/// inputs.
class Trainer {
public:
  Trainer(NeuralNet net, TrainConfig cfg);

  /// One pass of shuffled mini-batches against teacher logits. Returns the
  /// mean loss over `data` after the update.
  double train_epoch(const EmbeddingMatrix& data, const Logits& teacher_logits);

  /// One pass with hard-label cross-entropy. Returns the post-update mean loss.
  double train_epoch_labels(const EmbeddingMatrix& data, std::span<const std::uint32_t> labels);

  const NeuralNet& net() const noexcept { return net_; }
  NeuralNet release() && { return std::move(net_); }
  std::uint64_t epochs_done() const noexcept { return epochs_done_; }

private:
  template <typename BatchObjective>
  void run_epoch(std::size_t n, BatchObjective&& objective);
  void apply(const Gradients& grad);

  NeuralNet net_;
  TrainConfig cfg_;
  Gradients first_moment_;
  Gradients second_moment_;
  std::uint64_t steps_ = 0;
  std::uint64_t epochs_done_ = 0;
};

struct EpochOutcome {
  NeuralNet net;
  double mean_loss = 0.0;
};

/// Single distillation epoch from fresh optimizer state.
EpochOutcome train_epoch(const NeuralNet& net, const EmbeddingMatrix& data,
                         const Logits& teacher_logits, const TrainConfig& cfg);

struct TeacherFit {
  NeuralNet net;
  double accuracy = 0.0;
  std::size_t epochs = 0;
  bool reached_target = false;
};

/// Hard-label training until accuracy on `eval` (or on `train` when eval is
/// null) reaches target_acc, or max_epochs. Returns the best network seen.
TeacherFit fit_teacher(const LabeledCorpus& train, const LabeledCorpus* eval,
                       const std::vector<std::uint32_t>& layer_dims, Activation activation,
                       const TrainConfig& cfg, double target_acc, std::size_t max_epochs);

/// Row-wise argmax, ties to the lowest index.
std::vector<std::uint32_t> predict(const Logits& logits);

double accuracy(const NeuralNet& net, const LabeledCorpus& data);

/// Fraction of rows where student and teacher argmax agree.
double agreement(const NeuralNet& student, const NeuralNet& teacher, const EmbeddingMatrix& data);
double agreement(const Logits& student, const Logits& teacher);

/// Rounds every parameter to the nearest float32, the checkpoint precision.
NeuralNet quantize_to_f32(NeuralNet net);

// Checkpoint: one JSON header line ("format", "format_version", "layer_dims",
// "activation", "seed"), '\n', then float32 LE parameters layer by layer,
// weights row-major then bias.
std::vector<std::byte> encode_net(const NeuralNet& net);
NeuralNet decode_net(std::span<const std::byte> bytes);
void save_net(const NeuralNet& net, const std::string& path);
NeuralNet load_net(const std::string& path);

}  // namespace sage
