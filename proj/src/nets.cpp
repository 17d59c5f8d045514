#include "sage/nets.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include <nlohmann/json.hpp>

#include "sage/io.hpp"
#include "sage/kernels.hpp"
#include "sage/rng.hpp"

namespace sage {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }
std::string to_string(OptimizerKind o) { return o == OptimizerKind::adam ? "adam" : "sgd"; }
std::string to_string(LossKind l) { return l == LossKind::mse_logits ? "mse_logits" : "soft_ce"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ValidationError("activation", "unknown activation '" + s + "'");
}

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ValidationError("optimizer", "unknown optimizer '" + s + "'");
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "mse_logits") return LossKind::mse_logits;
  if (s == "soft_ce") return LossKind::soft_ce;
  throw ValidationError("loss_kind", "unknown loss '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate", "must be a finite non-negative number");
  }
  if (batch_size == 0) throw ValidationError("batch_size", "must be positive");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) throw ValidationError("adam_beta1", "must lie in (0, 1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) throw ValidationError("adam_beta2", "must lie in (0, 1)");
  if (!(adam_eps > 0.0)) throw ValidationError("adam_eps", "must be positive");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ValidationError("temperature", "must be positive");
  }
}

std::size_t NeuralNet::parameter_count() const {
  std::size_t total = 0;
  for (const auto& l : layers) total += l.weights.values().size() + l.bias.size();
  return total;
}

void NeuralNet::validate() const {
  if (layer_dims.size() < 2) throw ValidationError("layer_dims", "needs at least 2 entries");
  for (auto d : layer_dims) {
    if (d == 0) throw ValidationError("layer_dims", "entries must be positive");
  }
  if (layers.size() != layer_dims.size() - 1) throw ShapeError("layer count does not match layer_dims");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.weights.rows() != layer_dims[i] || l.weights.cols() != layer_dims[i + 1] ||
        l.bias.size() != layer_dims[i + 1]) {
      throw ShapeError("layer " + std::to_string(i) + " does not map " + std::to_string(layer_dims[i]) +
                       " -> " + std::to_string(layer_dims[i + 1]));
    }
    for (double v : l.weights.values()) {
      if (!std::isfinite(v)) throw ValidationError("weights", "non-finite parameter in layer " + std::to_string(i));
    }
    for (double v : l.bias) {
      if (!std::isfinite(v)) throw ValidationError("bias", "non-finite parameter in layer " + std::to_string(i));
    }
  }
}

NeuralNet init_net(const std::vector<std::uint32_t>& layer_dims, Activation activation,
                   std::uint64_t seed) {
  if (layer_dims.size() < 2) throw ValidationError("layer_dims", "needs at least 2 entries");
  for (auto d : layer_dims) {
    if (d == 0) throw ValidationError("layer_dims", "entries must be positive");
  }
  NeuralNet net;
  net.layer_dims = layer_dims;
  net.activation = activation;
  net.seed = seed;
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
    Rng rng(derive_seed(seed, "init_layer", i));
    DenseLayer layer{Matrix<double>(layer_dims[i], layer_dims[i + 1]),
                     std::vector<double>(layer_dims[i + 1], 0.0)};
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer_dims[i]));
    for (double& w : layer.weights.values()) w = scale * rng.normal();
    net.layers.push_back(std::move(layer));
  }
  return net;
}

namespace {

Matrix<double> to_double(const EmbeddingMatrix& x) {
  Matrix<double> out(x.rows(), x.cols());
  std::transform(x.values().begin(), x.values().end(), out.values().begin(),
                 [](float v) { return static_cast<double>(v); });
  return out;
}

void check_input(const NeuralNet& net, std::size_t d) {
  if (d != net.input_dim()) {
    throw ShapeError("input has dimension " + std::to_string(d) + " but the network expects " +
                     std::to_string(net.input_dim()));
  }
}

void activate(Activation a, Matrix<double>& z) {
  if (a == Activation::relu) {
    for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
  } else {
    for (double& v : z.values()) v = std::tanh(v);
  }
}

/// Activations per layer: acts[0] = input, acts[L] = logits.
std::vector<Matrix<double>> forward_cached(const NeuralNet& net, Matrix<double> input) {
  std::vector<Matrix<double>> acts;
  acts.reserve(net.layers.size() + 1);
  acts.push_back(std::move(input));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Matrix<double> z;
    kernels::affine(acts.back(), net.layers[l].weights, net.layers[l].bias, z);
    if (l + 1 < net.layers.size()) activate(net.activation, z);
    acts.push_back(std::move(z));
  }
  return acts;
}

/// Softmax of row/temperature with max subtraction; also returns log-softmax.
void softmax_row(std::span<const double> row, double temperature, std::vector<double>& p,
                 std::vector<double>& logp) {
  const std::size_t c = row.size();
  p.resize(c);
  logp.resize(c);
  double mx = row[0] / temperature;
  for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j] / temperature);
  double sum = 0.0;
  for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] / temperature - mx);
  const double log_sum = std::log(sum);
  for (std::size_t j = 0; j < c; ++j) {
    logp[j] = row[j] / temperature - mx - log_sum;
    p[j] = std::exp(logp[j]);
  }
}

enum class Objective { mse_logits, soft_ce, hard_ce };

struct Target {
  Objective objective;
  const Logits* teacher = nullptr;
  std::span<const std::uint32_t> labels;
  double temperature = 1.0;
};

Target distill_target(const Logits& teacher, const TrainConfig& cfg) {
  return Target{cfg.loss_kind == LossKind::mse_logits ? Objective::mse_logits : Objective::soft_ce,
                &teacher, {}, cfg.temperature};
}

/// Loss of one row and (optionally) d loss / d logits.
double row_loss(const Target& t, std::size_t target_row, std::span<const double> logits,
                double* grad) {
  const std::size_t c = logits.size();
  switch (t.objective) {
    case Objective::mse_logits: {
      auto teach = t.teacher->row(target_row);
      double acc = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        const double diff = logits[j] - teach[j];
        acc += diff * diff;
        if (grad) grad[j] = 2.0 * diff / static_cast<double>(c);
      }
      return acc / static_cast<double>(c);
    }
    case Objective::soft_ce: {
      thread_local std::vector<double> p, logp, q, logq;
      const double temp = t.temperature;
      softmax_row(t.teacher->row(target_row), temp, p, logp);
      softmax_row(logits, temp, q, logq);
      double acc = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        acc -= p[j] * logq[j];
        if (grad) grad[j] = temp * (q[j] - p[j]);
      }
      return temp * temp * acc;
    }
    case Objective::hard_ce: {
      thread_local std::vector<double> q, logq;
      softmax_row(logits, 1.0, q, logq);
      const std::uint32_t y = t.labels[target_row];
      if (grad) {
        for (std::size_t j = 0; j < c; ++j) grad[j] = q[j] - (j == y ? 1.0 : 0.0);
      }
      return -logq[y];
    }
  }
  return 0.0;
}

/// Mean loss over `rows` of `x`, accumulating the mean gradient into `grad`
/// when non-null.
double objective_on_rows(const NeuralNet& net, const EmbeddingMatrix& x,
                         std::span<const std::size_t> rows, const Target& target, Gradients* grad) {
  const std::size_t n = rows.size();
  Matrix<double> input(n, x.cols());
  for (std::size_t i = 0; i < n; ++i) {
    auto src = x.row(rows[i]);
    std::transform(src.begin(), src.end(), input.row(i).begin(),
                   [](float v) { return static_cast<double>(v); });
  }
  auto acts = forward_cached(net, std::move(input));
  const Matrix<double>& logits = acts.back();

  Matrix<double> delta(n, logits.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += row_loss(target, rows[i], logits.row(i), grad ? delta.row(i).data() : nullptr);
  }
  const double mean = total / static_cast<double>(n);
  if (!grad) return mean;

  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& v : delta.values()) v *= inv_n;

  grad->resize(net.layers.size());
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    auto& g = (*grad)[l];
    g.bias.assign(net.layers[l].bias.size(), 0.0);
    kernels::affine_backward_params(acts[l], delta, g.weights, g.bias);
    if (l == 0) break;
    Matrix<double> upstream;
    kernels::affine_backward_input(delta, net.layers[l].weights, upstream);
    const Matrix<double>& a = acts[l];
    for (std::size_t k = 0; k < upstream.values().size(); ++k) {
      const double av = a.values()[k];
      const double deriv = net.activation == Activation::relu ? (av > 0.0 ? 1.0 : 0.0) : 1.0 - av * av;
      upstream.values()[k] *= deriv;
    }
    delta = std::move(upstream);
  }
  return mean;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

void check_logit_shapes(const Logits& a, const Logits& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("logit shapes differ: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Logits forward(const NeuralNet& net, const EmbeddingMatrix& batch) {
  check_input(net, batch.cols());
  auto acts = forward_cached(net, to_double(batch));
  return std::move(acts.back());
}

std::vector<double> distill_loss(const Logits& student, const Logits& teacher,
                                 const TrainConfig& cfg) {
  check_logit_shapes(student, teacher);
  const Target target = distill_target(teacher, cfg);
  std::vector<double> out(student.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = row_loss(target, i, student.row(i), nullptr);
  return out;
}

std::vector<double> hard_label_loss(const Logits& logits, std::span<const std::uint32_t> labels) {
  if (labels.size() != logits.rows()) throw ShapeError("label count does not match logit rows");
  const Target target{Objective::hard_ce, nullptr, labels, 1.0};
  std::vector<double> out(logits.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = row_loss(target, i, logits.row(i), nullptr);
  return out;
}

double distill_objective(const NeuralNet& net, const EmbeddingMatrix& data,
                         const Logits& teacher_logits, const TrainConfig& cfg, Gradients& grad) {
  check_input(net, data.cols());
  if (teacher_logits.rows() != data.rows() || teacher_logits.cols() != net.num_classes()) {
    throw ShapeError("teacher logits do not match data rows / class count");
  }
  const auto rows = all_rows(data.rows());
  return objective_on_rows(net, data, rows, distill_target(teacher_logits, cfg), &grad);
}

double hard_label_objective(const NeuralNet& net, const EmbeddingMatrix& data,
                            std::span<const std::uint32_t> labels, Gradients& grad) {
  check_input(net, data.cols());
  if (labels.size() != data.rows()) throw ShapeError("label count does not match data rows");
  const auto rows = all_rows(data.rows());
  return objective_on_rows(net, data, rows, Target{Objective::hard_ce, nullptr, labels, 1.0}, &grad);
}

Trainer::Trainer(NeuralNet net, TrainConfig cfg) : net_(std::move(net)), cfg_(cfg) {
  cfg_.validate();
  net_.validate();
  for (const auto& l : net_.layers) {
    DenseLayer zero{Matrix<double>(l.weights.rows(), l.weights.cols()), std::vector<double>(l.bias.size(), 0.0)};
    first_moment_.push_back(zero);
    second_moment_.push_back(std::move(zero));
  }
}

void Trainer::apply(const Gradients& grad) {
  ++steps_;
  const double lr = cfg_.learning_rate;
  if (cfg_.optimizer == OptimizerKind::sgd) {
    for (std::size_t l = 0; l < net_.layers.size(); ++l) {
      auto& w = net_.layers[l].weights.values();
      const auto& gw = grad[l].weights.values();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
      auto& b = net_.layers[l].bias;
      for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * grad[l].bias[i];
    }
    return;
  }
  const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2, eps = cfg_.adam_eps;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  };
  for (std::size_t l = 0; l < net_.layers.size(); ++l) {
    update(net_.layers[l].weights.values(), grad[l].weights.values(), first_moment_[l].weights.values(),
           second_moment_[l].weights.values());
    update(net_.layers[l].bias, grad[l].bias, first_moment_[l].bias, second_moment_[l].bias);
  }
}

template <typename BatchObjective>
void Trainer::run_epoch(std::size_t n, BatchObjective&& objective) {
  std::vector<std::size_t> order = all_rows(n);
  Rng rng(derive_seed(cfg_.seed, "shuffle", epochs_done_));
  rng.shuffle(order.begin(), order.end());
  Gradients grad;
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < n; start += cfg_.batch_size, ++batch_index) {
    const std::size_t end = std::min(n, start + cfg_.batch_size);
    const std::span<const std::size_t> rows(order.data() + start, end - start);
    const double loss = objective(rows, grad);
    if (!std::isfinite(loss)) {
      throw DivergenceError("non-finite loss at batch " + std::to_string(batch_index) + " of epoch " +
                            std::to_string(epochs_done_));
    }
    apply(grad);
  }
  ++epochs_done_;
}

double Trainer::train_epoch(const EmbeddingMatrix& data, const Logits& teacher_logits) {
  check_input(net_, data.cols());
  if (teacher_logits.rows() != data.rows() || teacher_logits.cols() != net_.num_classes()) {
    throw ShapeError("teacher logits do not match data rows / class count");
  }
  if (data.rows() == 0) throw ValidationError("data", "empty training set");
  const Target target = distill_target(teacher_logits, cfg_);
  run_epoch(data.rows(), [&](std::span<const std::size_t> rows, Gradients& grad) {
    return objective_on_rows(net_, data, rows, target, &grad);
  });
  const auto rows = all_rows(data.rows());
  const double mean = objective_on_rows(net_, data, rows, target, nullptr);
  if (!std::isfinite(mean)) throw DivergenceError("non-finite post-epoch loss");
  return mean;
}

double Trainer::train_epoch_labels(const EmbeddingMatrix& data, std::span<const std::uint32_t> labels) {
  check_input(net_, data.cols());
  if (labels.size() != data.rows()) throw ShapeError("label count does not match data rows");
  if (data.rows() == 0) throw ValidationError("data", "empty training set");
  const Target target{Objective::hard_ce, nullptr, labels, 1.0};
  run_epoch(data.rows(), [&](std::span<const std::size_t> rows, Gradients& grad) {
    return objective_on_rows(net_, data, rows, target, &grad);
  });
  const auto rows = all_rows(data.rows());
  return objective_on_rows(net_, data, rows, target, nullptr);
}

EpochOutcome train_epoch(const NeuralNet& net, const EmbeddingMatrix& data,
                         const Logits& teacher_logits, const TrainConfig& cfg) {
  Trainer trainer(net, cfg);
  const double loss = trainer.train_epoch(data, teacher_logits);
  return {std::move(trainer).release(), loss};
}

std::vector<std::uint32_t> predict(const Logits& logits) {
  std::vector<std::uint32_t> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[i] = static_cast<std::uint32_t>(best);
  }
  return out;
}

double accuracy(const NeuralNet& net, const LabeledCorpus& data) {
  const auto pred = predict(forward(net, data.embeddings));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == data.labels[i];
  return pred.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(pred.size());
}

double agreement(const Logits& student, const Logits& teacher) {
  check_logit_shapes(student, teacher);
  if (student.rows() == 0) return 0.0;
  const auto a = predict(student);
  const auto b = predict(teacher);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hits += a[i] == b[i];
  return static_cast<double>(hits) / static_cast<double>(a.size());
}

double agreement(const NeuralNet& student, const NeuralNet& teacher, const EmbeddingMatrix& data) {
  return agreement(forward(student, data), forward(teacher, data));
}

TeacherFit fit_teacher(const LabeledCorpus& train, const LabeledCorpus* eval,
                       const std::vector<std::uint32_t>& layer_dims, Activation activation,
                       const TrainConfig& cfg, double target_acc, std::size_t max_epochs) {
  train.validate();
  if (max_epochs == 0) throw ValidationError("max_epochs", "must be >= 1");
  if (layer_dims.front() != train.dim() || layer_dims.back() != train.num_classes) {
    throw ShapeError("teacher dims must start at d and end at the class count");
  }
  const LabeledCorpus& scored = eval ? *eval : train;
  Trainer trainer(init_net(layer_dims, activation, cfg.seed), cfg);
  TeacherFit best{trainer.net(), -1.0, 0, false};
  for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
    trainer.train_epoch_labels(train.embeddings, train.labels);
    const double acc = accuracy(trainer.net(), scored);
    if (acc > best.accuracy) {
      best.net = trainer.net();
      best.accuracy = acc;
    }
    best.epochs = epoch;
    if (acc >= target_acc) {
      best.net = trainer.net();
      best.accuracy = acc;
      best.reached_target = true;
      break;
    }
  }
  return best;
}

NeuralNet quantize_to_f32(NeuralNet net) {
  for (auto& l : net.layers) {
    for (double& w : l.weights.values()) w = static_cast<double>(static_cast<float>(w));
    for (double& b : l.bias) b = static_cast<double>(static_cast<float>(b));
  }
  return net;
}

std::vector<std::byte> encode_net(const NeuralNet& net) {
  net.validate();
  nlohmann::json header = {{"format", "sage-net"},
                           {"format_version", 1},
                           {"layer_dims", net.layer_dims},
                           {"activation", to_string(net.activation)},
                           {"seed", net.seed}};
  const std::string text = header.dump() + "\n";
  std::vector<std::byte> out(text.size());
  std::memcpy(out.data(), text.data(), text.size());
  for (const auto& l : net.layers) {
    for (double w : l.weights.values()) io::put_f32(out, static_cast<float>(w));
    for (double b : l.bias) io::put_f32(out, static_cast<float>(b));
  }
  return out;
}

NeuralNet decode_net(std::span<const std::byte> bytes) {
  const auto* begin = reinterpret_cast<const char*>(bytes.data());
  const auto* newline = std::find(begin, begin + bytes.size(), '\n');
  if (newline == begin + bytes.size()) {
    throw ParseError("missing header terminator", bytes.size(), ParseError::Location::byte_offset);
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(begin, newline);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid checkpoint header: ") + e.what(), 0, ParseError::Location::byte_offset);
  }
  NeuralNet net;
  try {
    if (header.at("format").get<std::string>() != "sage-net" || header.at("format_version").get<int>() != 1) {
      throw ParseError("unsupported checkpoint format", 0, ParseError::Location::byte_offset);
    }
    net.layer_dims = header.at("layer_dims").get<std::vector<std::uint32_t>>();
    net.activation = activation_from_string(header.at("activation").get<std::string>());
    net.seed = header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid checkpoint header: ") + e.what(), 0, ParseError::Location::byte_offset);
  }
  if (net.layer_dims.size() < 2 ||
      std::any_of(net.layer_dims.begin(), net.layer_dims.end(), [](auto d) { return d == 0; })) {
    throw ParseError("invalid layer_dims in header", 0, ParseError::Location::byte_offset);
  }
  std::size_t offset = static_cast<std::size_t>(newline - begin) + 1;
  for (std::size_t i = 0; i + 1 < net.layer_dims.size(); ++i) {
    const std::size_t fan_in = net.layer_dims[i], fan_out = net.layer_dims[i + 1];
    const std::size_t count = fan_in * fan_out + fan_out;
    if (bytes.size() < offset + 4 * count) {
      throw ParseError("truncated parameters", bytes.size(), ParseError::Location::byte_offset);
    }
    DenseLayer layer{Matrix<double>(fan_in, fan_out), std::vector<double>(fan_out)};
    for (double& w : layer.weights.values()) {
      w = io::get_f32(bytes, offset);
      offset += 4;
    }
    for (double& b : layer.bias) {
      b = io::get_f32(bytes, offset);
      offset += 4;
    }
    net.layers.push_back(std::move(layer));
  }
  if (offset != bytes.size()) {
    throw ParseError("unexpected trailing bytes", offset, ParseError::Location::byte_offset);
  }
  net.validate();
  return net;
}

void save_net(const NeuralNet& net, const std::string& path) { io::write_file(path, encode_net(net)); }

NeuralNet load_net(const std::string& path) { return decode_net(io::read_file(path)); }

}  // namespace sage
