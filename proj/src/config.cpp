#include <algorithm>
#include <charconv>
#include <cmath>

#include "sage/curriculum.hpp"

namespace sage {

using nlohmann::json;

namespace {

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

/// Read-side view of one JSON object that rejects keys outside `allowed`.
class Section {
public:
  Section(const json& j, std::string path, std::initializer_list<const char*> allowed,
          const std::vector<std::string>& extra = {})
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_.empty() ? "config" : path_, "expected a JSON object");
    for (const auto& [key, _] : j_.items()) {
      const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) ||
                         std::find(extra.begin(), extra.end(), key) != extra.end();
      if (!known) throw ValidationError(join_path(path_, key), "unknown key '" + key + "'");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) const { return j_.at(key); }
  std::string path(const char* key) const { return join_path(path_, key); }

  void read(const char* key, double& out) const {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_number()) throw ValidationError(path(key), "expected a number");
    out = v.get<double>();
  }

  template <typename U>
    requires std::is_unsigned_v<U>
  void read(const char* key, U& out) const {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_number_unsigned()) throw ValidationError(path(key), "expected a non-negative integer");
    const auto raw = v.get<std::uint64_t>();
    if (raw > std::numeric_limits<U>::max()) throw ValidationError(path(key), "value out of range");
    out = static_cast<U>(raw);
  }

  void read(const char* key, std::string& out) const {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_string()) throw ValidationError(path(key), "expected a string");
    out = v.get<std::string>();
  }

  /// Enum field parsed from its string form; parse errors name the field.
  template <typename E, typename Parse>
  void read_enum(const char* key, E& out, Parse parse) const {
    if (!has(key)) return;
    std::string s;
    read(key, s);
    try {
      out = parse(s);
    } catch (const Error& e) {
      throw ValidationError(path(key), e.what());
    }
  }

  void read(const char* key, std::vector<std::uint32_t>& out) const {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_array()) throw ValidationError(path(key), "expected an array of positive integers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number_unsigned() || e.get<std::uint64_t>() == 0 ||
          e.get<std::uint64_t>() > std::numeric_limits<std::uint32_t>::max()) {
        throw ValidationError(path(key), "expected an array of positive integers");
      }
      out.push_back(e.get<std::uint32_t>());
    }
  }

private:
  const json& j_;
  std::string path_;
};

void read_train(const Section& parent, const char* key, TrainConfig& cfg) {
  if (!parent.has(key)) return;
  Section s(parent.at(key), parent.path(key),
            {"learning_rate", "batch_size", "optimizer", "adam_beta1", "adam_beta2", "adam_eps", "temperature",
             "loss_kind"});
  s.read("learning_rate", cfg.learning_rate);
  s.read("batch_size", cfg.batch_size);
  s.read_enum("optimizer", cfg.optimizer, optimizer_from_string);
  s.read("adam_beta1", cfg.adam_beta1);
  s.read("adam_beta2", cfg.adam_beta2);
  s.read("adam_eps", cfg.adam_eps);
  s.read("temperature", cfg.temperature);
  s.read_enum("loss_kind", cfg.loss_kind, loss_kind_from_string);
}

json train_json(const TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate}, {"batch_size", cfg.batch_size},
          {"optimizer", to_string(cfg.optimizer)}, {"adam_beta1", cfg.adam_beta1},
          {"adam_beta2", cfg.adam_beta2},         {"adam_eps", cfg.adam_eps},
          {"temperature", cfg.temperature},       {"loss_kind", to_string(cfg.loss_kind)}};
}

}  // namespace

std::string dim_label(const std::optional<std::size_t>& dim) {
  return dim ? std::to_string(*dim) : "native";
}

std::optional<std::size_t> parse_dim(const std::string& token) {
  if (token == "native") return std::nullopt;
  std::size_t value = 0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (token.empty() || ec != std::errc{} || ptr != end || value == 0) {
    throw ValidationError("dims", "unknown dimension token '" + token + "' (expected 'native' or a positive integer)");
  }
  return value;
}

void RunConfig::validate() const {
  if (corpus.mixture) {
    corpus.mixture->validate();
  } else if (corpus.path.empty()) {
    throw ValidationError("corpus", "needs either a mixture or a path");
  }
  if (teacher.checkpoint.empty()) {
    teacher.train.validate();
    if (!(teacher.target_acc >= 0.0 && teacher.target_acc <= 1.0)) {
      throw ValidationError("teacher.target_acc", "must lie in [0, 1]");
    }
  }
  student.train.validate();
  if (target_dim) {
    if (*target_dim == 0) throw ValidationError("projection.target_dim", "must be >= 1 or \"native\"");
    auto p = projection;
    p.target_dim = *target_dim;
    p.validate();
  }
  if (!(hard_fraction > 0.0 && hard_fraction <= 1.0)) throw ValidationError("hard_fraction", "must lie in (0, 1]");
  if (augmentor.k_samp == 0) throw ValidationError("augmentor.k_samp", "must be >= 1");
  if (augmentor.k_inv == 0) throw ValidationError("augmentor.k_inv", "must be >= 1");
  if (!(augmentor.jitter_scale >= 0.0) || !std::isfinite(augmentor.jitter_scale)) {
    throw ValidationError("augmentor.jitter_scale", "must be a finite value >= 0");
  }
  if (!(agreement_threshold >= 0.0 && agreement_threshold <= 1.0)) {
    throw ValidationError("agreement_threshold", "must lie in [0, 1]");
  }
  if (max_epochs < 1) throw ValidationError("max_epochs", "must be >= 1");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) throw ValidationError("eval_fraction", "must lie in (0, 1)");
  if (!(retain_base_fraction >= 0.0 && retain_base_fraction <= 1.0)) {
    throw ValidationError("retain_base_fraction", "must lie in [0, 1]");
  }
}

RunConfig run_config_from_json(const json& j, const std::vector<std::string>& extra_top_level) {
  RunConfig cfg;
  Section top(j, "",
              {"corpus", "teacher", "student", "projection", "hard_fraction", "augmentor", "agreement_threshold",
               "max_epochs", "eval_fraction", "seed", "retain_base_fraction"},
              extra_top_level);

  if (top.has("corpus")) {
    Section c(top.at("corpus"), "corpus", {"mixture", "path", "format"});
    if (c.has("mixture") == c.has("path")) throw ValidationError("corpus", "set exactly one of 'mixture' or 'path'");
    if (c.has("mixture")) {
      Section m(c.at("mixture"), "corpus.mixture",
                {"num_clusters", "d", "points_per_cluster", "cluster_std", "label_rule", "seed"});
      MixtureSpec spec;
      m.read("num_clusters", spec.num_clusters);
      m.read("d", spec.d);
      m.read("points_per_cluster", spec.points_per_cluster);
      m.read("cluster_std", spec.cluster_std);
      m.read_enum("label_rule", spec.label_rule, label_rule_from_string);
      if (m.has("seed")) {
        std::uint64_t seed = 0;
        m.read("seed", seed);
        cfg.corpus.mixture_seed = seed;
      }
      cfg.corpus.mixture = spec;
    } else {
      c.read("path", cfg.corpus.path);
      if (c.has("format")) {
        c.read_enum("format", cfg.corpus.format, io::format_from_string);
      } else {
        cfg.corpus.format = io::format_from_extension(cfg.corpus.path);
      }
    }
  } else {
    cfg.corpus.mixture = MixtureSpec{};
  }

  if (top.has("teacher")) {
    Section t(top.at("teacher"), "teacher", {"hidden", "activation", "train", "target_acc", "max_epochs", "checkpoint"});
    t.read("hidden", cfg.teacher.hidden);
    t.read_enum("activation", cfg.teacher.activation, activation_from_string);
    read_train(t, "train", cfg.teacher.train);
    t.read("target_acc", cfg.teacher.target_acc);
    t.read("max_epochs", cfg.teacher.max_epochs);
    t.read("checkpoint", cfg.teacher.checkpoint);
  }
  if (top.has("student")) {
    Section s(top.at("student"), "student", {"hidden", "activation", "train"});
    s.read("hidden", cfg.student.hidden);
    s.read_enum("activation", cfg.student.activation, activation_from_string);
    read_train(s, "train", cfg.student.train);
  }
  if (top.has("projection")) {
    Section p(top.at("projection"), "projection",
              {"target_dim", "n_neighbors", "min_dist", "spread", "epochs", "neg_sample_rate", "init"});
    if (p.has("target_dim")) {
      const auto& v = p.at("target_dim");
      if (v.is_string()) {
        cfg.target_dim = parse_dim(v.get<std::string>());
      } else if (v.is_number_unsigned() && v.get<std::uint64_t>() > 0) {
        cfg.target_dim = v.get<std::size_t>();
      } else {
        throw ValidationError("projection.target_dim", "expected a positive integer or \"native\"");
      }
    }
    p.read("n_neighbors", cfg.projection.n_neighbors);
    p.read("min_dist", cfg.projection.min_dist);
    p.read("spread", cfg.projection.spread);
    p.read("epochs", cfg.projection.epochs);
    p.read("neg_sample_rate", cfg.projection.neg_sample_rate);
    p.read_enum("init", cfg.projection.init, manifold::init_mode_from_string);
  }
  top.read("hard_fraction", cfg.hard_fraction);
  if (top.has("augmentor")) {
    Section a(top.at("augmentor"), "augmentor", {"per_seed", "k_samp", "jitter_scale", "k_inv", "kernel"});
    a.read("per_seed", cfg.augmentor.per_seed);
    a.read("k_samp", cfg.augmentor.k_samp);
    a.read("jitter_scale", cfg.augmentor.jitter_scale);
    a.read("k_inv", cfg.augmentor.k_inv);
    a.read_enum("kernel", cfg.augmentor.kernel, inverse_kernel_from_string);
  }
  top.read("agreement_threshold", cfg.agreement_threshold);
  top.read("max_epochs", cfg.max_epochs);
  top.read("eval_fraction", cfg.eval_fraction);
  top.read("seed", cfg.seed);
  top.read("retain_base_fraction", cfg.retain_base_fraction);
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json corpus;
  if (cfg.corpus.mixture) {
    const auto& m = *cfg.corpus.mixture;
    json mix = {{"num_clusters", m.num_clusters},
                {"d", m.d},
                {"points_per_cluster", m.points_per_cluster},
                {"cluster_std", m.cluster_std},
                {"label_rule", to_string(m.label_rule)}};
    if (cfg.corpus.mixture_seed) mix["seed"] = *cfg.corpus.mixture_seed;
    corpus["mixture"] = mix;
  } else {
    corpus = {{"path", cfg.corpus.path}, {"format", io::to_string(cfg.corpus.format)}};
  }

  json teacher = {{"hidden", cfg.teacher.hidden},
                  {"activation", to_string(cfg.teacher.activation)},
                  {"train", train_json(cfg.teacher.train)},
                  {"target_acc", cfg.teacher.target_acc},
                  {"max_epochs", cfg.teacher.max_epochs}};
  if (!cfg.teacher.checkpoint.empty()) teacher["checkpoint"] = cfg.teacher.checkpoint;

  json projection = {{"n_neighbors", cfg.projection.n_neighbors},
                     {"min_dist", cfg.projection.min_dist},
                     {"spread", cfg.projection.spread},
                     {"epochs", cfg.projection.epochs},
                     {"neg_sample_rate", cfg.projection.neg_sample_rate},
                     {"init", manifold::to_string(cfg.projection.init)}};
  if (cfg.target_dim) {
    projection["target_dim"] = *cfg.target_dim;
  } else {
    projection["target_dim"] = "native";
  }

  return {{"corpus", corpus},
          {"teacher", teacher},
          {"student",
           {{"hidden", cfg.student.hidden},
            {"activation", to_string(cfg.student.activation)},
            {"train", train_json(cfg.student.train)}}},
          {"projection", projection},
          {"hard_fraction", cfg.hard_fraction},
          {"augmentor",
           {{"per_seed", cfg.augmentor.per_seed},
            {"k_samp", cfg.augmentor.k_samp},
            {"jitter_scale", cfg.augmentor.jitter_scale},
            {"k_inv", cfg.augmentor.k_inv},
            {"kernel", to_string(cfg.augmentor.kernel)}}},
          {"agreement_threshold", cfg.agreement_threshold},
          {"max_epochs", cfg.max_epochs},
          {"eval_fraction", cfg.eval_fraction},
          {"seed", cfg.seed},
          {"retain_base_fraction", cfg.retain_base_fraction}};
}

}  // namespace sage
