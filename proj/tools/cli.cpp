#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "plot.hpp"
#include "sage/curriculum.hpp"
#include "sage/log.hpp"
#include "sage/rng.hpp"

namespace sage::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDefaultDims = "native,2,3,4,8,16";

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string format = "json";
};

/// RunConfig plus the CLI-only keys of a config file.
struct CliConfig {
  RunConfig run;
  std::string output_dir;
  bool write_report = true;
  bool write_plots = false;
  bool with_baseline = false;
};

/// Error raised by the CLI layer for bad flag combinations.
class UsageError : public Error {
public:
  using Error::Error;
};

bool read_bool(const json& j, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw ValidationError(key, "expected true or false");
  return j.at(key).get<bool>();
}

CliConfig load_config(const std::string& path) {
  CliConfig cfg;
  if (path.empty()) return cfg;
  const std::string text = io::read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": invalid JSON: " + e.what(), e.byte, ParseError::Location::byte_offset);
  }
  cfg.run = run_config_from_json(j, {"output_dir", "write_report", "write_plots", "with_baseline"});
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) throw ValidationError("output_dir", "expected a string");
    cfg.output_dir = j.at("output_dir").get<std::string>();
  }
  cfg.write_report = read_bool(j, "write_report", cfg.write_report);
  cfg.write_plots = read_bool(j, "write_plots", cfg.write_plots);
  cfg.with_baseline = read_bool(j, "with_baseline", cfg.with_baseline);
  return cfg;
}

fs::path output_dir(const Globals& g, const CliConfig& cfg, const char* fallback) {
  fs::path dir = !g.out.empty() ? fs::path(g.out) : !cfg.output_dir.empty() ? fs::path(cfg.output_dir) : fs::path(fallback);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create output directory: " + ec.message());
  return dir;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

int exit_code(const std::exception& e) {
  if (dynamic_cast<const DivergenceError*>(&e) != nullptr) return kExitNumeric;
  if (dynamic_cast<const ValidationError*>(&e) != nullptr || dynamic_cast<const ParseError*>(&e) != nullptr ||
      dynamic_cast<const IoError*>(&e) != nullptr || dynamic_cast<const DataError*>(&e) != nullptr ||
      dynamic_cast<const ShapeError*>(&e) != nullptr || dynamic_cast<const UsageError*>(&e) != nullptr) {
    return kExitUsage;
  }
  return kExitNumeric;
}

int exit_for(StopReason reason) {
  switch (reason) {
    case StopReason::threshold_met: return kExitOk;
    case StopReason::max_epochs: return kExitUnconverged;
    case StopReason::aborted: return kExitNumeric;
  }
  return kExitNumeric;
}

// gen-data -------------------------------------------------------------------

struct GenDataArgs {
  std::optional<std::uint32_t> clusters, dim, per_cluster;
  std::optional<double> std_dev;
  std::optional<std::string> label_rule;
};

int cmd_gen_data(const Globals& g, const GenDataArgs& a) {
  const CliConfig cfg = load_config(g.config);
  if (!cfg.run.corpus.mixture && !cfg.run.corpus.path.empty()) {
    throw UsageError("gen-data needs a mixture corpus, but the config names a file");
  }
  MixtureSpec spec = cfg.run.corpus.mixture.value_or(MixtureSpec{});
  spec.seed = cfg.run.corpus.mixture_seed.value_or(derive_seed(cfg.run.seed, "corpus"));
  if (a.clusters) spec.num_clusters = *a.clusters;
  if (a.dim) spec.d = *a.dim;
  if (a.per_cluster) spec.points_per_cluster = *a.per_cluster;
  if (a.std_dev) spec.cluster_std = *a.std_dev;
  if (a.label_rule) spec.label_rule = label_rule_from_string(*a.label_rule);
  if (g.seed) spec.seed = *g.seed;
  spec.validate();

  const LabeledCorpus corpus = generate_corpus(spec);
  const fs::path dir = output_dir(g, cfg, "sage-data");
  const auto bytes = io::encode_embl(corpus);
  io::write_file(dir / "corpus.embl", bytes);
  if (g.format == "csv") io::save_corpus(corpus, dir / "corpus.csv", io::Format::csv);

  const json manifest = {{"format_version", "1"},
                         {"file", "corpus.embl"},
                         {"spec",
                          {{"num_clusters", spec.num_clusters},
                           {"d", spec.d},
                           {"points_per_cluster", spec.points_per_cluster},
                           {"cluster_std", spec.cluster_std},
                           {"label_rule", to_string(spec.label_rule)},
                           {"seed", spec.seed}}},
                         {"n", corpus.size()},
                         {"d", corpus.dim()},
                         {"num_classes", corpus.num_classes},
                         {"checksum", io::checksum_hex(bytes)}};
  io::write_text(dir / "manifest.json", dump(manifest));
  std::cout << (dir / "corpus.embl").string() << " n=" << corpus.size() << " d=" << corpus.dim()
            << " checksum=" << io::checksum_hex(bytes) << "\n";
  return kExitOk;
}

// fit-teacher ----------------------------------------------------------------

int cmd_fit_teacher(const Globals& g) {
  CliConfig cfg = load_config(g.config);
  if (g.seed) cfg.run.seed = *g.seed;
  cfg.run.teacher.checkpoint.clear();
  const WarmUpResult warm = warm_up(cfg.run);
  const fs::path dir = output_dir(g, cfg, "sage-teacher");
  save_net(warm.teacher, (dir / "teacher.net").string());
  const json summary = {{"format_version", "1"},
                        {"eval_accuracy", warm.teacher_fit.accuracy},
                        {"epochs", warm.teacher_fit.epochs},
                        {"reached_target", warm.teacher_fit.reached_target},
                        {"target_acc", cfg.run.teacher.target_acc},
                        {"layer_dims", warm.teacher.layer_dims}};
  io::write_text(dir / "teacher.json", dump(summary));
  std::cout << "teacher eval accuracy " << warm.teacher_fit.accuracy << " after " << warm.teacher_fit.epochs
            << " epochs -> " << (dir / "teacher.net").string() << "\n";
  return warm.teacher_fit.reached_target ? kExitOk : kExitUnconverged;
}

// distill --------------------------------------------------------------------

struct DistillArgs {
  std::optional<std::size_t> max_epochs;
  bool with_baseline = false;
  std::string teacher;
};

std::string loss_profile_csv(const LossProfile& profile) {
  const auto rank = profile.ranks();
  std::ostringstream out;
  out << "index,loss,rank\n";
  for (std::size_t i = 0; i < profile.size(); ++i) {
    out << i << ',' << io::format_double(profile.losses[i]) << ',' << rank[i] << '\n';
  }
  return out.str();
}

LossProfile parse_loss_profile_csv(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != "index,loss,rank") throw ParseError(name + ": unexpected header", 1, ParseError::Location::line);
  std::vector<double> losses;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string idx, loss, rank;
    if (!std::getline(row, idx, ',') || !std::getline(row, loss, ',') || !std::getline(row, rank)) {
      throw ParseError(name + ": expected 3 fields", line_no, ParseError::Location::line);
    }
    try {
      if (std::stoull(idx) != losses.size()) throw ParseError(name + ": rows out of order", line_no, ParseError::Location::line);
      losses.push_back(std::stod(loss));
    } catch (const std::logic_error&) {
      throw ParseError(name + ": malformed number", line_no, ParseError::Location::line);
    }
  }
  return make_profile(std::move(losses));
}

void write_run_artifacts(const fs::path& dir, const RunArtifacts& art) {
  save_net(art.teacher, (dir / "teacher.net").string());
  save_net(art.student, (dir / "student.net").string());
  if (!art.last_epoch) return;
  const EpochSnapshot& s = *art.last_epoch;
  io::save_embeddings(s.dataset, dir / "dataset.emb1", io::Format::emb1);
  io::save_embeddings(s.coords, dir / "coords.emb1", io::Format::emb1);
  io::save_embeddings(s.batch.low_points, dir / "synthetic_low.emb1", io::Format::emb1);
  io::save_embeddings(s.batch.high_vectors, dir / "synthetic_high.emb1", io::Format::emb1);
  io::write_text(dir / "provenance.jsonl", provenance_jsonl(s.batch.provenance));
  io::write_text(dir / "losses.csv", loss_profile_csv(s.profile));
  io::write_text(dir / "hard_set.json", dump({{"epoch", s.epoch}, {"indices", s.seeds}}));
  if (s.projection) manifold::save_model(*s.projection, (dir / "projection.model").string());
}

int cmd_inspect_dir(const fs::path& run_dir, const fs::path& out_dir);

int cmd_distill(const Globals& g, const DistillArgs& a) {
  CliConfig cfg = load_config(g.config);
  if (g.seed) cfg.run.seed = *g.seed;
  if (a.max_epochs) cfg.run.max_epochs = *a.max_epochs;
  if (!a.teacher.empty()) cfg.run.teacher.checkpoint = a.teacher;
  cfg.run.validate();
  const fs::path dir = output_dir(g, cfg, "sage-run");

  RunArtifacts art;
  const RunReport report = run_adaptive(cfg.run, &art);
  if (cfg.write_report) io::write_text(dir / "report.json", dump(to_json(report)));
  write_run_artifacts(dir, art);
  if (cfg.write_plots && art.last_epoch) cmd_inspect_dir(dir, dir);

  std::cout << "adaptive: " << to_string(report.stop_reason) << " after " << report.epochs.size()
            << " epochs, train agreement " << report.final_train_agreement() << ", eval agreement "
            << report.final_eval_agreement() << "\n";

  if (a.with_baseline || cfg.with_baseline) {
    const RunReport base = run_baseline(cfg.run);
    if (cfg.write_report) io::write_text(dir / "baseline_report.json", dump(to_json(base)));
    std::cout << "baseline: " << to_string(base.stop_reason) << " after " << base.epochs.size()
              << " epochs, train agreement " << base.final_train_agreement() << ", eval agreement "
              << base.final_eval_agreement() << "\n";
  }
  if (!report.error.empty()) std::cerr << "error: " << report.error << "\n";
  return exit_for(report.stop_reason);
}

// ablate ---------------------------------------------------------------------

struct AblateArgs {
  std::string dims = kDefaultDims;
  std::size_t jobs = 1;
  std::optional<std::size_t> max_epochs;
};

std::vector<std::optional<std::size_t>> parse_dims(const std::string& list) {
  std::vector<std::optional<std::size_t>> dims;
  std::istringstream in(list);
  std::string token;
  while (std::getline(in, token, ',')) dims.push_back(parse_dim(token));
  if (dims.empty()) throw ValidationError("dims", "must name at least one dimension");
  return dims;
}

int cmd_ablate(const Globals& g, const AblateArgs& a) {
  const auto dims = parse_dims(a.dims);
  CliConfig cfg = load_config(g.config);
  if (g.seed) cfg.run.seed = *g.seed;
  if (a.max_epochs) cfg.run.max_epochs = *a.max_epochs;
  if (a.jobs == 0) throw ValidationError("jobs", "must be >= 1");
  cfg.run.validate();
  const fs::path dir = output_dir(g, cfg, "sage-ablation");

  const auto rows = run_ablation(cfg.run, dims, a.jobs);
  const std::string csv = ablation_csv(rows);
  const json table = ablation_json(rows);
  io::write_text(dir / "ablation.csv", csv);
  io::write_text(dir / "ablation.json", dump(table));
  std::cout << (g.format == "csv" ? csv : dump(table));
  const bool all_failed = std::all_of(rows.begin(), rows.end(), [](const AblationRow& r) { return !r.error.empty(); });
  return all_failed ? kExitNumeric : kExitOk;
}

// inspect --------------------------------------------------------------------

fs::path require_file(const fs::path& dir, const char* name) {
  const fs::path p = dir / name;
  if (!fs::is_regular_file(p)) throw IoError(p.string(), "missing run artifact " + std::string(name));
  return p;
}

int cmd_inspect_dir(const fs::path& run_dir, const fs::path& out_dir) {
  const auto dataset = io::load_embeddings(require_file(run_dir, "dataset.emb1"), io::Format::emb1);
  const auto coords = io::load_embeddings(require_file(run_dir, "coords.emb1"), io::Format::emb1);
  const auto low = io::load_embeddings(require_file(run_dir, "synthetic_low.emb1"), io::Format::emb1);
  const auto high = io::load_embeddings(require_file(run_dir, "synthetic_high.emb1"), io::Format::emb1);
  const auto provenance = parse_provenance_jsonl(io::read_text(require_file(run_dir, "provenance.jsonl")));
  const auto profile = parse_loss_profile_csv(io::read_text(require_file(run_dir, "losses.csv")), "losses.csv");
  const json hard_json = json::parse(io::read_text(require_file(run_dir, "hard_set.json")));

  if (coords.rows() != dataset.rows() || profile.size() != dataset.rows()) {
    throw ShapeError("run artifacts disagree on the dataset size");
  }
  if (provenance.size() != high.rows() || low.rows() != high.rows()) {
    throw ShapeError("synthetic artifacts disagree on the batch size");
  }

  ScatterInput in;
  in.coords = coords;
  in.losses = profile.losses;
  in.hard.assign(dataset.rows(), false);
  for (const auto& v : hard_json.at("indices")) {
    const auto idx = v.get<std::size_t>();
    if (idx >= dataset.rows()) throw DataError("hard index out of range", idx);
    in.hard[idx] = true;
  }
  in.synthetic = low;
  const std::size_t m = coords.cols();
  const bool native = m == dataset.cols() && !fs::exists(run_dir / "projection.model");
  std::string title = "epoch " + std::to_string(hard_json.value("epoch", 0)) + ": " +
                      std::to_string(dataset.rows()) + " points colored by loss, " +
                      std::to_string(std::count(in.hard.begin(), in.hard.end(), true)) + " hard, " +
                      std::to_string(low.rows()) + " synthetic";
  if (m != 2) {
    title += native ? " (axes 1-2 of the native " + std::to_string(m) + "-D space)"
                    : " (axes 1-2 of the " + std::to_string(m) + "-D projection)";
  }
  in.title = title;

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  io::write_text(out_dir / "scatter.svg", scatter_svg(in));
  io::write_text(out_dir / "loss_profile.csv", loss_profile_csv(profile));

  std::vector<std::size_t> origin(provenance.size());
  for (std::size_t r = 0; r < origin.size(); ++r) {
    if (provenance[r].seed_index >= dataset.rows()) throw DataError("provenance seed index out of range", r);
    origin[r] = provenance[r].seed_index;
  }
  const auto fid = fidelity(dataset.gather(std::span<const std::size_t>(origin)), high);
  json per = json::array();
  for (const auto& [cos, mse] : fid.per_instance) per.push_back({{"cosine", cos}, {"mse", mse}});
  io::write_text(out_dir / "fidelity.json", dump({{"format_version", "1"},
                                                  {"mean_cosine", fid.mean_cosine},
                                                  {"mean_mse", fid.mean_mse},
                                                  {"per_instance", per}}));
  return kExitOk;
}

int cmd_inspect(const Globals& g, const std::string& run_dir) {
  const fs::path out = g.out.empty() ? fs::path(run_dir) : fs::path(g.out);
  const int code = cmd_inspect_dir(run_dir, out);
  std::cout << (out / "scatter.svg").string() << "\n";
  return code;
}

}  // namespace

int run_cli(int argc, char** argv) {
  configure_logging_from_env();

  CLI::App app{"Adaptive distillation with manifold-guided hard-example sampling"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "sage 1.0");

  Globals g;
  app.add_option("-c,--config", g.config, "JSON config file");
  app.add_option("-o,--out", g.out, "Output directory");
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--format", g.format, "Format of tabular stdout output")->check(CLI::IsMember({"json", "csv"}));

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a Gaussian-mixture corpus (EMBL + manifest)");
  gen_cmd->add_option("--clusters", gen.clusters, "Number of clusters");
  gen_cmd->add_option("--dim", gen.dim, "Embedding dimension");
  gen_cmd->add_option("--per-cluster", gen.per_cluster, "Points per cluster");
  gen_cmd->add_option("--std", gen.std_dev, "Cluster standard deviation");
  gen_cmd->add_option("--label-rule", gen.label_rule, "cluster-id or xor-of-top2-coords");

  auto* teacher_cmd = app.add_subcommand("fit-teacher", "Fit and save the teacher network");

  DistillArgs distill;
  auto* distill_cmd = app.add_subcommand("distill", "Run the adaptive distillation loop");
  distill_cmd->add_option("--max-epochs", distill.max_epochs, "Epoch budget (overrides the config)");
  distill_cmd->add_flag("--with-baseline", distill.with_baseline, "Also run the uniform-sampling baseline");
  distill_cmd->add_option("--teacher", distill.teacher, "Teacher checkpoint to load instead of fitting");

  AblateArgs ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run the projection-dimension ablation");
  ablate_cmd->add_option("--dims", ablate.dims, "Comma-separated dims, e.g. native,2,3")->capture_default_str();
  ablate_cmd->add_option("--jobs", ablate.jobs, "Arms to run concurrently")->capture_default_str();
  ablate_cmd->add_option("--max-epochs", ablate.max_epochs, "Epoch budget (overrides the config)");

  std::string run_dir;
  auto* inspect_cmd = app.add_subcommand("inspect", "Render plots and dumps for a finished run directory");
  inspect_cmd->add_option("run", run_dir, "Run directory written by distill")->required();

  for (auto* sub : {gen_cmd, teacher_cmd, distill_cmd, ablate_cmd, inspect_cmd}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(g, gen);
    if (*teacher_cmd) return cmd_fit_teacher(g);
    if (*distill_cmd) return cmd_distill(g, distill);
    if (*ablate_cmd) return cmd_ablate(g, ablate);
    if (*inspect_cmd) return cmd_inspect(g, run_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  }
  return kExitUsage;
}

}  // namespace sage::cli
