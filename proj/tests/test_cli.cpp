#include <doctest.h>

#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cli.hpp"
#include "sage/curriculum.hpp"
#include "sage/io.hpp"
#include "support.hpp"

using namespace sage;
using nlohmann::json;

namespace {

struct CliResult {
  int code = 0;
  std::string err;
};

CliResult invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "sage");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream err, out;
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data());
  std::cerr.rdbuf(old_err);
  std::cout.rdbuf(old_out);
  return {code, err.str()};
}

json tiny_config_json(std::optional<std::size_t> dim = 2) {
  RunConfig cfg;
  cfg.corpus.mixture = MixtureSpec{4, 8, 40, 0.5, LabelRule::xor_top2, 0};
  cfg.teacher.hidden = {24};
  cfg.teacher.max_epochs = 8;
  cfg.teacher.target_acc = 0.9;
  cfg.teacher.train.learning_rate = 0.01;
  cfg.student.hidden = {8};
  cfg.projection.n_neighbors = 15;
  cfg.projection.epochs = 30;
  cfg.target_dim = dim;
  cfg.agreement_threshold = 1.0;
  cfg.max_epochs = 3;
  cfg.seed = 2;
  return to_json(cfg);
}

std::string write_config(const test::TempDir& dir, const json& j, const std::string& name = "cfg.json") {
  const auto path = (dir / name).string();
  io::write_text(path, j.dump(2));
  return path;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("gen-data: counts, manifest, stable checksum, invalid std") {
  test::TempDir dir("cli_gen");
  const auto out = (dir / "data").string();
  const std::vector<std::string> args{"gen-data", "--clusters", "3", "--dim", "32", "--per-cluster", "200",
                                      "--std", "0.5", "--seed", "42", "-o", out};
  REQUIRE(invoke(args).code == 0);
  const auto corpus = io::load_corpus(dir / "data/corpus.embl", io::Format::emb1);
  CHECK(corpus.size() == 600);
  CHECK(corpus.dim() == 32);
  const auto manifest = json::parse(io::read_text(dir / "data/manifest.json"));
  CHECK(manifest.at("n") == 600);
  CHECK(manifest.at("d") == 32);
  const std::string checksum = manifest.at("checksum");
  CHECK(checksum == io::checksum_hex(io::read_file(dir / "data/corpus.embl")));

  REQUIRE(invoke(args).code == 0);
  CHECK(json::parse(io::read_text(dir / "data/manifest.json")).at("checksum") == checksum);

  const auto bad = invoke({"gen-data", "--std", "-1", "-o", out});
  CHECK(bad.code == cli::kExitUsage);
  CHECK(bad.err.find("cluster_std") != std::string::npos);
  CHECK(invoke({"gen-data", "--no-such-flag"}).code == cli::kExitUsage);
  CHECK(invoke({}).code == cli::kExitUsage);
}

TEST_CASE("config errors exit 2 and name the problem") {
  test::TempDir dir("cli_cfg");
  const auto cfg = write_config(dir, tiny_config_json());
  const auto zero = invoke({"distill", "-c", cfg, "--max-epochs", "0", "-o", (dir / "r").string()});
  CHECK(zero.code == cli::kExitUsage);
  CHECK(zero.err.find("max_epochs") != std::string::npos);

  auto j = tiny_config_json();
  j["augmentor"]["k_sample"] = 3;
  const auto typo = invoke({"distill", "-c", write_config(dir, j, "typo.json"), "-o", (dir / "r").string()});
  CHECK(typo.code == cli::kExitUsage);
  CHECK(typo.err.find("augmentor.k_sample") != std::string::npos);

  CHECK(invoke({"distill", "-c", (dir / "missing.json").string()}).code == cli::kExitUsage);
  io::write_text(dir / "broken.json", "{\"seed\": ");
  CHECK(invoke({"distill", "-c", (dir / "broken.json").string()}).code == cli::kExitUsage);
}

TEST_CASE("distill writes a schema-conforming report and inspect renders it") {
  test::TempDir dir("cli_distill");
  const auto cfg = write_config(dir, tiny_config_json());
  const auto run = (dir / "run").string();
  const auto res = invoke({"distill", "-c", cfg, "-o", run});
  const auto report = json::parse(io::read_text(dir / "run/report.json"));
  const std::string stop = report.at("stop_reason");
  CHECK(res.code == (stop == "threshold_met" ? cli::kExitOk : cli::kExitUnconverged));

  CHECK(report.at("format_version") == "1");
  CHECK(report.at("mode") == "adaptive");
  CHECK((stop == "threshold_met" || stop == "max_epochs"));
  CHECK(report.at("epochs_used").is_number_unsigned());
  CHECK(report.at("teacher").at("eval_accuracy").is_number());
  CHECK(report.at("teacher").at("reached_target").is_boolean());
  CHECK(report.at("config").is_object());
  CHECK(report.at("error").is_null());
  CHECK(report.at("epochs").size() == report.at("epochs_used"));
  for (const auto& e : report.at("epochs")) {
    CHECK(e.at("epoch").is_number_unsigned());
    CHECK(e.at("dataset_size").is_number_unsigned());
    for (const char* k : {"mean_loss", "train_agreement", "eval_agreement", "eval_gold_accuracy", "drift"}) {
      CHECK(e.at(k).is_number());
    }
    CHECK((e.at("fidelity").is_null() || (e.at("fidelity").at("mean_cosine").is_number() &&
                                          e.at("fidelity").at("mean_mse").is_number())));
    CHECK((e.at("hard_set_mean_loss").is_null() || e.at("hard_set_mean_loss").is_number()));
  }
  for (const auto& [k, v] : report.at("timing").items()) CHECK(v.is_number());

  if (report.at("epochs").size() < 2) return;  // nothing projected
  REQUIRE(invoke({"inspect", run}).code == 0);
  const auto svg = io::read_text(dir / "run/scatter.svg");
  const auto dataset = io::load_embeddings(dir / "run/dataset.emb1", io::Format::emb1);
  CHECK(count_of(svg, "<circle class=\"pt") == dataset.rows());
  CHECK(count_of(svg, "<rect class=\"syn\"") ==
        io::load_embeddings(dir / "run/synthetic_low.emb1", io::Format::emb1).rows());
  const auto losses = io::read_text(dir / "run/loss_profile.csv");
  CHECK(std::count(losses.begin(), losses.end(), '\n') == static_cast<long>(dataset.rows()) + 1);
  const auto fid = json::parse(io::read_text(dir / "run/fidelity.json"));
  CHECK(fid.at("mean_cosine").is_number());

  // Rendering is byte-reproducible.
  const auto again = (dir / "again").string();
  REQUIRE(invoke({"inspect", run, "-o", again}).code == 0);
  CHECK(io::read_text(dir / "again/scatter.svg") == svg);

  std::filesystem::remove(dir / "run/losses.csv");
  const auto missing = invoke({"inspect", run});
  CHECK(missing.code == cli::kExitUsage);
  CHECK(missing.err.find("losses.csv") != std::string::npos);
}

TEST_CASE("inspect notes the axes used when the projection is not 2-D") {
  test::TempDir dir("cli_3d");
  const auto cfg = write_config(dir, tiny_config_json(3));
  const auto run = (dir / "run").string();
  invoke({"distill", "-c", cfg, "-o", run});
  const auto report = json::parse(io::read_text(dir / "run/report.json"));
  REQUIRE(report.at("epochs").size() >= 2);
  REQUIRE(invoke({"inspect", run}).code == 0);
  const auto svg = io::read_text(dir / "run/scatter.svg");
  const auto title_start = svg.find("<title>"), title_end = svg.find("</title>");
  REQUIRE(title_start != std::string::npos);
  const auto title = svg.substr(title_start, title_end - title_start);
  CHECK(title.find("axes 1-2") != std::string::npos);
  CHECK(title.find("3-D") != std::string::npos);
}

TEST_CASE("ablate: header, row counts, unknown dims") {
  test::TempDir dir("cli_ablate");
  auto j = tiny_config_json();
  j["max_epochs"] = 2;
  const auto cfg = write_config(dir, j);
  const auto out = (dir / "abl").string();
  REQUIRE(invoke({"ablate", "-c", cfg, "--dims", "2", "-o", out}).code == 0);
  const auto csv = io::read_text(dir / "abl/ablation.csv");
  CHECK(csv.substr(0, csv.find('\n')) == "dim,final_eval_agreement,epochs_used,mean_fidelity_cosine,mean_fidelity_mse");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(json::parse(io::read_text(dir / "abl/ablation.json")).at("rows").size() == 1);

  REQUIRE(invoke({"ablate", "-c", cfg, "-o", out}).code == 0);
  const auto full = io::read_text(dir / "abl/ablation.csv");
  CHECK(std::count(full.begin(), full.end(), '\n') == 7);

  const auto bad = invoke({"ablate", "-c", cfg, "--dims", "2,seven", "-o", out});
  CHECK(bad.code == cli::kExitUsage);
  CHECK(bad.err.find("seven") != std::string::npos);
}
