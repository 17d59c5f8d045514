#include <doctest.h>

#include <nlohmann/json.hpp>

#include "sage/curriculum.hpp"
#include "sage/rng.hpp"
#include "support.hpp"

using namespace sage;

namespace {

/// Small enough that a full run takes well under a second.
RunConfig tiny_config(std::uint64_t seed = 3) {
  RunConfig cfg;
  cfg.corpus.mixture = MixtureSpec{4, 8, 40, 0.5, LabelRule::xor_top2, 0};
  cfg.teacher.hidden = {24};
  cfg.teacher.max_epochs = 8;
  cfg.teacher.target_acc = 0.9;
  cfg.teacher.train.learning_rate = 0.01;
  cfg.student.hidden = {8};
  cfg.student.train.learning_rate = 0.01;
  cfg.projection.n_neighbors = 15;
  cfg.projection.epochs = 30;
  cfg.max_epochs = 4;
  cfg.seed = seed;
  return cfg;
}

std::string report_text(const RunReport& r) { return to_json(r, false).dump(); }

}  // namespace

TEST_CASE("max_epochs = 1 records exactly the warm-up epoch") {
  auto cfg = tiny_config();
  cfg.max_epochs = 1;
  const auto r = run_adaptive(cfg);
  REQUIRE(r.epochs.size() == 1);
  CHECK(r.epochs[0].epoch == 1);
  CHECK_FALSE(r.epochs[0].fidelity.has_value());
  CHECK(r.stop_reason == (r.epochs[0].train_agreement >= cfg.agreement_threshold ? StopReason::threshold_met
                                                                                 : StopReason::max_epochs));
}

TEST_CASE("agreement_threshold = 0 stops after epoch 1 with threshold_met") {
  auto cfg = tiny_config();
  cfg.agreement_threshold = 0.0;
  for (const auto& r : {run_adaptive(cfg), run_baseline(cfg)}) {
    CHECK(r.epochs.size() == 1);
    CHECK(r.stop_reason == StopReason::threshold_met);
  }
}

TEST_CASE("warm-up with a zero learning rate leaves the student at its initialization") {
  auto cfg = tiny_config();
  cfg.student.train.learning_rate = 0.0;
  const auto w = warm_up(cfg);
  const auto init = init_net({8, 8, 2}, cfg.student.activation, derive_seed(cfg.seed, "student"));
  CHECK(w.student.net() == init);
  CHECK(w.record.epoch == 1);
  CHECK(w.record.dataset_size == w.base.train.size());
}

TEST_CASE("a student copied from the teacher meets the threshold at epoch 1") {
  const auto cfg = tiny_config();
  const auto w = warm_up(cfg);
  const auto r = run_adaptive_with(cfg, w.teacher, w.teacher);
  REQUIRE(r.epochs.size() == 1);
  CHECK(r.stop_reason == StopReason::threshold_met);
  CHECK(r.epochs[0].eval_agreement == 1.0);
}

TEST_CASE("with hard fraction 1 adaptive and baseline build equally sized batches") {
  auto cfg = tiny_config();
  cfg.hard_fraction = 1.0;
  cfg.agreement_threshold = 1.0;
  const auto a = run_adaptive(cfg), b = run_baseline(cfg);
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t e = 0; e < a.epochs.size(); ++e) CHECK(a.epochs[e].dataset_size == b.epochs[e].dataset_size);
  CHECK(a.mode == "adaptive");
  CHECK(b.mode == "baseline");
}

TEST_CASE("runs are deterministic for a fixed master seed") {
  const auto cfg = tiny_config();
  CHECK(report_text(run_adaptive(cfg)) == report_text(run_adaptive(cfg)));
  CHECK(report_text(run_baseline(cfg)) == report_text(run_baseline(cfg)));
  auto native = cfg;
  native.target_dim = std::nullopt;
  CHECK(report_text(run_adaptive(native)) == report_text(run_adaptive(native)));
  CHECK(report_text(run_adaptive(tiny_config(4))) != report_text(run_adaptive(cfg)));
}

TEST_CASE("stopping invariant and report value ranges across thresholds") {
  for (double threshold : {0.5, 0.8, 0.95, 1.0}) {
    auto cfg = tiny_config(7);
    cfg.agreement_threshold = threshold;
    const auto r = run_adaptive(cfg);
    REQUIRE_FALSE(r.epochs.empty());
    CHECK(r.epochs.size() <= cfg.max_epochs);
    for (std::size_t e = 0; e + 1 < r.epochs.size(); ++e) CHECK(r.epochs[e].train_agreement < threshold);
    if (r.stop_reason == StopReason::threshold_met) CHECK(r.epochs.back().train_agreement >= threshold);
    if (r.stop_reason == StopReason::max_epochs) CHECK(r.epochs.size() == cfg.max_epochs);
    for (std::size_t e = 0; e < r.epochs.size(); ++e) {
      const auto& rec = r.epochs[e];
      CHECK(rec.epoch == e + 1);
      for (double v : {rec.train_agreement, rec.eval_agreement, rec.eval_gold_accuracy}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      CHECK(rec.drift >= 0.0);
      CHECK(rec.fidelity.has_value() == (e > 0));
    }
  }
}

TEST_CASE("eval split is the untouched base split; synthetic rows carry provenance") {
  auto cfg = tiny_config(5);
  cfg.agreement_threshold = 1.0;
  cfg.max_epochs = 3;
  RunArtifacts art;
  const auto r = run_adaptive(cfg, &art);
  REQUIRE(r.epochs.size() >= 2);

  // Independent reconstruction of the base split from the seed streams.
  MixtureSpec spec = *cfg.corpus.mixture;
  spec.seed = derive_seed(cfg.seed, "corpus");
  const Split base = split(generate_corpus(spec), cfg.eval_fraction, derive_seed(cfg.seed, "split"));
  CHECK(warm_up(cfg).base.eval == base.eval);
  const double eval = agreement(forward(art.student, base.eval.embeddings), forward(art.teacher, base.eval.embeddings));
  CHECK(eval == r.final_eval_agreement());

  REQUIRE(art.last_epoch.has_value());
  const auto& snap = *art.last_epoch;
  CHECK(snap.epoch == r.epochs.size());
  CHECK(snap.batch.provenance.size() == snap.batch.size());
  CHECK(r.epochs.back().dataset_size == snap.batch.size());
  std::vector<std::size_t> seeds = snap.seeds;
  std::sort(seeds.begin(), seeds.end());
  for (const auto& p : snap.batch.provenance) CHECK(std::binary_search(seeds.begin(), seeds.end(), p.seed_index));
  CHECK(snap.batch.teacher_logits == forward(art.teacher, snap.batch.high_vectors));
  if (snap.epoch > 2) CHECK(snap.dataset != base.train.embeddings);
}

TEST_CASE("retained base rows are appended to the synthetic dataset") {
  auto cfg = tiny_config();
  cfg.agreement_threshold = 1.0;
  cfg.max_epochs = 2;
  cfg.retain_base_fraction = 0.5;
  const auto r = run_adaptive(cfg);
  if (r.epochs.size() == 2) {
    const std::size_t base = r.epochs[0].dataset_size;
    CHECK(r.epochs[1].dataset_size == base + base / 2);
  }
}

TEST_CASE("dataset_drift is zero on the base set and the mean 1-NN distance otherwise") {
  const auto base = test::random_matrix(30, 4, 1);
  CHECK(dataset_drift(base, base) == 0.0);
  const auto other = test::random_matrix(10, 4, 2);
  const auto nn = test::oracle_knn([&] {
    EmbeddingMatrix all = other;
    all.append_rows(base);
    return all;
  }(), 39);
  double expect = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    for (const auto& [d, j] : nn[i]) {
      if (j >= 10) {
        expect += d;
        break;
      }
    }
  }
  CHECK(std::abs(dataset_drift(other, base) - expect / 10.0) < 1e-9);
}

TEST_CASE("ablation: one row per dim, deterministic, independent of jobs") {
  auto cfg = tiny_config();
  cfg.max_epochs = 2;
  cfg.agreement_threshold = 1.0;
  const auto one = run_ablation(cfg, {2});
  CHECK(one.size() == 1);
  const auto csv = ablation_csv(one);
  CHECK(csv.rfind(std::string(kAblationCsvHeader) + "\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);

  const std::vector<std::optional<std::size_t>> dims{std::nullopt, 2, 3};
  const auto serial = run_ablation(cfg, dims, 1);
  const auto parallel = run_ablation(cfg, dims, 3);
  CHECK(ablation_csv(serial) == ablation_csv(parallel));
  CHECK(ablation_json(serial) == ablation_json(run_ablation(cfg, dims, 1)));
  REQUIRE(serial.size() == 3);
  CHECK(ablation_csv(serial).find("\nnative,") != std::string::npos);
  for (const auto& row : serial) CHECK(row.error.empty());
}

TEST_CASE("config: strict parsing names the offending key; round trip through JSON") {
  const auto j = to_json(tiny_config());
  CHECK(to_json(run_config_from_json(j)) == j);

  auto field_of = [](const nlohmann::json& doc) -> std::string {
    try {
      run_config_from_json(doc);
    } catch (const ValidationError& e) {
      return e.field();
    }
    return "";
  };
  auto bad = j;
  bad["projection"]["n_neighbours"] = 10;
  CHECK(field_of(bad) == "projection.n_neighbours");
  bad = j;
  bad["max_epoch"] = 3;
  CHECK(field_of(bad) == "max_epoch");
  bad = j;
  bad["max_epochs"] = 0;
  CHECK(field_of(bad) == "max_epochs");
  bad = j;
  bad["student"]["train"]["loss_kind"] = "kl";
  CHECK(field_of(bad) == "student.train.loss_kind");
  bad = j;
  bad["projection"]["target_dim"] = "native";
  CHECK(field_of(bad).empty());
  CHECK_FALSE(run_config_from_json(bad).target_dim.has_value());

  CHECK(parse_dim("native") == std::nullopt);
  CHECK(parse_dim("16") == std::optional<std::size_t>{16});
  CHECK_THROWS_AS(parse_dim("2d"), ValidationError);
  CHECK_THROWS_AS(parse_dim("0"), ValidationError);
}

TEST_CASE("report JSON: schema keys, timing isolated") {
  const auto r = run_adaptive(tiny_config());
  const auto full = to_json(r, true), bare = to_json(r, false);
  CHECK(full.at("format_version") == "1");
  CHECK(full.contains("timing"));
  CHECK_FALSE(bare.contains("timing"));
  for (const char* key : {"mode", "stop_reason", "epochs", "config", "teacher", "final_eval_agreement"}) {
    CHECK(bare.contains(key));
  }
  for (const auto& e : bare.at("epochs")) {
    for (const char* key : {"epoch", "mean_loss", "train_agreement", "eval_agreement", "hard_set_mean_loss",
                            "fidelity", "drift"}) {
      CHECK(e.contains(key));
    }
  }
  for (const char* key : {"warm_up_seconds", "rank_seconds", "project_seconds", "sample_seconds",
                          "invert_seconds", "train_seconds", "evaluate_seconds", "total_seconds"}) {
    CHECK(full.at("timing").contains(key));
  }
}
