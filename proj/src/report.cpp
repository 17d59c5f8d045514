#include <cmath>
#include <sstream>

#include "sage/curriculum.hpp"
#include "sage/io.hpp"

namespace sage {

using nlohmann::json;

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json epoch_json(const EpochRecord& e) {
  json j = {{"epoch", e.epoch},
            {"dataset_size", e.dataset_size},
            {"mean_loss", number_or_null(e.mean_loss)},
            {"train_agreement", e.train_agreement},
            {"eval_agreement", e.eval_agreement},
            {"eval_gold_accuracy", e.eval_gold_accuracy},
            {"hard_set_mean_loss", e.hard_set_mean_loss ? number_or_null(*e.hard_set_mean_loss) : json(nullptr)},
            {"drift", e.drift},
            {"spectral_fell_back", e.spectral_fell_back}};
  if (e.fidelity) {
    j["fidelity"] = {{"mean_cosine", e.fidelity->mean_cosine}, {"mean_mse", e.fidelity->mean_mse}};
  } else {
    j["fidelity"] = nullptr;
  }
  return j;
}

}  // namespace

json to_json(const RunReport& report, bool include_timing) {
  json epochs = json::array();
  for (const auto& e : report.epochs) epochs.push_back(epoch_json(e));
  json j = {{"format_version", "1"},
            {"mode", report.mode},
            {"stop_reason", to_string(report.stop_reason)},
            {"epochs_used", report.epochs.size()},
            {"final_train_agreement", report.final_train_agreement()},
            {"final_eval_agreement", report.final_eval_agreement()},
            {"teacher",
             {{"eval_accuracy", report.teacher_eval_accuracy}, {"reached_target", report.teacher_reached_target}}},
            {"epochs", epochs},
            {"config", to_json(report.config)}};
  j["error"] = report.error.empty() ? json(nullptr) : json(report.error);
  if (include_timing) {
    const auto& t = report.timing;
    j["timing"] = {{"warm_up_seconds", t.warm_up}, {"rank_seconds", t.rank},   {"project_seconds", t.project},
                   {"sample_seconds", t.sample},   {"invert_seconds", t.invert}, {"train_seconds", t.train},
                   {"evaluate_seconds", t.evaluate}, {"total_seconds", t.total}};
  }
  return j;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << kAblationCsvHeader << '\n';
  auto num = [](double v) { return std::isfinite(v) ? io::format_double(v) : std::string("nan"); };
  for (const auto& r : rows) {
    out << dim_label(r.dim) << ',' << num(r.final_eval_agreement) << ',' << r.epochs_used << ','
        << num(r.mean_fidelity_cosine) << ',' << num(r.mean_fidelity_mse) << '\n';
  }
  return out.str();
}

json ablation_json(const std::vector<AblationRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"dim", dim_label(r.dim)},
                   {"final_eval_agreement", r.final_eval_agreement},
                   {"epochs_used", r.epochs_used},
                   {"mean_fidelity_cosine", number_or_null(r.mean_fidelity_cosine)},
                   {"mean_fidelity_mse", number_or_null(r.mean_fidelity_mse)},
                   {"error", r.error.empty() ? json(nullptr) : json(r.error)}});
  }
  return {{"format_version", "1"}, {"rows", arr}};
}

}  // namespace sage
