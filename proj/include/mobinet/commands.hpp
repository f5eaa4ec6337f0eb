#pragma once

#include <filesystem>
#include <string>

#include "mobinet/config.hpp"

namespace mobinet {

/// Output layout under RunConfig::output_dir.
struct RunLayout {
  std::filesystem::path root;

  std::filesystem::path networks(const std::string& part) const { return root / "networks" / part; }
  std::filesystem::path tessellation() const { return root / "tessellation.geojson"; }
  std::filesystem::path gravity_params() const { return root / "models" / "gravity.json"; }
  std::filesystem::path mogan_dir() const { return root / "models" / "mogan"; }
  std::filesystem::path mogan_checkpoint() const { return mogan_dir() / "model.ckpt"; }
  std::filesystem::path synthetic(const std::string& model) const { return root / "synthetic" / model; }
  std::filesystem::path eval_dir() const { return root / "eval"; }
  std::filesystem::path scores_dir() const { return eval_dir() / "scores"; }
};

// Each command reads and writes only files of the layout above and persists
// the resolved config (config/<command>.conf) and seeds.json next to its
// outputs. Failures are thrown as StageError tagged with the command name.

/// Trip CSVs -> tessellation.geojson, networks/{all,train,test}/,
/// ingest_report.json, split.json.
void cmd_ingest(const RunConfig& cfg);
/// networks/train -> models/gravity.json.
void cmd_fit_gravity(const RunConfig& cfg);
/// networks/train -> models/mogan/{model.ckpt, history.csv, snapshots/}.
void cmd_train_mogan(const RunConfig& cfg);
/// One synthetic network per day of networks/<days> -> synthetic/<model>/.
/// model is gravity, radiation or mogan.
void cmd_generate(const RunConfig& cfg, const std::string& model, const std::string& days = "test");
/// networks/test + synthetic/<model> for every eval.models entry ->
/// eval/{scores/, report.json, tables/, histograms/}.
void cmd_evaluate(const RunConfig& cfg);
/// eval/scores -> eval/{report.json, tables/, histograms/} without rescoring.
void cmd_report(const RunConfig& cfg);

}  // namespace mobinet
