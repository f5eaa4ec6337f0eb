#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mobinet/baselines.hpp"
#include "mobinet/harness.hpp"
#include "mobinet/ingest.hpp"
#include "mobinet/mogan.hpp"
#include "mobinet/netcore.hpp"

namespace mobinet {

/// Every setting of a pipeline run. Text form is flat `key = value` lines with
/// `#` comments; keys are grouped by prefix (ingest., gan., baseline., eval.).
struct RunConfig {
  std::string dataset = "dataset";
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  int threads = 0;

  std::vector<std::filesystem::path> trips;
  std::string city = "nyc";  // nyc, chicago or custom (needs bbox)
  std::optional<BoundingBox> bbox;
  int rows = 8;
  int cols = 8;
  double min_duration_s = 60.0;
  std::size_t test_count = 146;
  SplitMode split = SplitMode::kRandom;

  GanConfig gan;  // gan.seed is derived from the root seed
  bool round_samples = false;

  Deterrence deterrence = Deterrence::kPower;
  GenerationKind generation = GenerationKind::kMultinomial;

  std::vector<std::string> models = {"mogan", "gravity", "radiation"};
  std::vector<Metric> metrics = all_metrics();
  double epsilon = kDefaultEpsilon;
  Index bins = kDefaultBins;
  bool cd_exact = false;
  bool cross_channel = true;
  int sdp_roundings = 1000;
  int sdp_iterations = 500;

  /// Applies one key. Throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Applies every `key = value` line of a config file.
  void apply_text(const std::string& text, const std::string& source = "config");

  /// All keys with their resolved values, in a fixed order.
  std::string to_text() const;

  BoundingBox resolved_bbox() const;

  /// Named sub-seed of the root seed.
  std::uint64_t stage_seed(const std::string& stage) const;
  /// JSON record of the root seed and every derived seed.
  std::string seed_record() const;
};

/// Defaults, then the file, then MOBINET_SEED, then flag overrides.
RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace mobinet
