#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mobinet/metrics.hpp"
#include "mobinet/netcore.hpp"

namespace mobinet {

enum class Metric { kRmse, kCpc, kCutDistance, kWeights, kWeightDistances };

/// rmse, cpc, cd, weights, weight_distances
std::string metric_name(Metric m);
/// Throws InvalidInput on an unknown name.
Metric parse_metric(std::string_view name);
const std::vector<Metric>& all_metrics();

struct EvalOptions {
  /// Required by the weight_distances metric.
  const DistanceMatrix* dist = nullptr;
  double epsilon = kDefaultEpsilon;
  Index bins = kDefaultBins;
  CutMode cut_mode = CutMode::kSdp;
  /// sdp.seed is the root; each pair gets its own stream derived from it.
  SdpOptions sdp;
  /// Worker threads for pairwise sweeps; 0 means hardware concurrency.
  int threads = 0;
};

using NetworkRefs = std::vector<const MobilityNetwork*>;

NetworkRefs refs(std::span<const MobilityNetwork> nets);

/// Runs fn(0..count-1) on up to `threads` workers. Each index is processed
/// exactly once, so writing results by index keeps output order fixed.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

/// Score of one pair. Symmetric in (a, b) for every metric.
double pair_score(const MobilityNetwork& a, const MobilityNetwork& b, Metric metric,
                  const EvalOptions& options);

/// Metric on all unordered pairs (i < j), lexicographic order.
std::vector<double> within_set_scores(const NetworkRefs& set, Metric metric,
                                      const EvalOptions& options);
std::vector<double> within_set_scores(std::span<const MobilityNetwork> set, std::string_view metric,
                                      const EvalOptions& options = {});

/// Metric on every (a_i, b_j), row-major.
std::vector<double> cross_set_scores(const NetworkRefs& a, const NetworkRefs& b, Metric metric,
                                     const EvalOptions& options);
std::vector<double> cross_set_scores(std::span<const MobilityNetwork> a,
                                     std::span<const MobilityNetwork> b, std::string_view metric,
                                     const EvalOptions& options = {});

struct MixedMember {
  bool synthetic = false;
  std::size_t index = 0;  // position in the test or synthetic set
};

/// Half of each set, drawn without replacement and shuffled. Members point
/// into the source sets.
struct MixedSet {
  std::vector<MixedMember> members;
  NetworkRefs networks;

  std::size_t size() const { return members.size(); }
};

MixedSet build_mixed_set(std::span<const MobilityNetwork> test,
                         std::span<const MobilityNetwork> synthetic, std::uint64_t seed);

struct PairPartition {
  std::size_t real_real = 0;
  std::size_t synth_synth = 0;
  std::size_t real_synth = 0;
};

/// How the unordered pairs of a mixed set split by origin.
PairPartition mixed_pair_partition(const MixedSet& mixed);

struct Divergences {
  double js_m = 0.0;  // mixed vs test
  double js_s = 0.0;  // synthetic vs test
};

Divergences divergences_from_scores(std::span<const double> test, std::span<const double> synthetic,
                                    std::span<const double> mixed, Index bins = kDefaultBins);

/// JS between within-set score distributions of the three sets.
Divergences distribution_divergences(std::span<const MobilityNetwork> test,
                                     std::span<const MobilityNetwork> synthetic,
                                     const MixedSet& mixed, Metric metric,
                                     const EvalOptions& options);

enum class WeightKind { kWeights, kWeightDistances };

Divergences weight_distribution_divergences(std::span<const MobilityNetwork> test,
                                            std::span<const MobilityNetwork> synthetic,
                                            const MixedSet& mixed, const DistanceMatrix& dist,
                                            WeightKind kind, EvalOptions options = {});

/// -(js_mogan - js_baseline) / js_baseline * 100. Throws UndefinedValue
/// unless js_baseline > 0.
double relative_improvement(double js_mogan, double js_baseline);

// ---- full protocol -----------------------------------------------------------

struct ModelSet {
  std::string name;
  std::vector<MobilityNetwork> networks;
};

struct ProtocolConfig {
  std::string dataset = "dataset";
  std::uint64_t seed = 0;
  std::vector<Metric> metrics = all_metrics();
  EvalOptions eval;
  /// Also compute synthetic-vs-test scores on all |test| x |synthetic| pairs.
  bool cross_channel = true;
  /// Model the improvement percentages are computed for.
  std::string reference_model = "mogan";
};

/// Every score list the report is derived from. Keys:
///   "test/<metric>/within", "<model>/<metric>/synthetic",
///   "<model>/<metric>/mixed", "<model>/<metric>/cross".
struct RawScores {
  std::string dataset;
  std::uint64_t seed = 0;
  Index bins = kDefaultBins;
  std::string reference_model;
  std::vector<std::string> models;
  std::vector<Metric> metrics;
  std::map<std::string, std::vector<double>> lists;
  std::map<std::string, std::vector<MixedMember>> mixed_members;  // by model

  const std::vector<double>& list(const std::string& key) const;

  /// manifest.json plus one CSV per list.
  void save(const std::filesystem::path& dir) const;
  static RawScores load(const std::filesystem::path& dir);
};

struct DivergenceEntry {
  std::string model;
  Metric metric = Metric::kRmse;
  Divergences js;
};

struct ImprovementEntry {
  Metric metric = Metric::kRmse;
  std::string baseline;
  char set = 'm';               // 'm' or 's'
  std::optional<double> delta;  // empty when the baseline JS is zero
};

struct DivergenceReport {
  std::string dataset;
  std::uint64_t seed = 0;
  std::string reference_model;
  std::vector<std::string> models;
  std::vector<DivergenceEntry> entries;
  std::vector<ImprovementEntry> improvements;

  const DivergenceEntry& at(const std::string& model, Metric metric) const;

  static DivergenceReport from_scores(const RawScores& scores);

  std::string to_json() const;
  /// dataset,<model>_JS_m,<model>_JS_s,...,Delta_m_<baseline>,Delta_s_<baseline>,...
  std::string table_csv(Metric metric) const;

  /// report.json, tables/<metric>.csv and histograms/<model>__<metric>.csv.
  void write(const std::filesystem::path& dir, const RawScores& scores) const;
};

/// bin_lo,bin_hi,test,synthetic,mixed over the pooled range of the three lists.
std::string histogram_csv(std::span<const double> test, std::span<const double> synthetic,
                          std::span<const double> mixed, Index bins);

struct ProtocolResult {
  RawScores scores;
  DivergenceReport report;
};

/// For each model: mixed set, within-set score lists for every metric,
/// optional cross channel, JS_m / JS_s and improvements of the reference
/// model over every other model. Failures are rethrown as StageError.
ProtocolResult run_protocol(std::span<const MobilityNetwork> test, std::span<const ModelSet> models,
                            const ProtocolConfig& config);

}  // namespace mobinet
