#include "mobinet/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mobinet/random.hpp"

namespace mobinet {

using nlohmann::json;

namespace {

constexpr std::array<Metric, 5> kMetrics = {Metric::kRmse, Metric::kCpc, Metric::kCutDistance,
                                            Metric::kWeights, Metric::kWeightDistances};

bool is_weight_metric(Metric m) { return m == Metric::kWeights || m == Metric::kWeightDistances; }

std::vector<double> weight_values(const MobilityNetwork& net, Metric metric,
                                  const EvalOptions& options) {
  if (metric == Metric::kWeights) return edge_weight_values(net);
  if (options.dist == nullptr)
    throw InvalidInput("weight_distances metric needs a distance matrix");
  return weight_distance_values(net, *options.dist, options.epsilon);
}

void require_same_n(const NetworkRefs& set, Index n) {
  for (const auto* net : set)
    if (net->n() != n) throw InvalidInput("networks have different node counts");
}

// Scores pairs of networks, caching per-network value lists for the
// distribution metrics.
class PairScorer {
 public:
  PairScorer(Metric metric, const EvalOptions& options) : metric_(metric), options_(options) {}

  void prepare(const NetworkRefs& set) {
    if (!is_weight_metric(metric_)) return;
    for (const auto* net : set)
      if (!values_.contains(net)) values_.emplace(net, weight_values(*net, metric_, options_));
  }

  double operator()(const MobilityNetwork& a, const MobilityNetwork& b) const {
    if (is_weight_metric(metric_))
      return sample_js_divergence(values_.at(&a), values_.at(&b), options_.bins);
    return pair_score(a, b, metric_, options_);
  }

 private:
  Metric metric_;
  const EvalOptions& options_;
  std::map<const MobilityNetwork*, std::vector<double>> values_;
};

std::size_t pair_index(std::size_t i, std::size_t j, std::size_t n) {
  if (i > j) std::swap(i, j);
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

std::string list_file(const std::string& key) {
  std::string f = key;
  for (std::size_t p = f.find('/'); p != std::string::npos; p = f.find('/')) f.replace(p, 1, "__");
  return f + ".csv";
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError(file.string() + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(file.string() + ": write failed");
}

std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError(file.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string member_label(const MixedMember& m) {
  return (m.synthetic ? "synthetic:" : "test:") + std::to_string(m.index);
}

MixedMember parse_member(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw IoError("bad mixed member label: " + s);
  MixedMember m;
  const std::string kind = s.substr(0, colon);
  if (kind != "test" && kind != "synthetic") throw IoError("bad mixed member label: " + s);
  m.synthetic = kind == "synthetic";
  m.index = std::stoul(s.substr(colon + 1));
  return m;
}

}  // namespace

std::string metric_name(Metric m) {
  switch (m) {
    case Metric::kRmse: return "rmse";
    case Metric::kCpc: return "cpc";
    case Metric::kCutDistance: return "cd";
    case Metric::kWeights: return "weights";
    case Metric::kWeightDistances: return "weight_distances";
  }
  return "?";
}

Metric parse_metric(std::string_view name) {
  for (Metric m : kMetrics)
    if (metric_name(m) == name) return m;
  throw InvalidInput("unknown metric name '" + std::string(name) + "'");
}

const std::vector<Metric>& all_metrics() {
  static const std::vector<Metric> all(kMetrics.begin(), kMetrics.end());
  return all;
}

NetworkRefs refs(std::span<const MobilityNetwork> nets) {
  NetworkRefs out;
  out.reserve(nets.size());
  for (const auto& n : nets) out.push_back(&n);
  return out;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1U, std::thread::hardware_concurrency());
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double pair_score(const MobilityNetwork& a, const MobilityNetwork& b, Metric metric,
                  const EvalOptions& options) {
  if (a.n() != b.n()) throw InvalidInput("pair_score: networks have different node counts");
  switch (metric) {
    case Metric::kRmse: return rmse(a, b);
    case Metric::kCpc:
      // Two empty networks are identical; score them like any identical pair.
      if (a.total() == 0.0 && b.total() == 0.0) return 1.0;
      return cpc(a, b);
    case Metric::kCutDistance: {
      const bool swap = b.date() < a.date();
      const MobilityNetwork& x = swap ? b : a;
      const MobilityNetwork& y = swap ? a : b;
      SdpOptions sdp = options.sdp;
      sdp.seed = derive_seed(options.sdp.seed, "cd:" + x.date() + "|" + y.date());
      return cut_distance(x, y, options.cut_mode, sdp).lower;
    }
    case Metric::kWeights:
    case Metric::kWeightDistances:
      return sample_js_divergence(weight_values(a, metric, options),
                                  weight_values(b, metric, options), options.bins);
  }
  throw InvalidInput("unknown metric");
}

std::vector<double> within_set_scores(const NetworkRefs& set, Metric metric,
                                      const EvalOptions& options) {
  if (set.size() < 2) throw InvalidInput("within_set_scores: need at least two networks");
  require_same_n(set, set.front()->n());
  PairScorer score(metric, options);
  score.prepare(set);
  const std::size_t n = set.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  std::vector<double> out(pairs.size());
  parallel_for(pairs.size(), options.threads, [&](std::size_t k) {
    out[k] = score(*set[pairs[k].first], *set[pairs[k].second]);
  });
  return out;
}

std::vector<double> within_set_scores(std::span<const MobilityNetwork> set, std::string_view metric,
                                      const EvalOptions& options) {
  return within_set_scores(refs(set), parse_metric(metric), options);
}

std::vector<double> cross_set_scores(const NetworkRefs& a, const NetworkRefs& b, Metric metric,
                                     const EvalOptions& options) {
  if (a.empty() || b.empty()) throw InvalidInput("cross_set_scores: empty set");
  require_same_n(a, a.front()->n());
  require_same_n(b, a.front()->n());
  PairScorer score(metric, options);
  score.prepare(a);
  score.prepare(b);
  std::vector<double> out(a.size() * b.size());
  parallel_for(out.size(), options.threads, [&](std::size_t k) {
    out[k] = score(*a[k / b.size()], *b[k % b.size()]);
  });
  return out;
}

std::vector<double> cross_set_scores(std::span<const MobilityNetwork> a,
                                     std::span<const MobilityNetwork> b, std::string_view metric,
                                     const EvalOptions& options) {
  return cross_set_scores(refs(a), refs(b), parse_metric(metric), options);
}

MixedSet build_mixed_set(std::span<const MobilityNetwork> test,
                         std::span<const MobilityNetwork> synthetic, std::uint64_t seed) {
  if (test.empty() || synthetic.empty()) throw InvalidInput("build_mixed_set: empty set");
  if (test.size() != synthetic.size())
    throw InvalidInput("build_mixed_set: test and synthetic sets differ in size");
  if (test.size() % 2 != 0) throw InvalidInput("build_mixed_set: set size must be even");
  const std::size_t k = test.size() / 2;
  Rng rng = make_rng(seed, "mixed");
  auto draw = [&](std::size_t size) {
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(k);
    return idx;
  };
  MixedSet mixed;
  for (std::size_t i : draw(test.size())) mixed.members.push_back({false, i});
  for (std::size_t i : draw(synthetic.size())) mixed.members.push_back({true, i});
  std::shuffle(mixed.members.begin(), mixed.members.end(), rng);
  for (const auto& m : mixed.members)
    mixed.networks.push_back(m.synthetic ? &synthetic[m.index] : &test[m.index]);
  return mixed;
}

PairPartition mixed_pair_partition(const MixedSet& mixed) {
  PairPartition p;
  for (std::size_t i = 0; i < mixed.size(); ++i)
    for (std::size_t j = i + 1; j < mixed.size(); ++j) {
      const bool si = mixed.members[i].synthetic;
      const bool sj = mixed.members[j].synthetic;
      if (!si && !sj)
        ++p.real_real;
      else if (si && sj)
        ++p.synth_synth;
      else
        ++p.real_synth;
    }
  return p;
}

Divergences divergences_from_scores(std::span<const double> test, std::span<const double> synthetic,
                                    std::span<const double> mixed, Index bins) {
  return {sample_js_divergence(mixed, test, bins), sample_js_divergence(synthetic, test, bins)};
}

Divergences distribution_divergences(std::span<const MobilityNetwork> test,
                                     std::span<const MobilityNetwork> synthetic,
                                     const MixedSet& mixed, Metric metric,
                                     const EvalOptions& options) {
  const auto t = within_set_scores(refs(test), metric, options);
  const auto s = within_set_scores(refs(synthetic), metric, options);
  const auto m = within_set_scores(mixed.networks, metric, options);
  return divergences_from_scores(t, s, m, options.bins);
}

Divergences weight_distribution_divergences(std::span<const MobilityNetwork> test,
                                            std::span<const MobilityNetwork> synthetic,
                                            const MixedSet& mixed, const DistanceMatrix& dist,
                                            WeightKind kind, EvalOptions options) {
  options.dist = &dist;
  const Metric metric = kind == WeightKind::kWeights ? Metric::kWeights : Metric::kWeightDistances;
  return distribution_divergences(test, synthetic, mixed, metric, options);
}

double relative_improvement(double js_mogan, double js_baseline) {
  if (!(js_baseline > 0.0))
    throw UndefinedValue("relative improvement undefined for a zero baseline divergence");
  return -(js_mogan - js_baseline) / js_baseline * 100.0;
}

// ---- raw scores ---------------------------------------------------------------

const std::vector<double>& RawScores::list(const std::string& key) const {
  const auto it = lists.find(key);
  if (it == lists.end()) throw InvalidInput("missing score list " + key);
  return it->second;
}

void RawScores::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["dataset"] = dataset;
  manifest["seed"] = seed;
  manifest["bins"] = bins;
  manifest["reference_model"] = reference_model;
  manifest["models"] = models;
  json metric_names = json::array();
  for (Metric m : metrics) metric_names.push_back(metric_name(m));
  manifest["metrics"] = metric_names;
  json keys = json::array();
  for (const auto& [key, values] : lists) {
    keys.push_back({{"key", key}, {"file", list_file(key)}, {"count", values.size()}});
    std::string text;
    for (double v : values) text += format_double(v) + "\n";
    write_text(dir / list_file(key), text);
  }
  manifest["lists"] = keys;
  json mixed = json::object();
  for (const auto& [model, members] : mixed_members) {
    json arr = json::array();
    for (const auto& m : members) arr.push_back(member_label(m));
    mixed[model] = arr;
  }
  manifest["mixed_members"] = mixed;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

RawScores RawScores::load(const std::filesystem::path& dir) {
  const auto manifest_file = dir / "manifest.json";
  json manifest;
  try {
    manifest = json::parse(read_text(manifest_file));
  } catch (const json::exception& e) {
    throw IoError(manifest_file.string() + ": " + e.what());
  }
  RawScores s;
  try {
    s.dataset = manifest.at("dataset").get<std::string>();
    s.seed = manifest.at("seed").get<std::uint64_t>();
    s.bins = manifest.at("bins").get<Index>();
    s.reference_model = manifest.at("reference_model").get<std::string>();
    s.models = manifest.at("models").get<std::vector<std::string>>();
    for (const auto& m : manifest.at("metrics")) s.metrics.push_back(parse_metric(m.get<std::string>()));
    for (const auto& [model, arr] : manifest.at("mixed_members").items()) {
      auto& members = s.mixed_members[model];
      for (const auto& label : arr) members.push_back(parse_member(label.get<std::string>()));
    }
    for (const auto& entry : manifest.at("lists")) {
      const auto key = entry.at("key").get<std::string>();
      const auto file = dir / entry.at("file").get<std::string>();
      const auto count = entry.at("count").get<std::size_t>();
      std::vector<double> values;
      values.reserve(count);
      std::istringstream in(read_text(file));
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        double v = 0.0;
        const auto res = std::from_chars(line.data(), line.data() + line.size(), v);
        if (res.ec != std::errc{} || res.ptr != line.data() + line.size())
          throw IoError(file.string() + ": bad value '" + line + "'");
        values.push_back(v);
      }
      if (values.size() != count)
        throw IoError(file.string() + ": expected " + std::to_string(count) + " values, found " +
                      std::to_string(values.size()));
      s.lists.emplace(key, std::move(values));
    }
  } catch (const json::exception& e) {
    throw IoError(manifest_file.string() + ": " + e.what());
  }
  return s;
}

// ---- report -------------------------------------------------------------------

const DivergenceEntry& DivergenceReport::at(const std::string& model, Metric metric) const {
  for (const auto& e : entries)
    if (e.model == model && e.metric == metric) return e;
  throw InvalidInput("no divergence entry for " + model + "/" + metric_name(metric));
}

DivergenceReport DivergenceReport::from_scores(const RawScores& scores) {
  DivergenceReport r;
  r.dataset = scores.dataset;
  r.seed = scores.seed;
  r.reference_model = scores.reference_model;
  r.models = scores.models;
  for (const auto& model : scores.models)
    for (Metric metric : scores.metrics) {
      const std::string name = metric_name(metric);
      const auto js = divergences_from_scores(scores.list("test/" + name + "/within"),
                                              scores.list(model + "/" + name + "/synthetic"),
                                              scores.list(model + "/" + name + "/mixed"),
                                              scores.bins);
      r.entries.push_back({model, metric, js});
    }
  const bool has_ref = std::find(r.models.begin(), r.models.end(), r.reference_model) != r.models.end();
  if (!has_ref) return r;
  for (Metric metric : scores.metrics) {
    const auto& ref = r.at(r.reference_model, metric).js;
    for (const auto& model : r.models) {
      if (model == r.reference_model) continue;
      const auto& base = r.at(model, metric).js;
      for (char set : {'m', 's'}) {
        ImprovementEntry imp{metric, model, set, std::nullopt};
        const double a = set == 'm' ? ref.js_m : ref.js_s;
        const double b = set == 'm' ? base.js_m : base.js_s;
        if (b > 0.0) imp.delta = relative_improvement(a, b);
        r.improvements.push_back(imp);
      }
    }
  }
  return r;
}

std::string DivergenceReport::to_json() const {
  json j;
  j["dataset"] = dataset;
  j["seed"] = seed;
  j["reference_model"] = reference_model;
  j["models"] = models;
  json div = json::array();
  for (const auto& e : entries)
    div.push_back({{"model", e.model}, {"metric", metric_name(e.metric)}, {"js_m", e.js.js_m},
                   {"js_s", e.js.js_s}});
  j["divergences"] = div;
  json imp = json::array();
  for (const auto& e : improvements) {
    json item = {{"metric", metric_name(e.metric)},
                 {"baseline", e.baseline},
                 {"set", std::string(1, e.set)}};
    item["delta"] = e.delta ? json(*e.delta) : json(nullptr);
    imp.push_back(item);
  }
  j["improvements"] = imp;
  return j.dump(2) + "\n";
}

std::string DivergenceReport::table_csv(Metric metric) const {
  std::string header = "dataset";
  std::string row = dataset;
  for (const auto& model : models) {
    header += "," + model + "_JS_m," + model + "_JS_s";
    const auto& e = at(model, metric);
    row += "," + fixed(e.js.js_m) + "," + fixed(e.js.js_s);
  }
  for (const auto& imp : improvements) {
    if (imp.metric != metric) continue;
    header += std::string(",Delta_") + imp.set + "_" + imp.baseline;
    row += "," + (imp.delta ? fixed(*imp.delta) : std::string("NA"));
  }
  return header + "\n" + row + "\n";
}

std::string histogram_csv(std::span<const double> test, std::span<const double> synthetic,
                          std::span<const double> mixed, Index bins) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (auto list : {test, synthetic, mixed})
    for (double v : list) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!std::isfinite(lo)) lo = hi = 0.0;
  const auto ht = histogram(test, bins, lo, hi);
  const auto hs = histogram(synthetic, bins, lo, hi);
  const auto hm = histogram(mixed, bins, lo, hi);
  std::string out = "bin_lo,bin_hi,test,synthetic,mixed\n";
  for (Index k = 0; k < ht.bins(); ++k)
    out += format_double(ht.edges[k]) + "," + format_double(ht.edges[k + 1]) + "," +
           format_double(ht.density[k]) + "," + format_double(hs.density[k]) + "," +
           format_double(hm.density[k]) + "\n";
  return out;
}

void DivergenceReport::write(const std::filesystem::path& dir, const RawScores& scores) const {
  std::filesystem::create_directories(dir / "tables");
  std::filesystem::create_directories(dir / "histograms");
  write_text(dir / "report.json", to_json());
  for (Metric metric : scores.metrics) {
    const std::string name = metric_name(metric);
    write_text(dir / "tables" / (name + ".csv"), table_csv(metric));
    for (const auto& model : scores.models)
      write_text(dir / "histograms" / (model + "__" + name + ".csv"),
                 histogram_csv(scores.list("test/" + name + "/within"),
                               scores.list(model + "/" + name + "/synthetic"),
                               scores.list(model + "/" + name + "/mixed"), scores.bins));
  }
}

// ---- protocol -----------------------------------------------------------------

ProtocolResult run_protocol(std::span<const MobilityNetwork> test, std::span<const ModelSet> models,
                            const ProtocolConfig& config) {
  auto stage = [](const std::string& name, auto&& fn) {
    try {
      return fn();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  };

  RawScores scores;
  scores.dataset = config.dataset;
  scores.seed = config.seed;
  scores.bins = config.eval.bins;
  scores.reference_model = config.reference_model;
  scores.metrics = config.metrics;

  EvalOptions eval = config.eval;
  eval.sdp.seed = derive_seed(config.seed, "sdp");

  const NetworkRefs test_refs = refs(test);
  std::vector<MixedSet> mixed_sets;
  for (const auto& model : models) {
    scores.models.push_back(model.name);
    mixed_sets.push_back(stage("mixed:" + model.name, [&] {
      return build_mixed_set(test, model.networks, derive_seed(config.seed, "mixed:" + model.name));
    }));
    scores.mixed_members[model.name] = mixed_sets.back().members;
  }

  for (Metric metric : config.metrics) {
    const std::string name = metric_name(metric);
    const auto within_test = stage("scores:test/" + name, [&] {
      return within_set_scores(test_refs, metric, eval);
    });
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
      const auto& model = models[mi];
      const auto& mixed = mixed_sets[mi];
      stage("scores:" + model.name + "/" + name, [&] {
        const NetworkRefs synth_refs = refs(model.networks);
        const auto within_synth = within_set_scores(synth_refs, metric, eval);
        std::vector<double> cross;
        if (config.cross_channel) cross = cross_set_scores(test_refs, synth_refs, metric, eval);

        // Mixed pairs reuse scores already computed for the same two networks.
        const std::size_t nt = test.size();
        const std::size_t ns = model.networks.size();
        const std::size_t nm = mixed.size();
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t i = 0; i < nm; ++i)
          for (std::size_t j = i + 1; j < nm; ++j) pairs.emplace_back(i, j);
        std::vector<double> within_mixed(pairs.size());
        PairScorer score(metric, eval);
        if (!config.cross_channel) {
          score.prepare(test_refs);
          score.prepare(synth_refs);
        }
        parallel_for(pairs.size(), eval.threads, [&](std::size_t k) {
          const auto& a = mixed.members[pairs[k].first];
          const auto& b = mixed.members[pairs[k].second];
          if (!a.synthetic && !b.synthetic) {
            within_mixed[k] = within_test[pair_index(a.index, b.index, nt)];
          } else if (a.synthetic && b.synthetic) {
            within_mixed[k] = within_synth[pair_index(a.index, b.index, ns)];
          } else {
            const std::size_t t = a.synthetic ? b.index : a.index;
            const std::size_t s = a.synthetic ? a.index : b.index;
            within_mixed[k] = config.cross_channel ? cross[t * ns + s]
                                                   : score(test[t], model.networks[s]);
          }
        });
        scores.lists[model.name + "/" + name + "/synthetic"] = within_synth;
        scores.lists[model.name + "/" + name + "/mixed"] = std::move(within_mixed);
        if (config.cross_channel) scores.lists[model.name + "/" + name + "/cross"] = std::move(cross);
        return 0;
      });
    }
    scores.lists["test/" + name + "/within"] = within_test;
  }

  ProtocolResult result;
  result.report = stage("report", [&] { return DivergenceReport::from_scores(scores); });
  result.scores = std::move(scores);
  return result;
}

}  // namespace mobinet
