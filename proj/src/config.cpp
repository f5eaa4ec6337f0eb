#include "mobinet/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mobinet/random.hpp"

namespace mobinet {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ConfigError(key + ": '" + value + "' is not a valid number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError(key + ": '" + value + "' is not a boolean");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

const char* kSeedStages[] = {"split",           "gan",     "mogan-sample", "gravity-fit",
                             "gravity-generate", "radiation-generate", "eval"};

}  // namespace

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key == "dataset") {
    dataset = value;
  } else if (key == "output_dir") {
    output_dir = value;
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "threads") {
    threads = parse_number<int>(key, value);
    if (threads < 0) throw ConfigError("threads: must be >= 0");
  } else if (key == "ingest.trips") {
    trips.clear();
    for (const auto& p : split_list(value)) trips.emplace_back(p);
  } else if (key == "ingest.city") {
    if (value != "nyc" && value != "chicago" && value != "custom")
      throw ConfigError("ingest.city: expected nyc, chicago or custom");
    city = value;
  } else if (key == "ingest.bbox") {
    const auto parts = split_list(value);
    if (parts.size() != 4) throw ConfigError("ingest.bbox: expected min_lon,min_lat,max_lon,max_lat");
    bbox = BoundingBox{parse_number<double>(key, parts[0]), parse_number<double>(key, parts[1]),
                       parse_number<double>(key, parts[2]), parse_number<double>(key, parts[3])};
  } else if (key == "ingest.rows") {
    rows = parse_number<int>(key, value);
  } else if (key == "ingest.cols") {
    cols = parse_number<int>(key, value);
  } else if (key == "ingest.min_duration_s") {
    min_duration_s = parse_number<double>(key, value);
  } else if (key == "ingest.test_count") {
    test_count = parse_number<std::size_t>(key, value);
  } else if (key == "ingest.split") {
    if (value == "random")
      split = SplitMode::kRandom;
    else if (value == "chronological")
      split = SplitMode::kChronological;
    else
      throw ConfigError("ingest.split: expected random or chronological");
  } else if (key == "gan.latent_dim") {
    gan.latent_dim = parse_number<Index>(key, value);
  } else if (key == "gan.epochs") {
    gan.epochs = parse_number<int>(key, value);
  } else if (key == "gan.batch_size") {
    gan.batch_size = parse_number<Index>(key, value);
  } else if (key == "gan.lr") {
    gan.lr = parse_number<double>(key, value);
  } else if (key == "gan.b1") {
    gan.b1 = parse_number<double>(key, value);
  } else if (key == "gan.b2") {
    gan.b2 = parse_number<double>(key, value);
  } else if (key == "gan.feature_maps") {
    gan.feature_maps = parse_number<Index>(key, value);
  } else if (key == "gan.log1p") {
    gan.log1p_scaling = parse_bool(key, value);
  } else if (key == "gan.early_stop") {
    gan.early_stop = parse_bool(key, value);
  } else if (key == "gan.early_stop_tolerance") {
    gan.early_stop_tolerance = parse_number<double>(key, value);
  } else if (key == "gan.early_stop_window") {
    gan.early_stop_window = parse_number<int>(key, value);
  } else if (key == "gan.round_samples") {
    round_samples = parse_bool(key, value);
  } else if (key == "baseline.deterrence") {
    if (value == "power")
      deterrence = Deterrence::kPower;
    else if (value == "exponential")
      deterrence = Deterrence::kExponential;
    else
      throw ConfigError("baseline.deterrence: expected power or exponential");
  } else if (key == "baseline.mode") {
    if (value == "multinomial")
      generation = GenerationKind::kMultinomial;
    else if (value == "expected")
      generation = GenerationKind::kExpected;
    else
      throw ConfigError("baseline.mode: expected multinomial or expected");
  } else if (key == "eval.models") {
    models = split_list(value);
    if (models.empty()) throw ConfigError("eval.models: empty list");
  } else if (key == "eval.metrics") {
    metrics.clear();
    try {
      for (const auto& m : split_list(value)) metrics.push_back(parse_metric(m));
    } catch (const InvalidInput& e) {
      throw ConfigError(std::string("eval.metrics: ") + e.what());
    }
    if (metrics.empty()) throw ConfigError("eval.metrics: empty list");
  } else if (key == "eval.epsilon") {
    epsilon = parse_number<double>(key, value);
  } else if (key == "eval.bins") {
    bins = parse_number<Index>(key, value);
    if (bins < 1) throw ConfigError("eval.bins: must be >= 1");
  } else if (key == "eval.cd_exact") {
    cd_exact = parse_bool(key, value);
  } else if (key == "eval.cross") {
    cross_channel = parse_bool(key, value);
  } else if (key == "eval.sdp_roundings") {
    sdp_roundings = parse_number<int>(key, value);
  } else if (key == "eval.sdp_iterations") {
    sdp_iterations = parse_number<int>(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void RunConfig::apply_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::string RunConfig::to_text() const {
  std::vector<std::string> trip_list;
  for (const auto& p : trips) trip_list.push_back(p.string());
  std::vector<std::string> metric_list;
  for (Metric m : metrics) metric_list.push_back(metric_name(m));
  const auto b = resolved_bbox();

  std::ostringstream o;
  o << "dataset = " << dataset << "\n"
    << "output_dir = " << output_dir.string() << "\n"
    << "seed = " << seed << "\n"
    << "threads = " << threads << "\n"
    << "ingest.trips = " << join(trip_list) << "\n"
    << "ingest.city = " << city << "\n"
    << "ingest.bbox = " << format_double(b.min_lon) << "," << format_double(b.min_lat) << ","
    << format_double(b.max_lon) << "," << format_double(b.max_lat) << "\n"
    << "ingest.rows = " << rows << "\n"
    << "ingest.cols = " << cols << "\n"
    << "ingest.min_duration_s = " << format_double(min_duration_s) << "\n"
    << "ingest.test_count = " << test_count << "\n"
    << "ingest.split = " << (split == SplitMode::kRandom ? "random" : "chronological") << "\n"
    << "gan.latent_dim = " << gan.latent_dim << "\n"
    << "gan.epochs = " << gan.epochs << "\n"
    << "gan.batch_size = " << gan.batch_size << "\n"
    << "gan.lr = " << format_double(gan.lr) << "\n"
    << "gan.b1 = " << format_double(gan.b1) << "\n"
    << "gan.b2 = " << format_double(gan.b2) << "\n"
    << "gan.feature_maps = " << gan.feature_maps << "\n"
    << "gan.log1p = " << (gan.log1p_scaling ? "true" : "false") << "\n"
    << "gan.early_stop = " << (gan.early_stop ? "true" : "false") << "\n"
    << "gan.early_stop_tolerance = " << format_double(gan.early_stop_tolerance) << "\n"
    << "gan.early_stop_window = " << gan.early_stop_window << "\n"
    << "gan.round_samples = " << (round_samples ? "true" : "false") << "\n"
    << "baseline.deterrence = " << (deterrence == Deterrence::kPower ? "power" : "exponential") << "\n"
    << "baseline.mode = " << (generation == GenerationKind::kMultinomial ? "multinomial" : "expected")
    << "\n"
    << "eval.models = " << join(models) << "\n"
    << "eval.metrics = " << join(metric_list) << "\n"
    << "eval.epsilon = " << format_double(epsilon) << "\n"
    << "eval.bins = " << bins << "\n"
    << "eval.cd_exact = " << (cd_exact ? "true" : "false") << "\n"
    << "eval.cross = " << (cross_channel ? "true" : "false") << "\n"
    << "eval.sdp_roundings = " << sdp_roundings << "\n"
    << "eval.sdp_iterations = " << sdp_iterations << "\n";
  return o.str();
}

BoundingBox RunConfig::resolved_bbox() const {
  if (bbox) return *bbox;
  if (city == "nyc") return manhattan_bbox();
  if (city == "chicago") return chicago_central_bbox();
  throw ConfigError("ingest.city = custom needs ingest.bbox");
}

std::uint64_t RunConfig::stage_seed(const std::string& stage) const {
  return derive_seed(seed, stage);
}

std::string RunConfig::seed_record() const {
  nlohmann::json j;
  j["root"] = seed;
  nlohmann::json derived = nlohmann::json::object();
  for (const char* stage : kSeedStages) derived[stage] = stage_seed(stage);
  j["derived"] = derived;
  return j.dump(2) + "\n";
}

RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  if (file) {
    std::ifstream in(*file, std::ios::binary);
    if (!in) throw ConfigError(file->string() + ": cannot open config file");
    std::ostringstream ss;
    ss << in.rdbuf();
    cfg.apply_text(ss.str(), file->string());
  }
  if (const char* env = std::getenv("MOBINET_SEED"); env && *env) {
    try {
      cfg.set("seed", env);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("MOBINET_SEED: ") + e.what());
    }
  }
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  return cfg;
}

}  // namespace mobinet
