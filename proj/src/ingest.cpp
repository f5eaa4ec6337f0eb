#include "mobinet/ingest.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include <json.hpp>

#include "mobinet/random.hpp"

namespace mobinet {

namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i)
    if (s[i] < '0' || s[i] > '9') return false;
  return std::from_chars(s.data() + pos, s.data() + pos + len, out).ec == std::errc();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '"' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

std::optional<double> parse_coord(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

// Line reader over a gzip or plain file.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& file) : gz_(gzopen(file.c_str(), "rb")) {
    if (!gz_) throw IoError("cannot open trip file " + file.string());
  }
  ~LineReader() { gzclose(gz_); }
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  bool next(std::string& line) {
    line.clear();
    char buf[4096];
    while (gzgets(gz_, buf, sizeof buf) != nullptr) {
      line += buf;
      if (!line.empty() && line.back() == '\n') return true;
    }
    return !line.empty();
  }

 private:
  gzFile gz_;
};

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  const std::string_view s = trim(text);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':')
    return std::nullopt;
  if (!read_int(s, 0, 4, y) || !read_int(s, 5, 2, mo) || !read_int(s, 8, 2, d) ||
      !read_int(s, 11, 2, h) || !read_int(s, 14, 2, mi) || !read_int(s, 17, 2, se))
    return std::nullopt;
  if (h > 23 || mi > 59 || se > 60) return std::nullopt;

  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  const std::int64_t days = sys_days{ymd}.time_since_epoch().count();

  std::size_t pos = 19;
  double frac = 0.0;
  if (pos < s.size() && s[pos] == '.') {
    std::size_t end = pos + 1;
    while (end < s.size() && s[end] >= '0' && s[end] <= '9') ++end;
    if (end == pos + 1) return std::nullopt;
    std::from_chars(s.data() + pos, s.data() + end, frac);
    pos = end;
  }
  int offset_s = 0;
  if (pos < s.size()) {
    const char c = s[pos];
    if ((c == 'Z' || c == 'z') && pos + 1 == s.size()) {
      offset_s = 0;
    } else if ((c == '+' || c == '-') && s.size() == pos + 6 && s[pos + 3] == ':') {
      int oh = 0, om = 0;
      if (!read_int(s, pos + 1, 2, oh) || !read_int(s, pos + 4, 2, om)) return std::nullopt;
      offset_s = (c == '+' ? 1 : -1) * (oh * 3600 + om * 60);
    } else {
      return std::nullopt;
    }
  }
  Timestamp t;
  t.local_day = days;
  t.utc_seconds = static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + se + frac - offset_s;
  return t;
}

std::string format_day(std::int64_t local_day) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{days{local_day}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string IngestReport::to_json() const {
  return nlohmann::json{{"parsed", parsed},
                        {"malformed", malformed},
                        {"filtered_short", filtered_short},
                        {"dropped_outside", dropped_outside},
                        {"retained", retained},
                        {"days", days}}
      .dump(2);
}

std::vector<TripRecord> read_trips_csv(const std::filesystem::path& file, IngestReport& report) {
  LineReader reader(file);
  std::vector<TripRecord> out;
  std::string line;
  bool first = true;
  std::vector<std::string_view> fields;
  while (reader.next(line)) {
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    fields.clear();
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = sv.find(',', start);
      fields.push_back(sv.substr(start, comma == std::string_view::npos ? sv.npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    auto slon = fields.size() == 6 ? parse_coord(fields[0]) : std::nullopt;
    if (first) {
      first = false;
      if (!slon) continue;  // header
    }
    if (fields.size() != 6) {
      ++report.malformed;
      continue;
    }
    const auto slat = parse_coord(fields[1]);
    const auto elon = parse_coord(fields[2]);
    const auto elat = parse_coord(fields[3]);
    const auto st = parse_timestamp(fields[4]);
    const auto et = parse_timestamp(fields[5]);
    if (!slon || !slat || !elon || !elat || !st || !et || et->utc_seconds < st->utc_seconds) {
      ++report.malformed;
      continue;
    }
    out.push_back({{*slon, *slat}, {*elon, *elat}, *st, *et});
    ++report.parsed;
  }
  return out;
}

std::vector<TripRecord> filter_trips(std::span<const TripRecord> records, double min_duration_s) {
  std::vector<TripRecord> out;
  out.reserve(records.size());
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [&](const TripRecord& r) { return r.duration_s() >= min_duration_s; });
  return out;
}

DailyNetworks build_daily_networks(std::span<const TripRecord> records, const Tessellation& tess) {
  const Index n = tess.size();
  std::map<std::int64_t, FlowMatrix> days;
  DailyNetworks result;
  for (const auto& r : records) {
    const auto from = tess.assign(r.start);
    const auto to = tess.assign(r.end);
    if (!from || !to) {
      ++result.dropped_outside;
      continue;
    }
    auto [it, inserted] = days.try_emplace(r.start_time.local_day);
    if (inserted) it->second = FlowMatrix::Zero(n, n);
    it->second(*from, *to) += 1.0;
  }
  result.networks.reserve(days.size());
  for (auto& [day, w] : days) result.networks.emplace_back(format_day(day), std::move(w));
  return result;
}

MarginalProfile marginals(const MobilityNetwork& net) {
  return {net.weights().rowwise().sum(), net.weights().colwise().sum().transpose()};
}

NetworkSplit split_networks(std::span<const MobilityNetwork> nets, std::size_t test_count,
                            std::uint64_t seed, SplitMode mode) {
  if (test_count >= nets.size() && !(test_count == 0 && nets.empty()))
    throw InvalidInput("split_networks: test_count (" + std::to_string(test_count) +
                       ") must be smaller than the number of networks (" +
                       std::to_string(nets.size()) + ")");
  std::vector<std::size_t> order(nets.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<bool> is_test(nets.size(), false);
  if (mode == SplitMode::kRandom) {
    Rng rng = make_rng(seed, "split");
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < test_count; ++k) is_test[order[k]] = true;
  } else {
    for (std::size_t k = nets.size() - test_count; k < nets.size(); ++k) is_test[k] = true;
  }
  NetworkSplit split;
  split.train.reserve(nets.size() - test_count);
  split.test.reserve(test_count);
  for (std::size_t i = 0; i < nets.size(); ++i)
    (is_test[i] ? split.test : split.train).push_back(nets[i]);
  return split;
}

}  // namespace mobinet
