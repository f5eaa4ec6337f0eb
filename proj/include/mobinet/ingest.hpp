#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mobinet/netcore.hpp"

namespace mobinet {

/// An instant parsed from an RFC 3339 timestamp. The calendar day is the one
/// written in the timestamp (dataset-local wall clock); utc_seconds accounts
/// for the offset so durations are exact across offsets.
struct Timestamp {
  double utc_seconds = 0.0;
  std::int64_t local_day = 0;  // days since 1970-01-01 in local wall time
};

/// Accepts "YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)?"; a space may replace
/// the 'T'. A missing offset is taken as local time with zero offset.
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_day(std::int64_t local_day);

struct TripRecord {
  GeoPoint start;
  GeoPoint end;
  Timestamp start_time;
  Timestamp end_time;

  double duration_s() const { return end_time.utc_seconds - start_time.utc_seconds; }
};

struct IngestReport {
  std::size_t parsed = 0;
  std::size_t malformed = 0;
  std::size_t filtered_short = 0;
  std::size_t dropped_outside = 0;
  std::size_t retained = 0;
  std::size_t days = 0;

  std::string to_json() const;
};

/// Reads start_lon,start_lat,end_lon,end_lat,start_time,end_time rows. Plain
/// and gzip-compressed files are both accepted; a header line is skipped.
/// Rows that fail to parse (or have end_time < start_time) are counted in
/// report.malformed and skipped.
std::vector<TripRecord> read_trips_csv(const std::filesystem::path& file, IngestReport& report);

/// Keeps records whose duration is at least min_duration_s, in order.
std::vector<TripRecord> filter_trips(std::span<const TripRecord> records,
                                     double min_duration_s = 60.0);

inline std::optional<int> assign_tile(const GeoPoint& p, const Tessellation& tess) {
  return tess.assign(p);
}

struct DailyNetworks {
  std::vector<MobilityNetwork> networks;  // ordered by day
  std::size_t dropped_outside = 0;
};

/// One network per calendar day of start_time; entry (i, j) counts trips from
/// tile i to tile j. Trips with an endpoint outside the grid are dropped.
DailyNetworks build_daily_networks(std::span<const TripRecord> records, const Tessellation& tess);

/// O_i (row sums) and m_j (column sums: daily drop-offs, self-loops included).
struct MarginalProfile {
  Eigen::VectorXd outflows;
  Eigen::VectorXd relevance;

  Index n() const { return outflows.size(); }
};

MarginalProfile marginals(const MobilityNetwork& net);

enum class SplitMode { kRandom, kChronological };

struct NetworkSplit {
  std::vector<MobilityNetwork> train;
  std::vector<MobilityNetwork> test;
};

/// Disjoint train/test split with |test| = test_count. kRandom draws the test
/// days uniformly with the seed; kChronological takes the last days. Both
/// parts keep the input order.
NetworkSplit split_networks(std::span<const MobilityNetwork> nets, std::size_t test_count,
                            std::uint64_t seed, SplitMode mode = SplitMode::kRandom);

}  // namespace mobinet
