#include <doctest.h>

#include <zlib.h>

#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "mobinet/ingest.hpp"

using namespace mobinet;

namespace {

void write_gz(const std::filesystem::path& file, const std::string& text) {
  gzFile gz = gzopen(file.string().c_str(), "wb");
  REQUIRE(gz != nullptr);
  gzwrite(gz, text.data(), static_cast<unsigned>(text.size()));
  gzclose(gz);
}

const char* kTrips =
    "start_lon,start_lat,end_lon,end_lat,start_time,end_time\n"
    "0.5,0.5,1.5,0.5,2021-06-01T08:00:00Z,2021-06-01T08:10:00Z\n"
    "0.5,0.5,1.5,0.5,2021-06-01 09:00:00,2021-06-01 09:00:30\n"   // too short
    "0.5,0.5,9.5,0.5,2021-06-01T10:00:00Z,2021-06-01T10:20:00Z\n"  // ends outside
    "1.5,1.5,0.5,0.5,2021-06-02T23:30:00-04:00,2021-06-03T00:10:00-04:00\n"
    "garbage,row\n"
    "1.5,1.5,0.5,0.5,2021-06-02T10:00:00Z,2021-06-02T09:00:00Z\n"  // ends before start
    "1.5,0.5,1.5,1.5,2021-06-02T12:00:00.250Z,2021-06-02T12:05:00Z\n";

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("timestamps") {
    const auto a = parse_timestamp("2021-06-01T08:00:00Z");
    REQUIRE(a);
    CHECK(format_day(a->local_day) == "2021-06-01");
    CHECK(a->utc_seconds == doctest::Approx(1622534400.0));
    const auto b = parse_timestamp("2021-06-01 04:00:00-04:00");
    REQUIRE(b);
    CHECK(b->utc_seconds == a->utc_seconds);
    const auto c = parse_timestamp("2021-06-01T23:59:59.5+02:00");
    REQUIRE(c);
    CHECK(format_day(c->local_day) == "2021-06-01");
    CHECK(c->utc_seconds == doctest::Approx(1622584799.5));
    CHECK_FALSE(parse_timestamp("2021-02-30T00:00:00"));
    CHECK_FALSE(parse_timestamp("2021-06-01T25:00:00"));
    CHECK_FALSE(parse_timestamp("yesterday"));
    CHECK_FALSE(parse_timestamp("2021-06-01T08:00:00+0200"));
  }

  TEST_CASE("reading, filtering and daily aggregation") {
    fixtures::TempDir dir("trips");
    {
      std::ofstream f(dir / "t.csv");
      f << kTrips;
    }
    write_gz(dir / "t.csv.gz", kTrips);

    for (const char* name : {"t.csv", "t.csv.gz"}) {
      CAPTURE(name);
      IngestReport rep;
      const auto recs = read_trips_csv(dir / name, rep);
      CHECK(rep.parsed == 5);
      CHECK(rep.malformed == 2);
      REQUIRE(recs.size() == 5);

      const auto kept = filter_trips(recs, 60.0);
      CHECK(kept.size() == 4);
      CHECK(filter_trips(recs, 0.0).size() == 5);

      const Tessellation grid({0, 0, 2, 2}, 2, 2);
      const auto daily = build_daily_networks(kept, grid);
      CHECK(daily.dropped_outside == 1);
      REQUIRE(daily.networks.size() == 2);
      CHECK(daily.networks[0].date() == "2021-06-01");
      CHECK(daily.networks[1].date() == "2021-06-02");
      CHECK(daily.networks[0](0, 1) == 1.0);
      CHECK(daily.networks[0].total() == 1.0);
      CHECK(daily.networks[1](3, 0) == 1.0);  // local day of a -04:00 start
      CHECK(daily.networks[1](1, 3) == 1.0);
      CHECK(daily.networks[1].total() == 2.0);
    }
    IngestReport rep;
    CHECK_THROWS_AS(read_trips_csv(dir / "missing.csv", rep), IoError);
  }

  TEST_CASE("marginals") {
    FlowMatrix w(3, 3);
    w << 1, 2, 0, 0, 0, 5, 3, 0, 4;
    const auto m = marginals(MobilityNetwork("d", w));
    CHECK(m.outflows == Eigen::Vector3d(3, 5, 7));
    CHECK(m.relevance == Eigen::Vector3d(4, 2, 9));
  }

  TEST_CASE("train/test split") {
    const auto nets = fixtures::random_networks("d", 730, 3, 5);
    const auto s = split_networks(nets, 146, 42);
    CHECK(s.train.size() == 584);
    CHECK(s.test.size() == 146);
    std::set<std::string> seen;
    for (const auto& n : s.train) seen.insert(n.date());
    for (const auto& n : s.test) CHECK(seen.insert(n.date()).second);
    CHECK(seen.size() == 730);
    CHECK(std::is_sorted(s.test.begin(), s.test.end(),
                         [](const auto& a, const auto& b) { return a.date() < b.date(); }));

    const auto again = split_networks(nets, 146, 42);
    for (std::size_t i = 0; i < 146; ++i) CHECK(again.test[i].date() == s.test[i].date());
    const auto other = split_networks(nets, 146, 43);
    bool differs = false;
    for (std::size_t i = 0; i < 146; ++i) differs |= other.test[i].date() != s.test[i].date();
    CHECK(differs);

    const auto chrono = split_networks(nets, 146, 0, SplitMode::kChronological);
    CHECK(chrono.test.front().date() == nets[584].date());
    CHECK(chrono.train.back().date() == nets[583].date());

    CHECK_THROWS_AS(split_networks(nets, 730, 1), InvalidInput);
  }
}
