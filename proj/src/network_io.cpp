#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mobinet/netcore.hpp"

namespace mobinet {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void save_network_csv(const MobilityNetwork& net, const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write network file " + file.string());
  const auto& w = net.weights();
  std::string line;
  for (Index i = 0; i < w.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < w.cols(); ++j) {
      if (j) line += ',';
      line += format_double(w(i, j));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw IoError("write failed for network file " + file.string());
}

MobilityNetwork load_network_csv(const fs::path& file, std::optional<Index> expected_n) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open network file " + file.string());

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = p + line.size();
    while (true) {
      double v = 0.0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc() || (res.ptr != end && *res.ptr != ','))
        throw IoError(file.string() + ": row " + std::to_string(lineno) + ": malformed number");
      row.push_back(v);
      if (res.ptr == end) break;
      p = res.ptr + 1;
    }
    const std::size_t want = expected_n ? static_cast<std::size_t>(*expected_n)
                                        : (rows.empty() ? row.size() : rows.front().size());
    if (row.size() != want)
      throw IoError(file.string() + ": row " + std::to_string(lineno) + " has " +
                    std::to_string(row.size()) + " columns, expected " + std::to_string(want));
    rows.push_back(std::move(row));
  }
  const Index n = static_cast<Index>(rows.size());
  if (n == 0) throw IoError(file.string() + ": empty network file");
  if (expected_n && n != *expected_n)
    throw IoError(file.string() + ": has " + std::to_string(n) + " rows, expected " +
                  std::to_string(*expected_n));
  if (static_cast<Index>(rows.front().size()) != n)
    throw IoError(file.string() + ": matrix is " + std::to_string(n) + "x" +
                  std::to_string(rows.front().size()) + ", expected a square matrix");

  FlowMatrix w(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) w(i, j) = rows[i][j];
  try {
    return MobilityNetwork(file.stem().string(), std::move(w));
  } catch (const InvalidInput& e) {
    throw IoError(file.string() + ": " + e.what());
  }
}

void save_networks(std::span<const MobilityNetwork> nets, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  if (!nets.empty()) {
    const Index n = nets.front().n();
    for (const auto& net : nets)
      if (net.n() != n)
        throw InvalidInput("save_networks: inconsistent node counts in set (network '" +
                           net.date() + "')");
  }
  for (const auto& net : nets) save_network_csv(net, dir / (net.date() + ".csv"));
}

std::vector<MobilityNetwork> load_networks(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("network directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::vector<MobilityNetwork> nets;
  nets.reserve(files.size());
  std::optional<Index> n;
  for (const auto& f : files) {
    nets.push_back(load_network_csv(f, n));
    n = nets.back().n();
  }
  return nets;
}

void save_tessellation_geojson(const Tessellation& tess, const fs::path& file) {
  using nlohmann::json;
  json features = json::array();
  for (int k = 0; k < tess.size(); ++k) {
    const BoundingBox b = tess.tile_bounds(k);
    json ring = json::array({json::array({b.min_lon, b.min_lat}), json::array({b.max_lon, b.min_lat}),
                             json::array({b.max_lon, b.max_lat}), json::array({b.min_lon, b.max_lat}),
                             json::array({b.min_lon, b.min_lat})});
    features.push_back({{"type", "Feature"},
                        {"properties", {{"tile", k}, {"kind", "tile"}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}}});
    const GeoPoint c = tess.centroids()[k];
    features.push_back({{"type", "Feature"},
                        {"properties", {{"tile", k}, {"kind", "centroid"}}},
                        {"geometry", {{"type", "Point"}, {"coordinates", {c.lon, c.lat}}}}});
  }
  const BoundingBox& bb = tess.bbox();
  json doc = {{"type", "FeatureCollection"},
              {"bbox", {bb.min_lon, bb.min_lat, bb.max_lon, bb.max_lat}},
              {"grid",
               {{"rows", tess.rows()},
                {"cols", tess.cols()},
                {"tile_width_m", tess.tile_width_m()},
                {"tile_height_m", tess.tile_height_m()},
                {"tile_side_m", tess.tile_side_m()}}},
              {"features", std::move(features)}};
  if (file.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
  }
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write tessellation file " + file.string());
  out << doc.dump(1) << '\n';
}

Tessellation load_tessellation_geojson(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open tessellation file " + file.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    const auto& bb = doc.at("bbox");
    const BoundingBox box{bb.at(0).get<double>(), bb.at(1).get<double>(), bb.at(2).get<double>(),
                          bb.at(3).get<double>()};
    return Tessellation(box, doc.at("grid").at("rows").get<int>(),
                        doc.at("grid").at("cols").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(file.string() + ": " + e.what());
  }
}

}  // namespace mobinet
