#include "mobinet/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mobinet {

namespace {

double to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = to_rad(a.lat);
  const double phi2 = to_rad(b.lat);
  const double dphi = phi2 - phi1;
  const double dlambda = to_rad(b.lon - a.lon);
  const double s = std::sin(dphi / 2) * std::sin(dphi / 2) +
                   std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2) * std::sin(dlambda / 2);
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(s)));
}

Tessellation::Tessellation(const BoundingBox& bbox, int rows, int cols)
    : bbox_(bbox), rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1) throw InvalidInput("tessellation: rows and cols must be >= 1");
  if (!std::isfinite(bbox.min_lon) || !std::isfinite(bbox.max_lon) ||
      !std::isfinite(bbox.min_lat) || !std::isfinite(bbox.max_lat))
    throw InvalidInput("tessellation: non-finite bounding box");
  if (!(bbox.width_deg() > 0.0) || !(bbox.height_deg() > 0.0))
    throw InvalidInput("tessellation: degenerate bounding box (zero width or height)");
  if (bbox.min_lat < -90.0 || bbox.max_lat > 90.0)
    throw InvalidInput("tessellation: latitude out of range");

  lon_edges_.resize(cols + 1);
  lat_edges_.resize(rows + 1);
  for (int c = 0; c <= cols; ++c)
    lon_edges_[c] = c == cols ? bbox.max_lon : bbox.min_lon + bbox.width_deg() * c / cols;
  for (int r = 0; r <= rows; ++r)
    lat_edges_[r] = r == rows ? bbox.max_lat : bbox.min_lat + bbox.height_deg() * r / rows;

  centroids_.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      centroids_.push_back({0.5 * (lon_edges_[c] + lon_edges_[c + 1]),
                            0.5 * (lat_edges_[r] + lat_edges_[r + 1])});

  const double mid_lat = bbox.center().lat;
  tile_width_m_ = haversine_m({bbox.min_lon, mid_lat}, {bbox.max_lon, mid_lat}) / cols;
  tile_height_m_ = haversine_m({bbox.center().lon, bbox.min_lat},
                               {bbox.center().lon, bbox.max_lat}) / rows;
}

double Tessellation::tile_side_m() const { return std::sqrt(tile_width_m_ * tile_height_m_); }

BoundingBox Tessellation::tile_bounds(int k) const {
  if (k < 0 || k >= size()) throw InvalidInput("tile index out of range");
  const int r = k / cols_;
  const int c = k % cols_;
  return {lon_edges_[c], lat_edges_[r], lon_edges_[c + 1], lat_edges_[r + 1]};
}

std::optional<int> Tessellation::assign(const GeoPoint& p) const {
  if (!(p.lon >= bbox_.min_lon && p.lon <= bbox_.max_lon && p.lat >= bbox_.min_lat &&
        p.lat <= bbox_.max_lat))
    return std::nullopt;
  // upper_bound puts a point lying exactly on an edge into the next cell.
  auto locate = [](const std::vector<double>& edges, double v) {
    const auto it = std::upper_bound(edges.begin(), edges.end(), v);
    const int cells = static_cast<int>(edges.size()) - 1;
    return std::min(static_cast<int>(it - edges.begin()) - 1, cells - 1);
  };
  return locate(lat_edges_, p.lat) * cols_ + locate(lon_edges_, p.lon);
}

Tessellation build_grid_tessellation(const BoundingBox& bbox, int rows, int cols) {
  return Tessellation(bbox, rows, cols);
}

BoundingBox manhattan_bbox() { return {-74.058616, 40.71691, -73.883784, 40.84929}; }

BoundingBox chicago_central_bbox() { return {-87.711851, 41.799458, -87.576149, 41.900542}; }

MobilityNetwork::MobilityNetwork(std::string date, FlowMatrix weights)
    : date_(std::move(date)), weights_(std::move(weights)) {
  if (weights_.rows() != weights_.cols())
    throw InvalidInput("mobility network '" + date_ + "' is not square");
  for (Index i = 0; i < weights_.size(); ++i) {
    const double v = weights_.data()[i];
    if (!std::isfinite(v) || v < 0.0)
      throw InvalidInput("mobility network '" + date_ + "' has a negative or non-finite entry");
  }
}

MobilityNetwork MobilityNetwork::zeros(std::string date, Index n) {
  return MobilityNetwork(std::move(date), FlowMatrix::Zero(n, n));
}

DistanceMatrix::DistanceMatrix(Eigen::MatrixXd meters) : meters_(std::move(meters)) {
  if (meters_.rows() != meters_.cols()) throw InvalidInput("distance matrix is not square");
  const Index n = meters_.rows();
  for (Index i = 0; i < n; ++i) {
    if (meters_(i, i) != 0.0) throw InvalidInput("distance matrix has a nonzero diagonal");
    for (Index j = i + 1; j < n; ++j) {
      if (!(meters_(i, j) > 0.0) || !std::isfinite(meters_(i, j)))
        throw InvalidInput("distance matrix has a non-positive off-diagonal entry");
      if (meters_(i, j) != meters_(j, i)) throw InvalidInput("distance matrix is not symmetric");
    }
  }
}

DistanceMatrix distance_matrix(std::span<const GeoPoint> points) {
  const Index n = static_cast<Index>(points.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = haversine_m(points[i], points[j]);
  return DistanceMatrix(std::move(d));
}

DistanceMatrix distance_matrix(const Tessellation& tess) {
  return distance_matrix(std::span<const GeoPoint>(tess.centroids()));
}

}  // namespace mobinet
