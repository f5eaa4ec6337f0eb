#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mobinet/error.hpp"

namespace mobinet {

using Index = Eigen::Index;

/// Flow matrices are row-major so that row i is the outflow profile of node i
/// and flattening matches the on-disk CSV layout.
using FlowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kEarthRadiusM = 6371008.8;
inline constexpr double kDefaultEpsilon = 0.8;

struct GeoPoint {
  double lon = 0.0;
  double lat = 0.0;
};

struct BoundingBox {
  double min_lon = 0.0;
  double min_lat = 0.0;
  double max_lon = 0.0;
  double max_lat = 0.0;

  double width_deg() const { return max_lon - min_lon; }
  double height_deg() const { return max_lat - min_lat; }
  GeoPoint center() const { return {0.5 * (min_lon + max_lon), 0.5 * (min_lat + max_lat)}; }
};

/// Great-circle distance in meters.
double haversine_m(const GeoPoint& a, const GeoPoint& b);

/// Regular rows x cols grid over a bounding box. Tiles are equal in degree
/// space and indexed row-major, row 0 at the southern edge, column 0 at the
/// western edge.
class Tessellation {
 public:
  Tessellation(const BoundingBox& bbox, int rows, int cols);

  const BoundingBox& bbox() const { return bbox_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return rows_ * cols_; }

  /// East-west tile extent measured along the bbox mid-latitude.
  double tile_width_m() const { return tile_width_m_; }
  /// North-south tile extent.
  double tile_height_m() const { return tile_height_m_; }
  /// Side of the square with the same area as one tile.
  double tile_side_m() const;

  const std::vector<GeoPoint>& centroids() const { return centroids_; }
  BoundingBox tile_bounds(int k) const;

  /// Row-major index of the containing tile. Points on a shared edge belong to
  /// the tile with the larger index along that axis; the outer boundary of the
  /// bbox is inclusive. Returns nullopt outside the bbox.
  std::optional<int> assign(const GeoPoint& p) const;

 private:
  BoundingBox bbox_;
  int rows_;
  int cols_;
  std::vector<double> lon_edges_;
  std::vector<double> lat_edges_;
  std::vector<GeoPoint> centroids_;
  double tile_width_m_ = 0.0;
  double tile_height_m_ = 0.0;
};

Tessellation build_grid_tessellation(const BoundingBox& bbox, int rows = 8, int cols = 8);

/// Preset study areas: Manhattan and central Chicago, sized so that an 8x8
/// grid has tiles of roughly 1840 m and 1405 m per side.
BoundingBox manhattan_bbox();
BoundingBox chicago_central_bbox();

/// A dated, square, nonnegative flow matrix. weights()(i, j) is the flow
/// from node i to node j; self-loops are allowed.
class MobilityNetwork {
 public:
  MobilityNetwork() = default;
  MobilityNetwork(std::string date, FlowMatrix weights);

  static MobilityNetwork zeros(std::string date, Index n);

  const std::string& date() const { return date_; }
  Index n() const { return weights_.rows(); }
  const FlowMatrix& weights() const { return weights_; }
  double operator()(Index i, Index j) const { return weights_(i, j); }
  double total() const { return weights_.sum(); }

 private:
  std::string date_;
  FlowMatrix weights_;
};

/// Symmetric matrix of centroid-to-centroid distances, stored in meters.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(Eigen::MatrixXd meters);

  Index n() const { return meters_.rows(); }
  const Eigen::MatrixXd& meters() const { return meters_; }
  Eigen::MatrixXd kilometers() const { return meters_ / 1000.0; }
  double operator()(Index i, Index j) const { return meters_(i, j); }

 private:
  Eigen::MatrixXd meters_;
};

DistanceMatrix distance_matrix(const Tessellation& tess);
DistanceMatrix distance_matrix(std::span<const GeoPoint> points);

/// Element-wise A / (d + eps) with d in kilometers. eps is added to every
/// entry, not only the diagonal.
template <typename Derived>
FlowMatrix weight_distance_transform(const Eigen::MatrixBase<Derived>& weights,
                                     const DistanceMatrix& dist,
                                     double eps = kDefaultEpsilon) {
  if (weights.rows() != dist.n() || weights.cols() != dist.n())
    throw InvalidInput("weight_distance_transform: network is " +
                       std::to_string(weights.rows()) + "x" + std::to_string(weights.cols()) +
                       " but distance matrix is " + std::to_string(dist.n()) + "x" +
                       std::to_string(dist.n()));
  if (!(eps > 0.0)) throw InvalidInput("weight_distance_transform: eps must be positive");
  FlowMatrix out = weights.template cast<double>();
  out.array() /= (dist.kilometers().array() + eps);
  return out;
}

inline FlowMatrix weight_distance_transform(const MobilityNetwork& net, const DistanceMatrix& dist,
                                            double eps = kDefaultEpsilon) {
  return weight_distance_transform(net.weights(), dist, eps);
}

// ---- persistence -----------------------------------------------------------

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

void save_network_csv(const MobilityNetwork& net, const std::filesystem::path& file);
/// Reads one n x n CSV. When expected_n is given, any other row or column
/// count is an error naming the file and row.
MobilityNetwork load_network_csv(const std::filesystem::path& file,
                                 std::optional<Index> expected_n = std::nullopt);

/// One <date>.csv per network inside dir (created if needed).
void save_networks(std::span<const MobilityNetwork> nets, const std::filesystem::path& dir);
/// All *.csv files in dir, ordered by file name. An empty directory yields an
/// empty list; every file must share the first file's node count.
std::vector<MobilityNetwork> load_networks(const std::filesystem::path& dir);

/// GeoJSON FeatureCollection with one Polygon and one Point per tile. The grid
/// definition is stored in a top-level "grid" member so the file can be
/// loaded back.
void save_tessellation_geojson(const Tessellation& tess, const std::filesystem::path& file);
Tessellation load_tessellation_geojson(const std::filesystem::path& file);

}  // namespace mobinet
