#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mobinet/netcore.hpp"
#include "mobinet/random.hpp"

namespace fixtures {

using mobinet::FlowMatrix;
using mobinet::Index;
using mobinet::MobilityNetwork;

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mobinet-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

/// Integer matrix with entries uniform in [lo, hi].
inline Eigen::MatrixXd random_int_matrix(Index n, int lo, int hi, mobinet::Rng& rng) {
  std::uniform_int_distribution<int> u(lo, hi);
  Eigen::MatrixXd m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = u(rng);
  return m;
}

/// Sparse-ish nonnegative count network.
inline MobilityNetwork random_network(const std::string& date, Index n, mobinet::Rng& rng,
                                      double density = 0.4, double mean = 6.0) {
  std::bernoulli_distribution keep(density);
  std::poisson_distribution<int> count(mean);
  FlowMatrix w(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) w(i, j) = keep(rng) ? count(rng) : 0.0;
  return {date, std::move(w)};
}

inline std::vector<MobilityNetwork> random_networks(const std::string& prefix, std::size_t k,
                                                    Index n, std::uint64_t seed) {
  mobinet::Rng rng(seed);
  std::vector<MobilityNetwork> out;
  char buf[32];
  for (std::size_t i = 0; i < k; ++i) {
    std::snprintf(buf, sizeof buf, "-%03zu", i);
    out.push_back(random_network(prefix + buf, n, rng));
  }
  return out;
}

/// Distinct points on a small jittered lattice, so pairwise distances have no ties.
inline std::vector<mobinet::GeoPoint> jittered_points(Index n, mobinet::Rng& rng) {
  std::uniform_real_distribution<double> jitter(-0.002, 0.002);
  std::vector<mobinet::GeoPoint> pts;
  const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  for (Index k = 0; k < n; ++k)
    pts.push_back({-74.0 + 0.01 * static_cast<double>(k % side) + jitter(rng),
                   40.7 + 0.01 * static_cast<double>(k / side) + jitter(rng)});
  return pts;
}

}  // namespace fixtures
