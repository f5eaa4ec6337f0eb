#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mobinet/netcore.hpp"

namespace mobinet {

namespace detail {
template <typename DA, typename DB>
void require_same_shape(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b,
                        const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidInput(std::string(who) + ": matrices have different shapes");
}
}  // namespace detail

/// sqrt(mean squared difference) over all matrix elements.
template <typename DA, typename DB>
double rmse(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  detail::require_same_shape(a, b, "rmse");
  if (a.size() == 0) throw InvalidInput("rmse: empty matrices");
  return std::sqrt((a.template cast<double>() - b.template cast<double>()).squaredNorm() /
                   static_cast<double>(a.size()));
}

/// Common part of commuters, 2 sum min(a, b) / (sum a + sum b). Throws
/// UndefinedValue when both matrices are all zero.
template <typename DA, typename DB>
double cpc(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  detail::require_same_shape(a, b, "cpc");
  const double denom = a.template cast<double>().sum() + b.template cast<double>().sum();
  if (!(denom > 0.0)) throw UndefinedValue("cpc: both networks carry no flow");
  return 2.0 * a.template cast<double>().cwiseMin(b.template cast<double>()).sum() / denom;
}

inline double rmse(const MobilityNetwork& a, const MobilityNetwork& b) {
  return rmse(a.weights(), b.weights());
}
inline double cpc(const MobilityNetwork& a, const MobilityNetwork& b) {
  return cpc(a.weights(), b.weights());
}

// ---- cut distance ----------------------------------------------------------

enum class CutMode { kExact, kSdp };

inline constexpr Index kMaxExactCutNodes = 20;

struct SdpOptions {
  std::uint64_t seed = 0;
  int roundings = 1000;
  int max_iterations = 500;
  /// Stop once the Riemannian gradient norm is below tolerance * norm(C V).
  double tolerance = 1e-7;
  /// Factorization rank; 0 means ceil(sqrt(2 * dimension)).
  Index rank = 0;
};

struct CutDistanceResult {
  double lower = 0.0;          // |cut(witness)| / n
  double upper = 0.0;          // certified bound on max_S |cut(S)| / n
  std::vector<bool> witness;   // witness[i] == true iff node i is in S
  bool converged = true;

  /// Hex bitmask of the witness, node 0 in the least significant bit.
  std::string witness_hex() const;
};

/// sum_{i in S, j not in S} d(i, j)
double cut_value(const Eigen::MatrixXd& d, const std::vector<bool>& in_s);

/// max over S of |e_A(S, S^c) - e_B(S, S^c)| / n. kExact enumerates all
/// subsets (n <= 20). kSdp solves the rank-constrained semidefinite
/// relaxation and rounds it with random hyperplanes; the true value always
/// lies in [lower, upper].
CutDistanceResult cut_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, CutMode mode,
                               const SdpOptions& options = {});
CutDistanceResult cut_distance(const MobilityNetwork& a, const MobilityNetwork& b, CutMode mode,
                               const SdpOptions& options = {});

/// Cut norm max_{I, J} |sum_{i in I, j in J} d(i, j)| with independent row and
/// column subsets, by enumerating I and choosing J from column-sum signs.
double cut_norm_exact(const Eigen::MatrixXd& d);

// ---- distributions ---------------------------------------------------------

inline constexpr Index kDefaultBins = 100;

struct Histogram {
  std::vector<double> edges;    // bins + 1, strictly increasing
  std::vector<double> density;  // probability mass per bin
  bool empty = false;           // no data: density is all zero

  Index bins() const { return static_cast<Index>(density.size()); }
};

/// Equal-width bins over [lo, hi]; values outside are clamped into the end
/// bins. lo == hi is widened to [lo - 0.5, lo + 0.5].
Histogram histogram(std::span<const double> values, Index bins, double lo, double hi);
/// Range taken from the data itself.
Histogram histogram(std::span<const double> values, Index bins = kDefaultBins);

/// Two histograms over the pooled min/max of both samples.
std::pair<Histogram, Histogram> pooled_histograms(std::span<const double> a,
                                                  std::span<const double> b,
                                                  Index bins = kDefaultBins);

/// Natural-log KL divergence; +inf when p has mass where q has none.
double kl_divergence(const Histogram& p, const Histogram& q);
/// Jensen-Shannon divergence, in [0, ln 2].
double js_divergence(const Histogram& p, const Histogram& q);

/// JS divergence between two samples, binned over their pooled range.
double sample_js_divergence(std::span<const double> a, std::span<const double> b,
                            Index bins = kDefaultBins);

/// Matrix entries, row-major.
std::vector<double> edge_weight_values(const MobilityNetwork& net);
/// Entries of A / (d + eps), row-major, d in kilometers.
std::vector<double> weight_distance_values(const MobilityNetwork& net, const DistanceMatrix& dist,
                                           double eps = kDefaultEpsilon);

}  // namespace mobinet
