#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mobinet/ingest.hpp"
#include "mobinet/netcore.hpp"

namespace mobinet {

enum class Deterrence { kPower, kExponential };

/// Singly-constrained gravity model parameters. Distances enter the
/// deterrence function in kilometers: f(r) = r^beta2 or exp(beta2 * r).
struct GravityParams {
  double beta1 = 1.0;
  double beta2 = -2.0;
  Deterrence deterrence = Deterrence::kPower;
  double loglik = std::numeric_limits<double>::quiet_NaN();

  std::string to_json() const;
  static GravityParams from_json(const std::string& text);
};

enum class GenerationKind { kExpected, kMultinomial };

struct GenerationMode {
  GenerationKind kind = GenerationKind::kMultinomial;
  std::optional<std::uint64_t> seed;

  static GenerationMode expected() { return {GenerationKind::kExpected, std::nullopt}; }
  static GenerationMode multinomial(std::uint64_t seed) { return {GenerationKind::kMultinomial, seed}; }
};

struct GravityProbabilities {
  FlowMatrix p;                   // row-stochastic on rows with an admissible destination
  std::vector<Index> empty_rows;  // origins with no admissible destination
};

/// p(i, j) = m_j^beta1 f(r_ij) / sum_{k != i} m_k^beta1 f(r_ik), p(i, i) = 0.
/// Destinations with zero relevance are inadmissible (weight 0).
GravityProbabilities gravity_probabilities(const MarginalProfile& profile, const DistanceMatrix& dist,
                                           const GravityParams& params);

/// One day of observed flows together with the relevance vector used as m.
struct GravityObservation {
  FlowMatrix flows;
  Eigen::VectorXd relevance;
};

struct GravityFitOptions {
  Deterrence deterrence = Deterrence::kPower;
  std::uint64_t seed = 0;
  int restarts = 10;
  int max_iterations = 200;
  /// Convergence: gradient norm below tolerance * (total off-diagonal trips).
  double tolerance = 1e-6;
};

/// Maximum-likelihood (beta1, beta2) under the multinomial model of
/// off-diagonal flows, summed over all observations. Uses each network's own
/// drop-offs as relevance.
GravityParams fit_gravity(std::span<const MobilityNetwork> train, const DistanceMatrix& dist,
                          const GravityFitOptions& options = {});
GravityParams fit_gravity(std::span<const GravityObservation> observations,
                          const DistanceMatrix& dist, const GravityFitOptions& options = {});

/// Gradient of the log-likelihood at params; exposed for convergence checks.
Eigen::Vector2d gravity_loglik_gradient(std::span<const GravityObservation> observations,
                                        const DistanceMatrix& dist, const GravityParams& params);

/// Expected flows O_i p_ij, or a per-origin multinomial draw of O_i trips.
MobilityNetwork gravity_generate(const MarginalProfile& profile, const DistanceMatrix& dist,
                                 const GravityParams& params, const GenerationMode& mode,
                                 std::string date = "gravity");

/// s(i, j) = total relevance strictly closer to i than j is (k != i, j).
FlowMatrix intervening_opportunities(const MarginalProfile& profile, const DistanceMatrix& dist);

/// Radiation model mean flows (with the finite-size factor), or a per-origin
/// multinomial over the row-normalized mean flows. The diagonal is zero.
/// Origins with zero relevance emit nothing. Throws UndefinedValue when an
/// origin with outflow holds all the relevance.
MobilityNetwork radiation_generate(const MarginalProfile& profile, const DistanceMatrix& dist,
                                   const GenerationMode& mode, std::string date = "radiation");

/// Per-day recipe: one synthetic network per reference network, built from
/// that network's marginals. Multinomial streams are derived from
/// (mode.seed, date) so the result does not depend on evaluation order.
std::vector<MobilityNetwork> gravity_generate_set(std::span<const MobilityNetwork> reference,
                                                  const DistanceMatrix& dist,
                                                  const GravityParams& params,
                                                  const GenerationMode& mode);
std::vector<MobilityNetwork> radiation_generate_set(std::span<const MobilityNetwork> reference,
                                                    const DistanceMatrix& dist,
                                                    const GenerationMode& mode);

}  // namespace mobinet
