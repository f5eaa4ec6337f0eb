#include "mobinet/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace mobinet {

Histogram histogram(std::span<const double> values, Index bins, double lo, double hi) {
  if (bins < 1) throw InvalidInput("histogram: bins must be >= 1");
  if (!std::isfinite(lo) || !std::isfinite(hi) || hi < lo)
    throw InvalidInput("histogram: invalid range");
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (Index k = 0; k <= bins; ++k)
    h.edges[k] = k == bins ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins);
  h.density.assign(static_cast<std::size_t>(bins), 0.0);
  if (values.empty()) {
    h.empty = true;
    return h;
  }
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  const double scale = static_cast<double>(bins) / (hi - lo);
  for (double v : values) {
    const double pos = (v - lo) * scale;
    const Index k = std::clamp<Index>(static_cast<Index>(std::floor(pos)), 0, bins - 1);
    ++counts[static_cast<std::size_t>(k)];
  }
  const double total = static_cast<double>(values.size());
  for (std::size_t k = 0; k < counts.size(); ++k) h.density[k] = static_cast<double>(counts[k]) / total;
  return h;
}

Histogram histogram(std::span<const double> values, Index bins) {
  if (values.empty()) return histogram(values, bins, 0.0, 0.0);
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  return histogram(values, bins, *mn, *mx);
}

std::pair<Histogram, Histogram> pooled_histograms(std::span<const double> a,
                                                  std::span<const double> b, Index bins) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : a) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : b) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!std::isfinite(lo)) lo = hi = 0.0;
  return {histogram(a, bins, lo, hi), histogram(b, bins, lo, hi)};
}

namespace {

void require_same_edges(const Histogram& p, const Histogram& q, const char* who) {
  if (p.edges != q.edges) throw InvalidInput(std::string(who) + ": histograms have different bins");
}

}  // namespace

double kl_divergence(const Histogram& p, const Histogram& q) {
  require_same_edges(p, q, "kl_divergence");
  double kl = 0.0;
  for (std::size_t k = 0; k < p.density.size(); ++k) {
    const double pk = p.density[k];
    if (pk == 0.0) continue;
    if (q.density[k] == 0.0) return std::numeric_limits<double>::infinity();
    kl += pk * std::log(pk / q.density[k]);
  }
  return kl;
}

double js_divergence(const Histogram& p, const Histogram& q) {
  require_same_edges(p, q, "js_divergence");
  // Bins where only one side has mass contribute exactly mass * ln 2 / 2;
  // they are accumulated separately so disjoint supports give ln 2 without
  // rounding in the log.
  double only = 0.0;
  double shared = 0.0;
  bool overlap = false;
  for (std::size_t k = 0; k < p.density.size(); ++k) {
    const double pk = p.density[k];
    const double qk = q.density[k];
    if (pk == 0.0 && qk == 0.0) continue;
    if (pk == 0.0 || qk == 0.0) {
      only += pk + qk;
      continue;
    }
    overlap = true;
    // Fixed operand order keeps JS(p, q) and JS(q, p) bitwise equal.
    const double lo = std::min(pk, qk), hi = std::max(pk, qk);
    const double m = 0.5 * (lo + hi);
    shared += lo * std::log(lo / m) + hi * std::log(hi / m);
  }
  if (!overlap && only > 0.0 && !p.empty && !q.empty) return std::numbers::ln2;
  const double js = 0.5 * (only * std::numbers::ln2 + shared);
  return std::clamp(js, 0.0, std::numbers::ln2);
}

double sample_js_divergence(std::span<const double> a, std::span<const double> b, Index bins) {
  const auto [p, q] = pooled_histograms(a, b, bins);
  return js_divergence(p, q);
}

std::vector<double> edge_weight_values(const MobilityNetwork& net) {
  const auto& w = net.weights();
  return std::vector<double>(w.data(), w.data() + w.size());
}

std::vector<double> weight_distance_values(const MobilityNetwork& net, const DistanceMatrix& dist,
                                           double eps) {
  const FlowMatrix t = weight_distance_transform(net, dist, eps);
  return std::vector<double>(t.data(), t.data() + t.size());
}

}  // namespace mobinet
