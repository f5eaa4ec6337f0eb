#include "mobinet/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "mobinet/random.hpp"

namespace mobinet {

namespace {

void check_shapes(const MarginalProfile& profile, const DistanceMatrix& dist, const char* who) {
  if (profile.outflows.size() != dist.n() || profile.relevance.size() != dist.n())
    throw InvalidInput(std::string(who) + ": profile has " + std::to_string(profile.n()) +
                       " nodes, distance matrix has " + std::to_string(dist.n()));
  if ((profile.outflows.array() < 0).any() || (profile.relevance.array() < 0).any() ||
      !profile.outflows.allFinite() || !profile.relevance.allFinite())
    throw InvalidInput(std::string(who) + ": marginals must be finite and nonnegative");
}

// Distance feature entering the deterrence exponent.
Eigen::MatrixXd deterrence_feature(const DistanceMatrix& dist, Deterrence kind) {
  Eigen::MatrixXd km = dist.kilometers();
  if (kind == Deterrence::kPower) {
    // The diagonal is never used; keep it finite.
    km.diagonal().setOnes();
    return km.array().log().matrix();
  }
  return km;
}

long long integral_trials(double o, Index row) {
  const double r = std::round(o);
  if (std::abs(o - r) > 1e-9 * std::max(1.0, std::abs(o)))
    throw InvalidInput("multinomial generation needs integer outflows; origin " +
                       std::to_string(row) + " has " + format_double(o));
  return static_cast<long long>(r);
}

// Multinomial draw of `trials` over the unnormalized weights, via sequential
// conditional binomials in index order.
void sample_multinomial(long long trials, const double* weights, Index n, Rng& rng, double* out) {
  Index last = -1;
  double mass = 0.0;
  for (Index j = 0; j < n; ++j) {
    out[j] = 0.0;
    if (weights[j] > 0.0) {
      last = j;
      mass += weights[j];
    }
  }
  if (last < 0 || trials == 0) return;
  long long remaining = trials;
  for (Index j = 0; j < n && remaining > 0; ++j) {
    if (!(weights[j] > 0.0)) continue;
    if (j == last) {
      out[j] = static_cast<double>(remaining);
      break;
    }
    const double q = std::clamp(weights[j] / mass, 0.0, 1.0);
    std::binomial_distribution<long long> draw(remaining, q);
    const long long k = draw(rng);
    out[j] = static_cast<double>(k);
    remaining -= k;
    mass -= weights[j];
    if (!(mass > 0.0)) {
      // Rounding drift; hand the rest to the last admissible destination.
      out[last] += static_cast<double>(remaining);
      break;
    }
  }
}

struct LikelihoodTerms {
  double loglik = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
};

class GravityLikelihood {
 public:
  GravityLikelihood(std::span<const GravityObservation> obs, const DistanceMatrix& dist,
                    Deterrence kind)
      : obs_(obs), feature_(deterrence_feature(dist, kind)) {
    const Index n = dist.n();
    log_m_.reserve(obs.size());
    for (const auto& o : obs) {
      if (o.flows.rows() != n || o.flows.cols() != n || o.relevance.size() != n)
        throw InvalidInput("fit_gravity: observation shape does not match the distance matrix");
      Eigen::VectorXd lm(n);
      for (Index j = 0; j < n; ++j)
        lm(j) = o.relevance(j) > 0.0 ? std::log(o.relevance(j))
                                     : -std::numeric_limits<double>::infinity();
      for (Index i = 0; i < n; ++i) {
        double admissible = 0.0;
        int choices = 0;
        for (Index j = 0; j < n; ++j) {
          if (j == i) continue;
          if (o.relevance(j) > 0.0) {
            admissible += o.flows(i, j);
            ++choices;
          } else if (o.flows(i, j) > 0.0) {
            throw FitError("fit_gravity: flow observed towards a destination with zero relevance");
          }
        }
        scale_ += admissible;
        if (admissible > 0.0 && choices >= 2) informative_ = true;
      }
      log_m_.push_back(std::move(lm));
    }
  }

  double scale() const { return scale_; }
  bool informative() const { return informative_; }

  LikelihoodTerms evaluate(const Eigen::Vector2d& theta, bool second_order = true) const {
    LikelihoodTerms t;
    const Index n = feature_.rows();
    std::vector<double> s(n);
    for (std::size_t k = 0; k < obs_.size(); ++k) {
      const auto& flows = obs_[k].flows;
      const auto& lm = log_m_[k];
      for (Index i = 0; i < n; ++i) {
        double total = 0.0;
        double top = -std::numeric_limits<double>::infinity();
        for (Index j = 0; j < n; ++j) {
          if (j == i || !std::isfinite(lm(j))) continue;
          total += flows(i, j);
          s[j] = theta(0) * lm(j) + theta(1) * feature_(i, j);
          top = std::max(top, s[j]);
        }
        if (!(total > 0.0)) continue;
        double z = 0.0;
        Eigen::Vector2d mean = Eigen::Vector2d::Zero();
        Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
        Eigen::Vector2d observed = Eigen::Vector2d::Zero();
        double observed_s = 0.0;
        for (Index j = 0; j < n; ++j) {
          if (j == i || !std::isfinite(lm(j))) continue;
          const double w = std::exp(s[j] - top);
          const Eigen::Vector2d phi(lm(j), feature_(i, j));
          z += w;
          mean += w * phi;
          if (second_order) second += w * phi * phi.transpose();
          if (flows(i, j) > 0.0) {
            observed += flows(i, j) * phi;
            observed_s += flows(i, j) * s[j];
          }
        }
        mean /= z;
        t.loglik += observed_s - total * (top + std::log(z));
        t.grad += observed - total * mean;
        if (second_order) t.hess -= total * (second / z - mean * mean.transpose());
      }
    }
    return t;
  }

 private:
  std::span<const GravityObservation> obs_;
  Eigen::MatrixXd feature_;
  std::vector<Eigen::VectorXd> log_m_;
  double scale_ = 0.0;
  bool informative_ = false;
};

struct AscentResult {
  Eigen::Vector2d theta;
  LikelihoodTerms terms;
  bool converged = false;
};

// Damped Newton ascent with backtracking; falls back to a scaled gradient
// step whenever the Hessian is not negative definite.
AscentResult newton_ascent(const GravityLikelihood& lik, Eigen::Vector2d theta,
                           const GravityFitOptions& opt) {
  const double gtol = opt.tolerance * lik.scale();
  LikelihoodTerms cur = lik.evaluate(theta);
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    if (cur.grad.norm() < gtol) return {theta, cur, true};
    Eigen::Vector2d dir;
    Eigen::LDLT<Eigen::Matrix2d> ldlt(-cur.hess);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0).all()) {
      dir = ldlt.solve(cur.grad);
    } else {
      dir = cur.grad / std::max(1.0, lik.scale());
    }
    const double slope = cur.grad.dot(dir);
    double step = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
      const Eigen::Vector2d cand = theta + step * dir;
      const LikelihoodTerms next = lik.evaluate(cand);
      if (std::isfinite(next.loglik) && next.loglik >= cur.loglik + 1e-4 * step * slope) {
        theta = cand;
        cur = next;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return {theta, cur, cur.grad.norm() < gtol};
}

}  // namespace

std::string GravityParams::to_json() const {
  nlohmann::json j{{"beta1", beta1},
                   {"beta2", beta2},
                   {"deterrence", deterrence == Deterrence::kPower ? "power" : "exponential"}};
  if (std::isfinite(loglik)) j["loglik"] = loglik;
  else j["loglik"] = nullptr;
  return j.dump(2);
}

GravityParams GravityParams::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    GravityParams p;
    p.beta1 = j.at("beta1").get<double>();
    p.beta2 = j.at("beta2").get<double>();
    const auto kind = j.value("deterrence", std::string("power"));
    if (kind == "power") p.deterrence = Deterrence::kPower;
    else if (kind == "exponential") p.deterrence = Deterrence::kExponential;
    else throw InvalidInput("unknown deterrence kind '" + kind + "'");
    if (j.contains("loglik") && j["loglik"].is_number()) p.loglik = j["loglik"].get<double>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("gravity parameters: ") + e.what());
  }
}

GravityProbabilities gravity_probabilities(const MarginalProfile& profile, const DistanceMatrix& dist,
                                           const GravityParams& params) {
  check_shapes(profile, dist, "gravity_probabilities");
  if (!std::isfinite(params.beta1) || !std::isfinite(params.beta2))
    throw InvalidInput("gravity_probabilities: non-finite parameters");
  const Index n = dist.n();
  const Eigen::MatrixXd feature = deterrence_feature(dist, params.deterrence);
  GravityProbabilities out{FlowMatrix::Zero(n, n), {}};
  std::vector<double> s(n);
  for (Index i = 0; i < n; ++i) {
    double top = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j) {
      if (j == i || !(profile.relevance(j) > 0.0)) continue;
      s[j] = params.beta1 * std::log(profile.relevance(j)) + params.beta2 * feature(i, j);
      top = std::max(top, s[j]);
    }
    if (!std::isfinite(top)) {
      out.empty_rows.push_back(i);
      continue;
    }
    double z = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (j == i || !(profile.relevance(j) > 0.0)) continue;
      out.p(i, j) = std::exp(s[j] - top);
      z += out.p(i, j);
    }
    out.p.row(i) /= z;
  }
  return out;
}

Eigen::Vector2d gravity_loglik_gradient(std::span<const GravityObservation> observations,
                                        const DistanceMatrix& dist, const GravityParams& params) {
  GravityLikelihood lik(observations, dist, params.deterrence);
  return lik.evaluate({params.beta1, params.beta2}, false).grad;
}

GravityParams fit_gravity(std::span<const GravityObservation> observations, const DistanceMatrix& dist,
                          const GravityFitOptions& options) {
  if (observations.empty()) throw InvalidInput("fit_gravity: empty training set");
  GravityLikelihood lik(observations, dist, options.deterrence);
  if (!(lik.scale() > 0.0))
    throw FitError("fit_gravity: no off-diagonal flows towards admissible destinations");
  if (!lik.informative())
    throw FitError("fit_gravity: every origin has a single admissible destination");

  std::vector<Eigen::Vector2d> starts{{1.0, -2.0}};
  Rng rng = make_rng(options.seed, "fit_gravity");
  std::uniform_real_distribution<double> b1(0.0, 3.0), b2(-4.0, 0.0);
  for (int r = 0; r < options.restarts; ++r) {
    const double x = b1(rng);
    starts.emplace_back(x, b2(rng));
  }

  std::optional<AscentResult> best;
  for (const auto& start : starts) {
    AscentResult r = newton_ascent(lik, start, options);
    if (!std::isfinite(r.terms.loglik)) continue;
    if (!best || (r.converged && !best->converged) ||
        (r.converged == best->converged && r.terms.loglik > best->terms.loglik))
      best = r;
  }
  if (!best || !best->converged)
    throw FitError("fit_gravity: likelihood maximization did not converge (parameters may be "
                   "unidentifiable from the data)");
  // A vanishing curvature means the gradient only went flat on the way to infinity.
  const double curvature = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(-best->terms.hess).eigenvalues().minCoeff();
  if (!(curvature > 1e-8 * lik.scale()))
    throw FitError("fit_gravity: the likelihood has no finite maximum for these flows");
  GravityParams p;
  p.beta1 = best->theta(0);
  p.beta2 = best->theta(1);
  p.deterrence = options.deterrence;
  p.loglik = best->terms.loglik;
  return p;
}

GravityParams fit_gravity(std::span<const MobilityNetwork> train, const DistanceMatrix& dist,
                          const GravityFitOptions& options) {
  std::vector<GravityObservation> obs;
  obs.reserve(train.size());
  for (const auto& net : train) obs.push_back({net.weights(), marginals(net).relevance});
  return fit_gravity(std::span<const GravityObservation>(obs), dist, options);
}

MobilityNetwork gravity_generate(const MarginalProfile& profile, const DistanceMatrix& dist,
                                 const GravityParams& params, const GenerationMode& mode,
                                 std::string date) {
  const GravityProbabilities probs = gravity_probabilities(profile, dist, params);
  const Index n = dist.n();
  FlowMatrix w = FlowMatrix::Zero(n, n);
  if (mode.kind == GenerationKind::kExpected) {
    w = profile.outflows.asDiagonal() * probs.p;
  } else {
    if (!mode.seed) throw InvalidInput("gravity_generate: multinomial mode needs a seed");
    Rng rng(*mode.seed);
    for (Index i = 0; i < n; ++i)
      sample_multinomial(integral_trials(profile.outflows(i), i), probs.p.row(i).data(), n, rng,
                         w.row(i).data());
  }
  return MobilityNetwork(std::move(date), std::move(w));
}

FlowMatrix intervening_opportunities(const MarginalProfile& profile, const DistanceMatrix& dist) {
  check_shapes(profile, dist, "intervening_opportunities");
  const Index n = dist.n();
  FlowMatrix s = FlowMatrix::Zero(n, n);
  std::vector<Index> order;
  for (Index i = 0; i < n; ++i) {
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::erase(order, i);
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return dist(i, a) < dist(i, b); });
    // Walk groups of equidistant destinations; each group sees the mass of
    // all strictly closer groups.
    double closer = 0.0;
    std::size_t g = 0;
    while (g < order.size()) {
      std::size_t h = g;
      double group_mass = 0.0;
      while (h < order.size() && dist(i, order[h]) == dist(i, order[g])) {
        s(i, order[h]) = closer;
        group_mass += profile.relevance(order[h]);
        ++h;
      }
      closer += group_mass;
      g = h;
    }
  }
  return s;
}

MobilityNetwork radiation_generate(const MarginalProfile& profile, const DistanceMatrix& dist,
                                   const GenerationMode& mode, std::string date) {
  const FlowMatrix s = intervening_opportunities(profile, dist);
  const Index n = dist.n();
  const double total_m = profile.relevance.sum();
  if (!(total_m > 0.0)) throw UndefinedValue("radiation_generate: total relevance is zero");
  FlowMatrix w = FlowMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const double o = profile.outflows(i);
    if (!(o > 0.0)) continue;
    const double mi = profile.relevance(i);
    if (!(mi > 0.0)) continue;  // every term carries a factor m_i
    if (mi >= total_m)
      throw UndefinedValue("radiation_generate: origin " + std::to_string(i) +
                           " holds all the relevance (1 - m_i/M = 0)");
    const double finite_size = 1.0 / (1.0 - mi / total_m);
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double mj = profile.relevance(j);
      w(i, j) = o * finite_size * (mi * mj) / ((mi + s(i, j)) * (mi + mj + s(i, j)));
    }
  }
  if (mode.kind == GenerationKind::kMultinomial) {
    if (!mode.seed) throw InvalidInput("radiation_generate: multinomial mode needs a seed");
    Rng rng(*mode.seed);
    FlowMatrix sampled = FlowMatrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      const long long trials = integral_trials(profile.outflows(i), i);
      sample_multinomial(trials, w.row(i).data(), n, rng, sampled.row(i).data());
    }
    w = std::move(sampled);
  }
  return MobilityNetwork(std::move(date), std::move(w));
}

namespace {

GenerationMode per_day_mode(const GenerationMode& mode, std::string_view model,
                            const std::string& date) {
  if (mode.kind == GenerationKind::kExpected) return mode;
  if (!mode.seed) throw InvalidInput("multinomial generation needs a seed");
  return GenerationMode::multinomial(derive_seed(*mode.seed, std::string(model) + ":" + date));
}

}  // namespace

std::vector<MobilityNetwork> gravity_generate_set(std::span<const MobilityNetwork> reference,
                                                  const DistanceMatrix& dist,
                                                  const GravityParams& params,
                                                  const GenerationMode& mode) {
  std::vector<MobilityNetwork> out;
  out.reserve(reference.size());
  for (const auto& net : reference)
    out.push_back(gravity_generate(marginals(net), dist, params,
                                   per_day_mode(mode, "gravity", net.date()), net.date()));
  return out;
}

std::vector<MobilityNetwork> radiation_generate_set(std::span<const MobilityNetwork> reference,
                                                    const DistanceMatrix& dist,
                                                    const GenerationMode& mode) {
  std::vector<MobilityNetwork> out;
  out.reserve(reference.size());
  for (const auto& net : reference)
    out.push_back(radiation_generate(marginals(net), dist,
                                     per_day_mode(mode, "radiation", net.date()), net.date()));
  return out;
}

}  // namespace mobinet
