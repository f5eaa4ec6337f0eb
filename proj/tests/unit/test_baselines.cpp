#include <doctest.h>

#include "fixtures.hpp"
#include "mobinet/baselines.hpp"

using namespace mobinet;

namespace {

// Direct evaluation of the gravity choice probabilities.
FlowMatrix gravity_oracle(const Eigen::VectorXd& m, const Eigen::MatrixXd& km, double b1, double b2,
                          Deterrence det) {
  const Index n = m.size();
  FlowMatrix p = FlowMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    double z = 0.0;
    for (Index k = 0; k < n; ++k)
      if (k != i && m(k) > 0)
        z += std::pow(m(k), b1) * (det == Deterrence::kPower ? std::pow(km(i, k), b2) : std::exp(b2 * km(i, k)));
    for (Index j = 0; j < n; ++j)
      if (j != i && m(j) > 0)
        p(i, j) = std::pow(m(j), b1) *
                  (det == Deterrence::kPower ? std::pow(km(i, j), b2) : std::exp(b2 * km(i, j))) / z;
  }
  return p;
}

// Brute-force s_ij: relevance of every k != i, j strictly closer to i than j.
FlowMatrix opportunities_oracle(const Eigen::VectorXd& m, const Eigen::MatrixXd& d) {
  const Index n = m.size();
  FlowMatrix s = FlowMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      for (Index k = 0; k < n; ++k)
        if (k != i && k != j && d(i, k) < d(i, j)) s(i, j) += m(k);
    }
  return s;
}

MarginalProfile random_profile(Index n, Rng& rng, double scale = 100.0) {
  std::uniform_int_distribution<int> u(1, static_cast<int>(scale));
  MarginalProfile p{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Index i = 0; i < n; ++i) {
    p.outflows(i) = u(rng);
    p.relevance(i) = u(rng);
  }
  return p;
}

}  // namespace

TEST_SUITE("baselines") {
  TEST_CASE("gravity probabilities match the direct formula") {
    Rng rng(1);
    const auto pts = fixtures::jittered_points(12, rng);
    const auto dist = distance_matrix(pts);
    for (Deterrence det : {Deterrence::kPower, Deterrence::kExponential}) {
      auto prof = random_profile(12, rng);
      prof.relevance(4) = 0.0;
      const GravityParams params{0.8, det == Deterrence::kPower ? -1.7 : -0.9, det};
      const auto got = gravity_probabilities(prof, dist, params);
      const auto want = gravity_oracle(prof.relevance, dist.kilometers(), 0.8, params.beta2, det);
      CHECK((got.p - want).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(got.p.col(4).isZero());
      CHECK(got.empty_rows.empty());
    }
  }

  TEST_CASE("symmetric destinations split evenly") {
    Eigen::MatrixXd m(3, 3);
    m << 0, 1000, 1000, 1000, 0, 1500, 1000, 1500, 0;
    const DistanceMatrix dist(m);
    MarginalProfile prof{Eigen::Vector3d(10, 0, 0), Eigen::Vector3d(0, 5, 5)};
    const auto p = gravity_probabilities(prof, dist, GravityParams{});
    CHECK(p.p(0, 1) == doctest::Approx(0.5));
    CHECK(p.p(0, 2) == doctest::Approx(0.5));
    const auto net = gravity_generate(prof, dist, GravityParams{}, GenerationMode::expected());
    CHECK(net(0, 1) == doctest::Approx(5.0));
    CHECK(net(0, 2) == doctest::Approx(5.0));
  }

  TEST_CASE("gravity generation keeps outflows") {
    Rng rng(2);
    const auto dist = distance_matrix(build_grid_tessellation(manhattan_bbox()));
    const auto prof = random_profile(64, rng, 500);
    const auto exp = gravity_generate(prof, dist, GravityParams{}, GenerationMode::expected());
    for (Index i = 0; i < 64; ++i) {
      CHECK(exp.weights().row(i).sum() == doctest::Approx(prof.outflows(i)).epsilon(1e-9));
      CHECK(exp(i, i) == 0.0);
    }
    const auto a = gravity_generate(prof, dist, GravityParams{}, GenerationMode::multinomial(9));
    const auto b = gravity_generate(prof, dist, GravityParams{}, GenerationMode::multinomial(9));
    const auto c = gravity_generate(prof, dist, GravityParams{}, GenerationMode::multinomial(10));
    CHECK(a.weights() == b.weights());
    CHECK(a.weights() != c.weights());
    for (Index i = 0; i < 64; ++i) CHECK(a.weights().row(i).sum() == prof.outflows(i));
    CHECK((a.weights().array() == a.weights().array().round()).all());

    MarginalProfile frac = prof;
    frac.outflows(3) = 2.5;
    CHECK_THROWS_AS(gravity_generate(frac, dist, GravityParams{}, GenerationMode::multinomial(1)),
                    InvalidInput);
  }

  TEST_CASE("generate and refit recovers the parameters") {
    Rng rng(3);
    const auto dist = distance_matrix(build_grid_tessellation(manhattan_bbox()));
    const GravityParams truth{1.0, -2.0, Deterrence::kPower};
    std::vector<GravityObservation> obs;
    double trips = 0.0;
    for (int day = 0; day < 5; ++day) {
      auto prof = random_profile(64, rng, 8000);
      const auto net = gravity_generate(prof, dist, truth,
                                        GenerationMode::multinomial(derive_seed(5, "day", day)));
      obs.push_back({net.weights(), prof.relevance});
      trips += net.total();
    }
    REQUIRE(trips >= 1e6);
    const auto fit = fit_gravity(obs, dist, {.seed = 1});
    CHECK(fit.beta1 == doctest::Approx(1.0).epsilon(0.05));
    CHECK(fit.beta2 == doctest::Approx(-2.0).epsilon(0.05));
    const Eigen::Vector2d g = gravity_loglik_gradient(obs, dist, fit);
    CHECK(g.norm() < 1e-6 * trips);
  }

  TEST_CASE("fitting on networks with exponential deterrence") {
    Rng rng(4);
    const auto dist = distance_matrix(build_grid_tessellation(chicago_central_bbox()));
    const GravityParams truth{0.7, -0.6, Deterrence::kExponential};
    std::vector<GravityObservation> obs;
    for (int day = 0; day < 3; ++day) {
      auto prof = random_profile(64, rng, 6000);
      const auto net = gravity_generate(prof, dist, truth, GenerationMode::multinomial(day + 100));
      obs.push_back({net.weights(), prof.relevance});
    }
    const auto fit = fit_gravity(obs, dist, {.deterrence = Deterrence::kExponential, .seed = 2});
    CHECK(fit.deterrence == Deterrence::kExponential);
    CHECK(fit.beta1 == doctest::Approx(0.7).epsilon(0.05));
    CHECK(fit.beta2 == doctest::Approx(-0.6).epsilon(0.05));
    CHECK(std::isfinite(fit.loglik));
  }

  TEST_CASE("degenerate fits are refused") {
    const auto dist = distance_matrix(build_grid_tessellation(manhattan_bbox()));
    std::vector<MobilityNetwork> empty = {MobilityNetwork::zeros("a", 64)};
    CHECK_THROWS_AS(fit_gravity(empty, dist), FitError);
    FlowMatrix w = FlowMatrix::Zero(64, 64);
    w(0, 1) = 10;
    w(2, 2) = 4;
    std::vector<MobilityNetwork> one = {MobilityNetwork("a", w)};
    CHECK_THROWS_AS(fit_gravity(one, dist), FitError);
    CHECK_THROWS_AS(fit_gravity(std::span<const MobilityNetwork>{}, dist), InvalidInput);
  }

  TEST_CASE("intervening opportunities") {
    Rng rng(5);
    for (int rep = 0; rep < 10; ++rep) {
      const auto pts = fixtures::jittered_points(9, rng);
      const auto dist = distance_matrix(pts);
      const auto prof = random_profile(9, rng);
      const auto s = intervening_opportunities(prof, dist);
      CHECK((s - opportunities_oracle(prof.relevance, dist.meters())).cwiseAbs().maxCoeff() < 1e-9);
    }
    // Ties: equidistant destinations are not intervening for each other.
    Eigen::MatrixXd m(4, 4);
    m << 0, 1, 1, 2, 1, 0, 1.5, 1.5, 1, 1.5, 0, 1.5, 2, 1.5, 1.5, 0;
    const DistanceMatrix d(m);
    MarginalProfile prof{Eigen::Vector4d(1, 1, 1, 1), Eigen::Vector4d(3, 5, 7, 11)};
    const auto s = intervening_opportunities(prof, d);
    CHECK(s(0, 1) == 0.0);
    CHECK(s(0, 2) == 0.0);
    CHECK(s(0, 3) == 12.0);
    CHECK(s(3, 1) == 0.0);
    CHECK(s(3, 0) == 12.0);
  }

  TEST_CASE("radiation matches the direct formula and conserves outflow without ties") {
    Rng rng(6);
    for (int rep = 0; rep < 20; ++rep) {
      const auto pts = fixtures::jittered_points(10, rng);
      const auto dist = distance_matrix(pts);
      const auto prof = random_profile(10, rng);
      const auto net = radiation_generate(prof, dist, GenerationMode::expected());
      const auto s = opportunities_oracle(prof.relevance, dist.meters());
      const double big_m = prof.relevance.sum();
      for (Index i = 0; i < 10; ++i) {
        const double mi = prof.relevance(i);
        for (Index j = 0; j < 10; ++j) {
          const double mj = prof.relevance(j);
          const double want = i == j ? 0.0
                                     : prof.outflows(i) / (1 - mi / big_m) * mi * mj /
                                           ((mi + s(i, j)) * (mi + mj + s(i, j)));
          CHECK(std::abs(net(i, j) - want) <= 1e-12 * std::max(1.0, want));
        }
        CHECK(net.weights().row(i).sum() == doctest::Approx(prof.outflows(i)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("radiation edge cases") {
    Rng rng(7);
    const auto dist = distance_matrix(fixtures::jittered_points(4, rng));
    MarginalProfile all{Eigen::Vector4d(5, 1, 1, 1), Eigen::Vector4d(9, 0, 0, 0)};
    CHECK_THROWS_AS(radiation_generate(all, dist, GenerationMode::expected()), UndefinedValue);
    MarginalProfile zero{Eigen::Vector4d(5, 1, 1, 1), Eigen::Vector4d(0, 2, 3, 4)};
    const auto net = radiation_generate(zero, dist, GenerationMode::expected());
    CHECK(net.weights().row(0).isZero());
    CHECK(net.weights().allFinite());
    const auto sampled = radiation_generate(zero, dist, GenerationMode::multinomial(3));
    for (Index i = 1; i < 4; ++i) CHECK(sampled.weights().row(i).sum() == zero.outflows(i));
  }

  TEST_CASE("per-day generation sets") {
    const auto dist = distance_matrix(build_grid_tessellation(manhattan_bbox()));
    const auto ref = fixtures::random_networks("2020-01", 5, 64, 8);
    const auto g1 = gravity_generate_set(ref, dist, GravityParams{}, GenerationMode::multinomial(4));
    const auto g2 = gravity_generate_set(std::span(ref).subspan(2), dist, GravityParams{},
                                         GenerationMode::multinomial(4));
    REQUIRE(g1.size() == 5);
    CHECK(g1[3].date() == ref[3].date());
    CHECK(g1[3].weights() == g2[1].weights());  // independent of position in the set
    const auto r = radiation_generate_set(ref, dist, GenerationMode::expected());
    for (std::size_t k = 0; k < 5; ++k) CHECK(r[k].date() == ref[k].date());
  }

  TEST_CASE("parameter json round trip") {
    GravityParams p{0.91, -1.73, Deterrence::kExponential, -1234.5};
    const auto q = GravityParams::from_json(p.to_json());
    CHECK(q.beta1 == p.beta1);
    CHECK(q.beta2 == p.beta2);
    CHECK(q.deterrence == p.deterrence);
    CHECK(q.loglik == p.loglik);
    CHECK_THROWS(GravityParams::from_json("{not json"));
  }
}
