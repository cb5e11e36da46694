#include <doctest.h>

#include <cmath>

#include "gmrfscan/bounds.hpp"
#include "gmrfscan/oracle.hpp"
#include "oracles.hpp"

using namespace gmrfscan;

namespace {

// Disjoint class of 100 intervals of length 10 on a length-1000 line.
struct TilingSetup {
  Lattice lat{1, 1000};
  RegionClass cls = disjoint_tiling(lat, 10);
};

}  // namespace

TEST_CASE("known-covariance lower bound") {
  TilingSetup fx;
  REQUIRE(fx.cls.size() == 100);

  SUBCASE("frozen arithmetic example") {
    // |C| = 100, all |S| = 10, l2^2 = 0.01, l1 = 0.1: independently
    // recomputed 1 - sqrt(100 e^{1.25}) / 200.
    const double v =
        known_cov_lower_bound_value(100.0, std::vector<double>(100, 10.0), 0.01, 0.1);
    CHECK(v == doctest::Approx(0.9065877021283889).epsilon(1e-12));
  }
  SUBCASE("field evaluator agrees with the arithmetic core") {
    PhiField phi(1, 1);
    phi.set_symmetric({1}, 0.05);
    const BoundReport rep = known_cov_lower_bound(fx.cls, phi);
    const double expected = known_cov_lower_bound_value(
        100.0, std::vector<double>(100, 10.0), phi.l2() * phi.l2(), phi.l1());
    CHECK(rep.bound_value == doctest::Approx(expected).epsilon(1e-15));
    CHECK(rep.conditions.at("merge_condition_finite_n").lhs ==
          doctest::Approx(std::log(100.0) -
                          10.0 * phi.l2() * phi.l2() / (1.0 - 2.0 * phi.l1()) * 10.0)
              .epsilon(1e-12));
  }
  SUBCASE("zero-phi limit") {
    const PhiField zero(1, 1);
    const BoundReport rep = known_cov_lower_bound(fx.cls, zero);
    CHECK(rep.bound_value == doctest::Approx(1.0 - 1.0 / 20.0).epsilon(1e-12));
  }
  SUBCASE("l1 at one half rejected") {
    PhiField phi(1, 1);
    phi.set_symmetric({1}, 0.25);
    CHECK_THROWS_AS(known_cov_lower_bound(fx.cls, phi), error);
  }
  SUBCASE("overlapping class rejected") {
    const RegionClass overlapping = interval_class(fx.lat, 10);
    PhiField phi(1, 1);
    phi.set_symmetric({1}, 0.05);
    CHECK_THROWS_AS(known_cov_lower_bound(overlapping, phi), error);
  }
}

TEST_CASE("impossibility radius") {
  Lattice lat(1, 500);
  const RegionClass cls = disjoint_tiling(lat, 50);
  REQUIRE(cls.size() == 10);
  CHECK(known_cov_impossibility_radius(cls, 0.5) ==
        doctest::Approx(0.010150347630467653).epsilon(1e-12));

  // Monotone as a -> 0.
  CHECK(known_cov_impossibility_radius(cls, 0.1) >
        known_cov_impossibility_radius(cls, 0.5));

  RegionClass single;
  single.kind = RegionClassKind::explicit_class;
  single.regions.push_back(make_hypercube_region(lat, {3}, 1));
  CHECK(known_cov_impossibility_radius(single, 0.1) ==
        doctest::Approx(std::log(400.0) / 10.0).epsilon(1e-12));
}

TEST_CASE("theorem-3 condition report") {
  Lattice lat(1, 500);
  const RegionClass cls = disjoint_tiling(lat, 50);
  const BoundReport rep = theorem3_conditions(cls, lat, 1, 0.5, 0.1, 1.0);
  const auto& c1 = rep.conditions.at("nh_size_clause");
  CHECK(c1.lhs == doctest::Approx(2.0));
  CHECK(c1.rhs == doctest::Approx(16.690410034766703).epsilon(1e-12));
  CHECK(c1.satisfied);
  CHECK(rep.bound_value == doctest::Approx(0.5));

  // Oversized neighborhood violates the size clause.
  const BoundReport bad = theorem3_conditions(cls, lat, 20, 0.5, 0.1, 1.0);
  CHECK_FALSE(bad.conditions.at("nh_size_clause").satisfied);
  CHECK(bad.bound_value == -std::numeric_limits<double>::infinity());

  // r = 0 satisfies the signal clause for any positive constant.
  const BoundReport zero_r = theorem3_conditions(cls, lat, 1, 0.5, 0.0, 1e-9);
  CHECK(zero_r.conditions.at("signal_strength").satisfied);
}

TEST_CASE("rademacher prior") {
  SUBCASE("exact norm and symmetry across seeds") {
    for (uint64_t seed = 0; seed < 100; ++seed) {
      const PhiField phi = rademacher_prior_sample(1, 1, 0.3, seed);
      CHECK(std::abs(phi.l2() - 0.3) < 1e-12);
      CHECK(phi.at({1}) == phi.at({-1}));
      CHECK(std::abs(std::abs(phi.at({1})) - 0.3 / std::sqrt(2.0)) < 1e-12);
      CHECK(validate_phi(phi).valid);
    }
  }
  SUBCASE("d = 2 half lattice carries four signs") {
    // Acceptability needs r |N_h| < 1, so r < 1/8 here.
    const PhiField phi = rademacher_prior_sample(2, 1, 0.1, uint64_t(5));
    CHECK(std::abs(phi.l2() - 0.1) < 1e-12);
    for (const auto& v : phi.offsets().offsets) {
      MultiIndex neg = v;
      for (auto& c : neg) c = -c;
      CHECK(phi.at(v) == phi.at(neg));
      CHECK(std::abs(std::abs(phi.at(v)) - 0.1 / std::sqrt(8.0)) < 1e-12);
    }
  }
  SUBCASE("acceptability precondition") {
    CHECK_THROWS_AS(rademacher_prior_sample(1, 1, 0.5, uint64_t(1)), error);  // r |N_h| = 1
  }
}

TEST_CASE("V_S estimation") {
  Lattice lat(1, 50);
  const CovBuilder builder{&lat, 0, 0};
  const Region s = make_hypercube_region(lat, {10}, 6);

  SUBCASE("degenerate prior at zero gives V_S = 1") {
    const auto prior = [](RngStream&) { return PhiField(1, 1); };
    const VsEstimate est = vs_mc(s, prior, builder, 50, 3);
    CHECK(est.vs == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(est.se == doctest::Approx(0.0));
    CHECK(prop1_bound(std::vector<double>(100, est.vs)) ==
          doctest::Approx(1.0 - 1.0 / 20.0).epsilon(1e-12));
  }
  SUBCASE("degenerate prior matches the closed determinant form") {
    const PhiField phi = ar_to_gmrf(make_ar({0.3}));
    const auto prior = [&](RngStream&) { return phi; };
    const VsEstimate est = vs_mc(s, prior, builder, 10, 3);

    // Dual route: det(I - (I - Gamma_S)^2)^{-1/2}.
    const Eigen::MatrixXd gamma = builder(phi, s);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(6, 6);
    const Eigen::MatrixXd inside = eye - (eye - gamma) * (eye - gamma);
    const double closed = 1.0 / std::sqrt(inside.determinant());
    CHECK(est.vs == doctest::Approx(closed).epsilon(1e-9));
  }
  SUBCASE("rademacher prior agrees with exhaustive sign enumeration") {
    const double r = 0.1;
    const auto prior = [&](RngStream& rng) { return rademacher_prior_sample(1, 1, r, rng); };
    const VsEstimate est = vs_mc(s, prior, builder, 4000, 9);

    // d = 1, h = 1: two sign patterns, four equally likely pairs.
    PhiField plus(1, 1), minus(1, 1);
    plus.set_symmetric({1}, r / std::sqrt(2.0));
    minus.set_symmetric({1}, -r / std::sqrt(2.0));
    const double exact = (b_functional(plus, plus, s, builder) +
                          b_functional(minus, minus, s, builder) +
                          2.0 * b_functional(plus, minus, s, builder)) /
                         4.0;
    CHECK(std::abs(est.vs - exact) <= 3.0 * est.se + 1e-12);
    CHECK(est.excluded == 0);
  }
}

TEST_CASE("prop-1 bound dominates the known-covariance relaxation") {
  TilingSetup fx;
  PhiField phi(1, 1);
  phi.set_symmetric({1}, 0.08);
  const CovBuilder builder{&fx.lat, 0, 0};
  std::vector<double> vs;
  for (const auto& s : fx.cls.regions) vs.push_back(b_functional(phi, phi, s, builder));
  const double exact_bound = prop1_bound(vs);
  const double relaxed = known_cov_lower_bound(fx.cls, phi).bound_value;
  CHECK(exact_bound >= relaxed - 1e-12);
}

TEST_CASE("tiling closed form equals the general evaluator") {
  Lattice lat(1, 500);
  const RegionClass cls = disjoint_tiling(lat, 50);
  PhiField phi(1, 1);
  phi.set_symmetric({1}, 0.1);
  const double general = known_cov_lower_bound(cls, phi).bound_value;
  const double closed = cor3_tiling_bound(500.0, 50.0, phi);
  CHECK(general == doctest::Approx(closed).epsilon(1e-12));
}

TEST_CASE("rate evaluators") {
  SUBCASE("frozen AR rates") {
    const RatePair rp = rate_ar(500, 50, 1, 1.0, 1.0);
    CHECK(rp.lower == doctest::Approx(0.07640024444758385).epsilon(1e-12));
    CHECK(rp.upper == doctest::Approx(0.1741503933788025).epsilon(1e-12));
    CHECK(rp.h_condition.satisfied);
  }
  SUBCASE("AR structure") {
    // At k = n the first lower term vanishes (log 1 = 0).
    const RatePair edge = rate_ar(500, 500, 1, 1.0, 1.0);
    CHECK(edge.lower == doctest::Approx(0.0));
    CHECK(rate_texture(500, 500, 1, 1.0, 1.0).lower == doctest::Approx(0.0));
    const RatePair rp = rate_ar(500, 499, 1, 1.0, 1.0);
    CHECK(rp.lower == doctest::Approx((std::log(500.0 / 499.0) +
                                       std::sqrt(std::log(500.0 / 499.0))) /
                                      499.0));
    // Upper scales as sqrt(h) in its second term.
    const RatePair h1 = rate_ar(500, 50, 1, 1.0, 1.0);
    const RatePair h4 = rate_ar(500, 50, 4, 1.0, 1.0);
    const double t1 = h1.upper - std::log(500.0) / 50.0;
    const double t4 = h4.upper - std::log(500.0) / 50.0;
    CHECK(t4 == doctest::Approx(2.0 * t1).epsilon(1e-12));
  }
  SUBCASE("frozen texture rate") {
    const RatePair rp = rate_texture(2500, 225, 1, 1.0, 1.0);
    CHECK(rp.lower == doctest::Approx(0.017598672276921745).epsilon(1e-12));
    CHECK(rp.upper == doctest::Approx(rp.lower).epsilon(1e-12));
    // Doubling h doubles the radical term.
    const RatePair h2 = rate_texture(2500, 225, 2, 1.0, 1.0);
    const double base = std::log(2500.0 / 225.0) / 225.0;
    CHECK(h2.lower - base == doctest::Approx(2.0 * (rp.lower - base)).epsilon(1e-12));
  }
  SUBCASE("frozen hypercube rate") {
    const BoundReport rep = rate_hypercube(1, 500, 50, 2, 1.0, 1.0);
    CHECK(rep.bound_value == doctest::Approx(0.04605170185988092).epsilon(1e-12));
    // Large |N_h| switches the max to the radical term.
    const BoundReport big = rate_hypercube(1, 500, 50, 50, 1.0, 1.0);
    CHECK(big.bound_value ==
          doctest::Approx(std::sqrt(50.0 * std::log(10.0)) / 50.0).epsilon(1e-12));
    // n/k -> 1+ drives the rate to zero.
    CHECK(rate_hypercube(1, 505, 500, 2, 1.0, 1.0).bound_value < 1e-3);
  }
  SUBCASE("rates decrease in k at fixed n") {
    double prev = 1e9;
    for (double k : {25.0, 50.0, 100.0, 200.0}) {
      const double up = rate_ar(500, k, 1, 1.0, 1.0).upper;
      CHECK(up < prev);
      prev = up;
    }
  }
  SUBCASE("radical terms increase in the neighborhood size") {
    double prev = 0.0;
    for (double nh : {2.0, 8.0, 24.0, 48.0}) {
      const double v = rate_hypercube(2, 2500, 225, nh, 1.0, 1.0).bound_value;
      CHECK(v >= prev);
      prev = v;
    }
    CHECK(rate_ar(500, 50, 4, 1.0, 1.0).upper > rate_ar(500, 50, 1, 1.0, 1.0).upper);
    CHECK(rate_texture(2500, 225, 3, 1.0, 1.0).lower >
          rate_texture(2500, 225, 1, 1.0, 1.0).lower);
  }
}
