#include <doctest.h>

#include <cmath>

#include "gmrfscan/oracle.hpp"
#include "gmrfscan/rng.hpp"
#include "oracles.hpp"

using namespace gmrfscan;

TEST_CASE("log likelihood ratio") {
  SUBCASE("identity covariance gives zero for every observation") {
    RngStream rng(1, 0);
    for (int rep = 0; rep < 5; ++rep) {
      Eigen::VectorXd x(4);
      for (int i = 0; i < 4; ++i) x[i] = rng.next_gaussian();
      CHECK(std::abs(log_likelihood_ratio_region(x, Eigen::MatrixXd::Identity(4, 4))) < 1e-12);
    }
  }
  SUBCASE("singleton with unit variance") {
    Eigen::VectorXd x(1);
    x[0] = 1.7;
    CHECK(std::abs(log_likelihood_ratio_region(x, Eigen::MatrixXd::Identity(1, 1))) < 1e-12);
  }
  SUBCASE("two-by-two determinant by hand") {
    Eigen::MatrixXd g(2, 2);
    const double rho = 0.9;
    g << 1.0, rho, rho, 1.0;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    CHECK(log_likelihood_ratio_region(x, g) ==
          doctest::Approx(-0.5 * std::log(1.0 - rho * rho)).epsilon(1e-12));
    CHECK(-0.5 * std::log(1.0 - 0.81) == doctest::Approx(0.8303656034108255).epsilon(1e-12));
  }
  SUBCASE("non-positive-definite input rejected") {
    Eigen::MatrixXd g(2, 2);
    g << 1.0, 1.5, 1.5, 1.0;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    CHECK_THROWS_AS(log_likelihood_ratio_region(x, g), error);
  }
}

TEST_CASE("b functional") {
  Lattice lat(1, 30);
  const CovBuilder builder{&lat, 0, 0};
  const Region s = make_hypercube_region(lat, {5}, 4);
  const PhiField zero(1, 1);
  const PhiField phi3 = ar_to_gmrf(make_ar({0.3}));

  CHECK(b_functional(zero, zero, s, builder) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b_functional(phi3, zero, s, builder) == doctest::Approx(1.0).epsilon(1e-9));
  const double b_once = b_functional(phi3, phi3, s, builder);
  const double b_again = b_functional(phi3, phi3, s, builder);
  CHECK(b_once == b_again);

  // Symmetry in the two arguments is exact.
  const PhiField phi5 = ar_to_gmrf(make_ar({0.5}));
  CHECK(b_functional(phi3, phi5, s, builder) == b_functional(phi5, phi3, s, builder));

  // Domain violation: a strong field pushes eigenvalues of Gamma_S above 2.
  const PhiField strong = ar_to_gmrf(make_ar({0.9}));
  bool domain_hit = false;
  try {
    b_functional(strong, strong, s, builder);
  } catch (const error& e) {
    domain_hit = (e.kind() == errc::domain);
  }
  CHECK(domain_hit);
}

TEST_CASE("second moment identities by Monte Carlo") {
  Lattice lat(1, 30);
  const CovBuilder builder{&lat, 0, 0};
  const Region s = make_hypercube_region(lat, {5}, 4);

  SUBCASE("unit mean at moderate psi") {
    const PhiField phi = ar_to_gmrf(make_ar({0.35}));
    const auto reports = second_moment_check(phi, phi, s, builder, 100000, 17);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].check == "unit_mean_likelihood_ratio");
    CHECK(reports[0].pass);
  }
  SUBCASE("strong field violates the determinant domain") {
    // At psi = 0.5 and |S| = 4 the top eigenvalue of Gamma_S already exceeds
    // 2, so E0[L^2] diverges and the check must refuse.
    const PhiField phi = ar_to_gmrf(make_ar({0.5}));
    bool domain_hit = false;
    try {
      second_moment_check(phi, phi, s, builder, 100, 17);
    } catch (const error& e) {
      domain_hit = (e.kind() == errc::domain);
    }
    CHECK(domain_hit);
  }
  SUBCASE("cross moment matches B at psi = 0.3 and 0.2") {
    const PhiField a = ar_to_gmrf(make_ar({0.3}));
    const PhiField b = ar_to_gmrf(make_ar({0.2}));
    const auto reports = second_moment_check(a, b, s, builder, 200000, 19);
    CHECK(reports[1].check == "second_moment_equals_b_functional");
    CHECK(reports[1].pass);
  }
  SUBCASE("zero field has an identically-one ratio") {
    const PhiField zero(1, 1);
    const auto reports = second_moment_check(zero, zero, s, builder, 1000, 21);
    CHECK(reports[0].observed == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(reports[0].tolerance == doctest::Approx(0.0));
    CHECK(reports[0].pass);
    CHECK(reports[1].observed == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("a deliberately wrong expectation fails the report") {
    // Contract check on the report logic itself: shift the observed value.
    const PhiField phi = ar_to_gmrf(make_ar({0.3}));
    auto reports = second_moment_check(phi, phi, s, builder, 50000, 23);
    OracleReport r = reports[0];
    r.expected += 100.0 * (r.tolerance + 1e-6);
    r.pass = std::abs(r.observed - r.expected) <= r.tolerance;
    CHECK_FALSE(r.pass);
  }
}

TEST_CASE("independence of disjoint-region likelihood ratios") {
  Lattice lat(1, 20);
  const CovBuilder builder{&lat, 0, 0};
  const Region s1 = make_hypercube_region(lat, {1}, 4);
  const Region s2 = make_hypercube_region(lat, {11}, 4);
  const PhiField phi = ar_to_gmrf(make_ar({0.4}));
  const Eigen::MatrixXd g = builder(phi, s1);
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(4, 4) - llt.solve(Eigen::MatrixXd::Identity(4, 4));
  const double ld = 2.0 * Eigen::MatrixXd(llt.matrixLLT()).diagonal().array().log().sum();

  RngStream rng = substream(27, StreamPurpose::oracle, 0);
  const int n = 100000;
  double sum1 = 0, sum2 = 0, sum12 = 0, sumsq = 0;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x1(4), x2(4);
    for (int j = 0; j < 4; ++j) x1[j] = rng.next_gaussian();
    for (int j = 0; j < 4; ++j) x2[j] = rng.next_gaussian();
    const double l1 = std::exp(0.5 * x1.dot(m * x1) - 0.5 * ld);
    const double l2 = std::exp(0.5 * x2.dot(m * x2) - 0.5 * ld);
    sum1 += l1;
    sum2 += l2;
    sum12 += l1 * l2;
    sumsq += (l1 * l2) * (l1 * l2);
  }
  const double cov = sum12 / n - (sum1 / n) * (sum2 / n);
  const double se = std::sqrt((sumsq / n - (sum12 / n) * (sum12 / n)) / n);
  CHECK(std::abs(cov) <= 3.0 * se + 1e-4);
}

TEST_CASE("bayes risk sandwich") {
  SUBCASE("zero field: test never rejects, risk and bound are one") {
    Lattice lat(1, 12);
    const RegionClass cls = disjoint_tiling(lat, 3);
    const CovBuilder builder{&lat, 0, 0};
    const BayesRiskResult br = bayes_risk_mc(cls, PhiField(1, 1), lat, builder, 500, 3);
    CHECK(br.risk == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(br.lower_bound_rhs == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("toy instance, moderate patch: non-vacuous sandwich") {
    Lattice lat(1, 12);
    const RegionClass cls = disjoint_tiling(lat, 3);
    const CovBuilder builder{&lat, 0, 0};
    const PhiField phi = ar_to_gmrf(make_ar({0.5}));
    const BayesRiskResult br = bayes_risk_mc(cls, phi, lat, builder, 4000, 5);
    CHECK(std::isfinite(br.lower_bound_rhs));
    CHECK(br.risk >= br.lower_bound_rhs - 3.0 * br.se);
    CHECK(br.risk <= 1.0 + 3.0 * br.se);
  }
  SUBCASE("toy instance, strong patch: bound degenerates but stays valid") {
    Lattice lat(1, 12);
    const RegionClass cls = disjoint_tiling(lat, 3);
    const CovBuilder builder{&lat, 0, 0};
    const PhiField phi = ar_to_gmrf(make_ar({0.9}));
    const BayesRiskResult br = bayes_risk_mc(cls, phi, lat, builder, 4000, 5);
    CHECK(br.lower_bound_rhs == -std::numeric_limits<double>::infinity());
    CHECK(br.risk >= br.lower_bound_rhs);
    CHECK(br.risk <= 1.0 + 3.0 * br.se);
  }
  SUBCASE("near-unit-root patch drops the risk below one half") {
    Lattice lat(1, 12);
    RegionClass cls;
    cls.kind = RegionClassKind::explicit_class;
    cls.regions.push_back(make_hypercube_region(lat, {1}, 3));
    cls.regions.push_back(make_hypercube_region(lat, {5}, 3));
    cls.regions.push_back(make_hypercube_region(lat, {9}, 3));
    const CovBuilder builder{&lat, 0, 0};
    const PhiField phi = ar_to_gmrf(make_ar({0.99}));
    const BayesRiskResult br = bayes_risk_mc(cls, phi, lat, builder, 4000, 7);
    CHECK(br.risk < 0.5);
  }
  SUBCASE("instance-size cap") {
    Lattice lat(1, 3000);
    const RegionClass cls = disjoint_tiling(lat, 100);
    const CovBuilder builder{&lat, 0, 0};
    CHECK_THROWS_AS(bayes_risk_mc(cls, PhiField(1, 1), lat, builder, 100, 1), error);
  }
  SUBCASE("region relabeling leaves the estimate unchanged within noise") {
    Lattice lat(1, 12);
    const RegionClass cls = disjoint_tiling(lat, 3);
    RegionClass reversed;
    reversed.kind = RegionClassKind::explicit_class;
    for (Index i = cls.size() - 1; i >= 0; --i) reversed.regions.push_back(cls.regions[i]);
    const CovBuilder builder{&lat, 0, 0};
    const PhiField phi = ar_to_gmrf(make_ar({0.8}));
    const BayesRiskResult a = bayes_risk_mc(cls, phi, lat, builder, 4000, 11);
    const BayesRiskResult b = bayes_risk_mc(reversed, phi, lat, builder, 4000, 13);
    CHECK(std::abs(a.risk - b.risk) <= 3.0 * std::sqrt(a.se * a.se + b.se * b.se));
  }
}

TEST_CASE("structural lemma suite") {
  SUBCASE("moderate one-dimensional field") {
    Lattice lat(1, 60);
    const PhiField phi = ar_to_gmrf(make_ar({0.6}));
    const Region s = make_hypercube_region(lat, {20}, 20);
    const auto reports = lemma_suite(phi, s, lat, 2000, 29);
    for (const auto& r : reports) {
      INFO(r.check, " observed=", r.observed, " expected=", r.expected);
      CHECK(r.pass);
    }
  }
  SUBCASE("zero field: bounds are tight or trivial") {
    Lattice lat(1, 30);
    const Region s = make_hypercube_region(lat, {10}, 10);
    const auto reports = lemma_suite(PhiField(1, 1), s, lat, 500, 31);
    for (const auto& r : reports) CHECK(r.pass);
  }
  SUBCASE("two-dimensional field with h = 1") {
    Lattice lat(2, 30);
    RngStream rng(33, 0);
    const PhiField phi = testor::random_phi(2, 1, 0.6, rng);
    const Region s = make_hypercube_region(lat, {5, 5}, 7);
    const auto reports = lemma_suite(phi, s, lat, 2000, 35);
    for (const auto& r : reports) {
      INFO(r.check, " observed=", r.observed, " expected=", r.expected);
      CHECK(r.pass);
    }
  }
  SUBCASE("near-critical field is flagged but passes") {
    Lattice lat(1, 80);
    PhiField phi(1, 1);
    phi.set_symmetric({1}, 0.475);  // l1 = 0.95
    const Region s = make_hypercube_region(lat, {30}, 16);
    const auto reports = lemma_suite(phi, s, lat, 1000, 37);
    bool flagged = false;
    for (const auto& r : reports) {
      if (r.check == "slow_decay_warning") flagged = true;
      CHECK(r.pass);
    }
    CHECK(!flagged);  // 0.95 is the threshold, not past it

    PhiField hotter(1, 1);
    hotter.set_symmetric({1}, 0.48);
    const auto reports2 = lemma_suite(hotter, s, lat, 1000, 39);
    flagged = false;
    for (const auto& r : reports2) {
      if (r.check == "slow_decay_warning") flagged = true;
      CHECK(r.pass);
    }
    CHECK(flagged);
  }
}
