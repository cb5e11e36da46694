#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gmrfscan/simulate.hpp"

using namespace gmrfscan;

TEST_CASE("null sampling: determinism and moments") {
  Lattice lat(1, 10000);
  const Field a = sample_null(lat, 1);
  const Field b = sample_null(lat, 1);
  CHECK(a.data == b.data);
  const Field c = sample_null(lat, 2);
  CHECK(a.data != c.data);

  double mean = 0, var = 0;
  for (double x : a.data) mean += x;
  mean /= lat.size();
  for (double x : a.data) var += (x - mean) * (x - mean);
  var /= (lat.size() - 1);
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(lat.size())));
  CHECK(var > 0.94);
  CHECK(var < 1.06);
}

TEST_CASE("null sample mean band at n = 500") {
  Lattice lat(1, 500);
  const Field f = sample_null(lat, 1);
  double mean = 0;
  for (double x : f.data) mean += x;
  mean /= 500.0;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(500.0));
}

TEST_CASE("patch sampling") {
  Lattice lat(1, 100);
  SUBCASE("zero field gives i.i.d. draws") {
    const PhiField phi(1, 1);
    const CovTable cov = autocovariances(phi, 10);
    const Region s = make_hypercube_region(lat, {1}, 8);
    // Covariance of 1e5 replicates matches the identity entrywise.
    PatchSampler sampler(phi, s, cov, lat);
    const int reps = 100000;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(8, 8);
    RngStream rng(5, 0);
    for (int i = 0; i < reps; ++i) {
      const Eigen::VectorXd x = sampler.sample_patch(rng);
      acc.selfadjointView<Eigen::Lower>().rankUpdate(x, 1.0);
    }
    const Eigen::MatrixXd emp = Eigen::MatrixXd(acc.selfadjointView<Eigen::Lower>()) / reps;
    CHECK((emp - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 0.02);
  }
  SUBCASE("exactness: empirical covariance matches Gamma_S on a small patch") {
    const PhiField phi = ar_to_gmrf(make_ar({0.6}));
    const CovTable cov = autocovariances(phi, 10);
    const Region s = make_hypercube_region(lat, {4}, 8);
    const Eigen::MatrixXd gamma = covariance_submatrix(phi, s, cov, lat);
    PatchSampler sampler(phi, s, cov, lat);
    const int reps = 100000;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(8, 8);
    RngStream rng(6, 0);
    for (int i = 0; i < reps; ++i) {
      const Eigen::VectorXd x = sampler.sample_patch(rng);
      acc.selfadjointView<Eigen::Lower>().rankUpdate(x, 1.0);
    }
    const Eigen::MatrixXd emp = Eigen::MatrixXd(acc.selfadjointView<Eigen::Lower>()) / reps;
    CHECK((emp - gamma).cwiseAbs().maxCoeff() < 0.02);
  }
  SUBCASE("lag-one correlation of an AR(1) patch") {
    const PhiField phi = ar_to_gmrf(make_ar({0.9}));
    const CovTable cov = autocovariances(phi, 50);
    const Region s = make_hypercube_region(lat, {10}, 50);
    PatchSampler sampler(phi, s, cov, lat);
    RngStream rng(7, 0);
    double num = 0, den = 0;
    const int reps = 10000;
    for (int i = 0; i < reps; ++i) {
      const Eigen::VectorXd x = sampler.sample_patch(rng);
      for (int j = 0; j + 1 < 50; ++j) {
        num += x[j] * x[j + 1];
        den += x[j] * x[j];
      }
    }
    CHECK(std::abs(num / den - 0.9) < 0.02);
  }
  SUBCASE("singleton region is a standard normal") {
    const PhiField phi = ar_to_gmrf(make_ar({0.9}));
    const CovTable cov = autocovariances(phi, 1);
    const Region s = make_hypercube_region(lat, {5}, 1);
    PatchSampler sampler(phi, s, cov, lat);
    RngStream rng(8, 0);
    double var = 0;
    const int reps = 50000;
    for (int i = 0; i < reps; ++i) {
      const double x = sampler.sample_patch(rng)[0];
      var += x * x;
    }
    CHECK(std::abs(var / reps - 1.0) < 0.03);
  }
  SUBCASE("oversized patch rejected") {
    Lattice big(1, 20000);
    const PhiField phi(1, 1);
    const CovTable cov = autocovariances(phi, 1);
    Region s = make_hypercube_region(big, {1}, 10001);
    CHECK_THROWS_AS(PatchSampler(phi, s, cov, big), error);
  }
}

TEST_CASE("alternative field: marginals, independence, reproducibility") {
  Lattice lat(1, 60);
  const PhiField phi = ar_to_gmrf(make_ar({0.9}));
  const CovTable cov = autocovariances(phi, 20);
  const Region s = make_hypercube_region(lat, {21}, 20);

  const Field f1 = sample_alternative(lat, s, phi, cov, 11);
  const Field f2 = sample_alternative(lat, s, phi, cov, 11);
  CHECK(f1.data == f2.data);
  CHECK(f1.prov.hypothesis == Hypothesis::H1);
  CHECK(f1.prov.rng == "philox4x32-10");

  // Patch/complement independence and unit marginals, Monte Carlo.
  PatchSampler sampler(phi, s, cov, lat);
  RngStream rng(12, 0);
  const int reps = 10000;
  double cross = 0, var_in = 0, var_out = 0;
  for (int i = 0; i < reps; ++i) {
    const Field f = sampler.sample_field(rng, 12);
    const double inside = f.data[30];   // node in S
    const double outside = f.data[5];   // node outside S
    cross += inside * outside;
    var_in += inside * inside;
    var_out += outside * outside;
  }
  CHECK(std::abs(cross / reps) < 4.0 / std::sqrt(static_cast<double>(reps)));
  CHECK(std::abs(var_in / reps - 1.0) < 0.06);
  CHECK(std::abs(var_out / reps - 1.0) < 0.06);
}

TEST_CASE("zero-phi alternative equals a null draw in distribution") {
  Lattice lat(1, 50);
  const PhiField phi(1, 1);
  const CovTable cov = autocovariances(phi, 10);
  const Region s = make_hypercube_region(lat, {11}, 10);
  PatchSampler sampler(phi, s, cov, lat);
  RngStream rng(13, 0);
  double mean = 0, var = 0;
  const int reps = 20000;
  for (int i = 0; i < reps; ++i) {
    const Field f = sampler.sample_field(rng, 13);
    mean += f.data[15];
    var += f.data[15] * f.data[15];
  }
  mean /= reps;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(reps)));
  CHECK(std::abs(var / reps - 1.0) < 0.04);
}

TEST_CASE("field CSV round trip") {
  Lattice lat(1, 20);
  const Field f = sample_null(lat, 3);
  std::stringstream ss;
  write_field_csv(f, ss);
  const auto data = read_field_csv(ss);
  REQUIRE(data.size() == f.data.size());
  for (size_t i = 0; i < data.size(); ++i) CHECK(data[i] == f.data[i]);
}

TEST_CASE("field JSON carries provenance") {
  Lattice lat(1, 30);
  const PhiField phi = ar_to_gmrf(make_ar({0.5}));
  const CovTable cov = autocovariances(phi, 10);
  const Region s = make_hypercube_region(lat, {11}, 10);
  const Field f = sample_alternative(lat, s, phi, cov, 21);
  std::stringstream ss;
  write_field_json(f, ss);
  const std::string out = ss.str();
  CHECK(out.find("philox4x32-10") != std::string::npos);
  CHECK(out.find("\"hypothesis\": \"H1\"") != std::string::npos);
  CHECK(out.find("\"seed\": 21") != std::string::npos);
}
