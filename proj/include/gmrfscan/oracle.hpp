#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gmrfscan/gmrf.hpp"
#include "gmrfscan/lattice.hpp"

namespace gmrfscan {

struct OracleReport {
  std::string check;
  bool pass = false;
  double observed = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  int64_t n_sims = 0;
};

// log L_S(x) = 1/2 x^T (I - Gamma_S^{-1}) x - 1/2 log det Gamma_S.
double log_likelihood_ratio_region(const Eigen::VectorXd& x_s, const Eigen::MatrixXd& gamma_s);

// B_{phi1,phi2} = (det(G1^-1) det(G2^-1) / det(G1^-1 + G2^-1 - I))^{1/2},
// computed in the log domain. Throws errc::domain if the eigenvalue-1/2
// condition fails (the inner determinant argument is not positive definite).
double b_functional(const PhiField& phi1, const PhiField& phi2, const Region& s,
                    const CovBuilder& builder);

// Monte Carlo verification of E0[L_S] = 1 and E0[L_{S,phi1} L_{S,phi2}] = B.
std::vector<OracleReport> second_moment_check(const PhiField& phi1, const PhiField& phi2,
                                              const Region& s, const CovBuilder& builder,
                                              int64_t n_sims, uint64_t seed);

struct BayesRiskResult {
  double risk = 0.0;     // type I + uniform-average type II of the LR test
  double se = 0.0;
  double lower_bound_rhs = 0.0;  // 1 - (1/2) sqrt(E0 L^2 - 1), analytic
};

// Risk of the exact likelihood-ratio test on a small disjoint instance,
// sandwiched against the Cauchy-Schwarz lower bound.
BayesRiskResult bayes_risk_mc(const RegionClass& c, const PhiField& phi, const Lattice& lat,
                              const CovBuilder& builder, int64_t n_sims, uint64_t seed);

// Executable structural checks: eigenvalue sandwich, sigma^2 bounds, the
// Parseval correlation bound, interior/boundary precision structure, and the
// Monte Carlo residual covariance identity.
std::vector<OracleReport> lemma_suite(const PhiField& phi, const Region& s, const Lattice& lat,
                                      int mc_reps = 2000, uint64_t seed = 1);

}  // namespace gmrfscan
