#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gmrfscan/gmrf.hpp"
#include "gmrfscan/lattice.hpp"
#include "gmrfscan/rng.hpp"

namespace gmrfscan {

struct ConditionCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;
};

struct BoundReport {
  double bound_value = 0.0;  // risk lower bound in [-inf, 1]
  std::map<std::string, ConditionCheck> conditions;
  std::map<std::string, double> constants_used;
};

// Arithmetic core of the known-covariance bound, usable with abstract norm
// values: 1 - (1/(2 nc)) [sum_S exp(10 |S| l2sq / (1 - 2 l1))]^{1/2}.
double known_cov_lower_bound_value(double nc, const std::vector<double>& region_sizes,
                                   double l2sq, double l1);

// Risk lower bound for a known covariance over a disjoint class:
// 1 - (1/(2|C|)) [sum_S exp(10 |S| ||phi||_2^2 / (1 - 2||phi||_1))]^{1/2}.
// Also reports the finite-n surrogate of the merge condition.
BoundReport known_cov_lower_bound(const RegionClass& c, const PhiField& phi);

// Threshold on ||phi||_2^2 / (1 - 2||phi||_1) below which the minimax risk is
// at least 1 - a: min_S log(4|C|/a^2) / (10 |S|).
double known_cov_impossibility_radius(const RegionClass& c, double a);

// The neighborhood-size conditions and signal condition of the unknown-cov
// lower bound; satisfied => average risk >= 1 - a.
BoundReport theorem3_conditions(const RegionClass& c, const Lattice& lat, int h, double a,
                                double r, double c0);

// Least-favorable prior: i.i.d. Rademacher signs on a half neighborhood,
// scaled so ||phi||_2 = r exactly, mirrored by symmetry.
PhiField rademacher_prior_sample(int d, int h, double r, RngStream& rng);
PhiField rademacher_prior_sample(int d, int h, double r, uint64_t seed);

struct VsEstimate {
  double vs = 0.0;
  double se = 0.0;
  int64_t excluded = 0;  // sampled pairs violating the determinant domain
  int64_t n_pairs = 0;
};

// Monte Carlo estimate of V_S = E_pi[B_{phi1,phi2}] over i.i.d. prior pairs.
VsEstimate vs_mc(const Region& s, const std::function<PhiField(RngStream&)>& prior,
                 const CovBuilder& builder, int64_t n_pairs, uint64_t seed);

// 1 - (1/(2|C|)) (sum_S V_S)^{1/2}.
double prop1_bound(const std::vector<double>& vs_per_region);

// Uniform-tiling closed form of the known-covariance bound
// (|C| = n/k, all |S| = k); algebraically equal to known_cov_lower_bound.
double cor3_tiling_bound(double n, double k, const PhiField& phi);

struct RatePair {
  double lower = 0.0;  // impossibility rate (r^2 below which hypotheses merge)
  double upper = 0.0;  // achievability rate for the pseudo-likelihood test
  ConditionCheck h_condition;  // finite-n surrogate of the h = o(...) condition
};

RatePair rate_ar(double n, double k, double h, double c1, double c2);
RatePair rate_texture(double n, double k, double h, double c1, double c2);
BoundReport rate_hypercube(int d, double n, double k, double nh, double c1, double c2);

}  // namespace gmrfscan
