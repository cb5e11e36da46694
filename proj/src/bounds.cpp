#include "gmrfscan/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gmrfscan/oracle.hpp"

namespace gmrfscan {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double known_cov_lower_bound_value(double nc, const std::vector<double>& region_sizes,
                                   double l2sq, double l1) {
  require(l1 < 0.5, errc::invalid_phi, "known-covariance bound requires ||phi||_1 < 1/2");
  const double coef = 10.0 * l2sq / (1.0 - 2.0 * l1);
  double sum = 0.0;
  for (double k : region_sizes) sum += std::exp(coef * k);
  return 1.0 - std::sqrt(sum) / (2.0 * nc);
}

BoundReport known_cov_lower_bound(const RegionClass& c, const PhiField& phi) {
  const double l1 = phi.l1();
  const double l2sq = phi.l2() * phi.l2();
  require(l1 < 0.5, errc::invalid_phi, "known-covariance bound requires ||phi||_1 < 1/2");
  require(pairwise_disjoint(c), errc::config, "known-covariance bound requires a disjoint class");

  const double nc = static_cast<double>(c.size());
  const double coef = 10.0 * l2sq / (1.0 - 2.0 * l1);
  std::vector<double> sizes;
  double max_s = 0.0;
  for (const auto& s : c.regions) {
    sizes.push_back(static_cast<double>(s.size()));
    max_s = std::max(max_s, static_cast<double>(s.size()));
  }

  BoundReport rep;
  rep.bound_value = known_cov_lower_bound_value(nc, sizes, l2sq, l1);
  ConditionCheck merge;
  merge.lhs = std::log(nc) - coef * max_s;  // finite-n surrogate, -> infinity asymptotically
  merge.rhs = 0.0;
  merge.satisfied = merge.lhs > 0.0;
  rep.conditions["merge_condition_finite_n"] = merge;
  return rep;
}

double known_cov_impossibility_radius(const RegionClass& c, double a) {
  require(a > 0.0 && a < 1.0, errc::config, "a must lie in (0, 1)");
  const double nc = static_cast<double>(c.size());
  double best = kInf;
  for (const auto& s : c.regions)
    best = std::min(best, std::log(4.0 * nc / (a * a)) / (10.0 * static_cast<double>(s.size())));
  return best;
}

BoundReport theorem3_conditions(const RegionClass& c, const Lattice& lat, int h, double a,
                                double r, double c0) {
  require(a > 0.0 && a < 1.0, errc::config, "a must lie in (0, 1)");
  require(pairwise_disjoint(c), errc::config, "lower bound requires a disjoint class");
  const double nc = static_cast<double>(c.size());
  const double lca = std::log(nc / a);
  const double nh = static_cast<double>(neighborhood_offsets(lat.dim(), h).size());

  double clause1 = kInf, clause2 = kInf, clause3 = kInf;
  double max_s = 0.0;
  for (const auto& s : c.regions) {
    const double k = static_cast<double>(s.size());
    max_s = std::max(max_s, k);
    clause1 = std::min(clause1, k / lca);
    clause2 = std::min(clause2, std::pow(k, 0.4) * std::pow(lca, 0.2));
    const double d2h = static_cast<double>(h_boundary(s, 2 * h, lat).size());
    if (d2h > 0.0)
      clause3 = std::min(clause3, (k / d2h) * (k / d2h) * std::pow(lca, -1.0 / 6.0));
  }

  BoundReport rep;
  rep.constants_used["c0"] = c0;
  rep.conditions["nh_size_clause"] = {nh, clause1, nh <= clause1};
  rep.conditions["nh_power_clause"] = {nh, clause2, nh <= clause2};
  rep.conditions["nh_boundary_clause"] = {nh, clause3, nh <= clause3};
  const double signal_rhs = c0 * std::max(std::sqrt(nh * lca), lca);
  const double signal_lhs = r * r * max_s;
  rep.conditions["signal_strength"] = {signal_lhs, signal_rhs, signal_lhs <= signal_rhs};

  const bool all = std::all_of(rep.conditions.begin(), rep.conditions.end(),
                               [](const auto& kv) { return kv.second.satisfied; });
  rep.bound_value = all ? 1.0 - a : -kInf;
  return rep;
}

PhiField rademacher_prior_sample(int d, int h, double r, RngStream& rng) {
  const auto nh = neighborhood_offsets(d, h);
  require(r > 0.0, errc::config, "prior scale must be positive");
  require(r * static_cast<double>(nh.size()) < 1.0, errc::invalid_phi,
          "prior not acceptable: r |N_h| must be below 1");
  const double scale = r / std::sqrt(static_cast<double>(nh.size()));
  PhiField phi(d, h);
  for (const auto& v : nh.offsets) {
    bool positive_leading = false;
    for (Index c : v) {
      if (c > 0) positive_leading = true;
      if (c != 0) break;
    }
    if (!positive_leading) continue;  // half lattice; mirror fills the rest
    const double sign = (rng.next_u32() & 1u) ? 1.0 : -1.0;
    phi.set_symmetric(v, sign * scale);
  }
  return phi;
}

PhiField rademacher_prior_sample(int d, int h, double r, uint64_t seed) {
  RngStream rng = substream(seed, StreamPurpose::signal, 0);
  return rademacher_prior_sample(d, h, r, rng);
}

VsEstimate vs_mc(const Region& s, const std::function<PhiField(RngStream&)>& prior,
                 const CovBuilder& builder, int64_t n_pairs, uint64_t seed) {
  VsEstimate est;
  est.n_pairs = n_pairs;
  double mean = 0.0, m2 = 0.0;
  int64_t used = 0;
  for (int64_t i = 0; i < n_pairs; ++i) {
    RngStream rng = substream(seed, StreamPurpose::oracle, static_cast<uint64_t>(i));
    const PhiField phi1 = prior(rng);
    const PhiField phi2 = prior(rng);
    double b = 0.0;
    try {
      b = b_functional(phi1, phi2, s, builder);
    } catch (const error& e) {
      if (e.kind() == errc::domain) {
        ++est.excluded;
        continue;
      }
      throw;
    }
    ++used;
    const double d = b - mean;
    mean += d / used;
    m2 += d * (b - mean);
  }
  require(used > 0, errc::domain, "every sampled pair violated the determinant domain");
  est.vs = mean;
  est.se = used > 1 ? std::sqrt(m2 / (used - 1) / used) : 0.0;
  return est;
}

double prop1_bound(const std::vector<double>& vs_per_region) {
  const double nc = static_cast<double>(vs_per_region.size());
  double sum = 0.0;
  for (double v : vs_per_region) sum += v;
  return 1.0 - std::sqrt(sum) / (2.0 * nc);
}

double cor3_tiling_bound(double n, double k, const PhiField& phi) {
  const double l1 = phi.l1();
  require(l1 < 0.5, errc::invalid_phi, "closed form requires ||phi||_1 < 1/2");
  const double l2sq = phi.l2() * phi.l2();
  // Exponent halves under the square root of the uniform-class sum.
  return 1.0 - 0.5 * std::sqrt(k / n) * std::exp(5.0 * k * l2sq / (1.0 - 2.0 * l1));
}

RatePair rate_ar(double n, double k, double h, double c1, double c2) {
  require(n >= k && k >= 1.0 && h >= 1.0, errc::config, "need n >= k >= 1 and h >= 1");
  RatePair out;
  out.lower = c1 * (std::log(n / k) / k + std::sqrt(h * std::log(n / k)) / k);
  out.upper = c2 * (std::log(n) / k + std::sqrt(h * std::log(n)) / k);
  const double cap = std::min(std::sqrt(k / std::log(n)), std::pow(k, 0.25));
  out.h_condition = {h, cap, h <= cap};
  return out;
}

RatePair rate_texture(double n, double k, double h, double c1, double c2) {
  require(n >= k && k >= 1.0 && h >= 1.0, errc::config, "need n >= k >= 1 and h >= 1");
  RatePair out;
  const double bracket = std::log(n / k) / k + std::sqrt(h * h * std::log(n / k)) / k;
  out.lower = c1 * bracket;
  out.upper = c2 * bracket;
  const double cap = std::min(std::sqrt(k / std::log(n)), std::pow(k, 0.2));
  out.h_condition = {h, cap, h <= cap};
  return out;
}

BoundReport rate_hypercube(int d, double n, double k, double nh, double c1, double c2) {
  require(n / k > 1.0, errc::config, "need n/k > 1");
  const double lnk = std::log(n / k);
  const double dd = static_cast<double>(d);

  BoundReport rep;
  rep.constants_used["c1"] = c1;
  rep.constants_used["c2"] = c2;

  const double e1 = k / std::pow(lnk, std::max(1.0, dd / 2.0));
  const double e2 = std::pow(k, 0.4) * std::pow(lnk, 0.2);
  const double e3 = std::pow(dd, -2.0 * dd / (dd + 2.0)) * std::pow(k, 2.0 / (dd + 2.0)) *
                    std::pow(lnk, dd / (3.0 * dd + 6.0));
  rep.conditions["nh_log_clause"] = {nh, c1 * e1, nh <= c1 * e1};
  rep.conditions["nh_power_clause"] = {nh, c1 * e2, nh <= c1 * e2};
  rep.conditions["nh_dimension_clause"] = {nh, c1 * e3, nh <= c1 * e3};

  rep.bound_value = c2 * std::max(lnk / k, std::sqrt(nh * lnk) / k);
  rep.conditions["rate"] = {rep.bound_value, rep.bound_value, true};
  return rep;
}

}  // namespace gmrfscan
