#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>

#include "gmrfscan/gmrf.hpp"
#include "gmrfscan/lattice.hpp"
#include "gmrfscan/rng.hpp"

namespace gmrfscan {

enum class Hypothesis { H0, H1 };

struct Provenance {
  Hypothesis hypothesis = Hypothesis::H0;
  std::optional<Region> region;
  std::optional<PhiField> phi;
  uint64_t seed = 0;
  std::string rng = "philox4x32-10";
};

struct Field {
  const Lattice* lat = nullptr;
  std::vector<double> data;
  Provenance prov;
};

Field sample_null(const Lattice& lat, uint64_t seed);
Field sample_null(const Lattice& lat, RngStream& rng);

// Exact N(0, Gamma_S) patch via the triangular factor of Gamma_S. Patches
// above 10^4 nodes are rejected (dense factorization only).
Eigen::VectorXd sample_gmrf_patch(const PhiField& phi, const Region& s, const CovTable& cov,
                                  const Lattice& lat, uint64_t seed);

Field sample_alternative(const Lattice& lat, const Region& s, const PhiField& phi,
                         const CovTable& cov, uint64_t seed);

// Factor once, draw many: replicated sampling shares the Cholesky factor.
class PatchSampler {
 public:
  PatchSampler(const PhiField& phi, const Region& s, const CovTable& cov, const Lattice& lat);

  Eigen::VectorXd sample_patch(RngStream& rng) const;
  // Patch draws first, then the i.i.d. complement in flat order.
  Field sample_field(RngStream& rng, uint64_t seed_for_provenance) const;

  const Region& region() const { return region_; }

 private:
  const Lattice* lat_;
  Region region_;
  PhiField phi_;
  Eigen::MatrixXd chol_;  // lower triangular factor of Gamma_S
};

// CSV: header "index,value", one row per node.
void write_field_csv(const Field& f, std::ostream& os);
std::vector<double> read_field_csv(std::istream& is);

// JSON: provenance header plus the data vector.
void write_field_json(const Field& f, std::ostream& os);

}  // namespace gmrfscan
