#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "gmrfscan/lattice.hpp"

namespace gmrfscan {

// Symmetric interaction vector phi on {-h,...,h}^d \ {0}. Values are stored
// aligned with neighborhood_offsets(d, h); symmetry phi_v = phi_{-v} is an
// exact invariant enforced at construction.
class PhiField {
 public:
  PhiField(int d, int h);

  // Full offset map keyed by offsets; throws errc::symmetry on mismatch.
  static PhiField from_offsets(int d, int h, const std::map<MultiIndex, double>& values);
  // Half-lattice map (offsets with positive leading nonzero coordinate);
  // negative counterparts are implied.
  static PhiField from_half_offsets(int d, int h, const std::map<MultiIndex, double>& values);

  int dim() const { return d_; }
  int radius() const { return h_; }
  const NeighborhoodOffsets& offsets() const { return offsets_; }
  const std::vector<double>& values() const { return values_; }

  double at(const MultiIndex& v) const;
  void set_symmetric(const MultiIndex& v, double value);

  // Norms count all (2h+1)^d - 1 entries.
  double l1() const;
  double l2() const;
  bool is_zero() const;

 private:
  int d_;
  int h_;
  NeighborhoodOffsets offsets_;
  std::vector<double> values_;
  Index offset_index(const MultiIndex& v) const;
};

struct PhiValidation {
  double min_spectral_value = 0.0;  // min over the grid of the precision symbol
  bool valid = false;
  bool sufficient_l1 = false;  // the ||phi||_1 < 1 sufficient condition
};

// Grid defaults for the spectral quadrature.
int default_validation_grid(int d, int h);
int default_cov_grid(int d, int extent, int h);

// Validity via positivity of the precision symbol 1 - sum_v phi_v cos<v, w>
// on the regular DFT grid; near-singular fields (min below 1e-10) rejected.
PhiValidation validate_phi(const PhiField& phi, int grid_points_per_axis = 0);

// Conditional variance fixed by gamma_0 = 1: harmonic mean of the precision
// symbol on the DFT grid.
double sigma_phi_sq(const PhiField& phi, int grid_points_per_axis = 0);

// Autocovariances of the unit-variance field, tabulated for |v|_inf <= extent.
class CovTable {
 public:
  CovTable(int d, int h, int extent, int grid, std::vector<double> gamma, bool near_critical);

  int dim() const { return d_; }
  int radius() const { return h_; }
  int extent() const { return extent_; }
  int grid() const { return grid_; }
  bool near_critical() const { return near_critical_; }

  double gamma(const MultiIndex& v) const;
  double sum_sq_offdiag() const;
  const std::vector<double>& raw() const { return gamma_; }

 private:
  int d_, h_, extent_, grid_;
  bool near_critical_;
  Index span_;
  std::vector<double> gamma_;
};

CovTable autocovariances(const PhiField& phi, int extent, int grid_points_per_axis = 0);

// Principal covariance submatrix indexed by S (asserts positive definiteness).
Eigen::MatrixXd covariance_submatrix(const PhiField& phi, const Region& s, const CovTable& cov,
                                     const Lattice& lat);

// Rows of the infinite-lattice precision operator: diag = 1/sigma^2 and
// off-diagonal -phi_v / sigma^2, aligned with phi.offsets().
struct PrecisionEntries {
  double diag;
  std::vector<double> off;
};

PrecisionEntries precision_entries(const PhiField& phi, int grid_points_per_axis = 0);

// Stationary AR(h) with unit marginal variance; tau_sq is the innovation
// variance implied by the normalization.
struct ArParams {
  int h = 1;
  std::vector<double> psi;
  double tau_sq = 1.0;
};

ArParams make_ar(const std::vector<double>& psi);
PhiField ar_to_gmrf(const ArParams& ar);

// Constant interaction over the neighborhood with ||phi||_2 = r.
PhiField make_constant_phi(int d, int h, double r);

// Convenience builder used by the oracle and bounds modules: covariance
// submatrix for an arbitrary phi with extent/grid derived from the region.
struct CovBuilder {
  const Lattice* lat;
  int grid = 0;       // 0 = default policy
  int extra_extent = 0;

  Eigen::MatrixXd operator()(const PhiField& phi, const Region& s) const;
  CovTable table(const PhiField& phi, const Region& s) const;
};

}  // namespace gmrfscan
