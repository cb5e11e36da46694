#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "gmrfscan/gmrf.hpp"
#include "gmrfscan/lattice.hpp"
#include "gmrfscan/simulate.hpp"

namespace gmrfscan {

enum class DetectorKind { glrt, fisher };

struct DetectorOutput {
  DetectorKind kind = DetectorKind::glrt;
  std::vector<double> per_region;   // NaN where skipped
  std::vector<char> evaluated;
  double max_value = 0.0;
  Index argmax = -1;                // index into the region class
  double threshold = 0.0;
  bool reject = false;
  Index skipped = 0;
  bool shrink_warning = false;      // some region has |S^h| < |S|/2
  bool rank_warning = false;        // rank-deficient design encountered
};

// Per-shape GLRT tables: M_S = I - Gamma_S^{-1} with its trace and norms,
// shared across congruent regions (Gamma_S is translation invariant).
// Shapes with M_S = 0 (single nodes, or nodes spread beyond the correlation
// range) carry no information and are skipped by the scan.
struct GlrtShape {
  Eigen::MatrixXd m;
  double trace = 0.0;
  double fro = 0.0;
  double opnorm = 0.0;
  bool informative = true;
};

struct GlrtPrecomputed {
  std::vector<int> shape_of_region;
  std::vector<GlrtShape> shapes;
  double log_nc = 0.0;
  bool shrink_warning = false;
};

GlrtPrecomputed glrt_precompute(const RegionClass& c, const PhiField& phi, const CovTable& cov,
                                const Lattice& lat, int h_for_shrink_check = 0);

// Normalized scan statistic U; workers > 1 runs the OpenMP kernel, workers == 1
// the serial reference.
DetectorOutput glrt_statistic(const Field& x, const RegionClass& c, const PhiField& phi,
                              const GlrtPrecomputed& pre, int workers = 1);
// Fixed universal threshold 4.
DetectorOutput glrt_test(const Field& x, const RegionClass& c, const PhiField& phi,
                         const GlrtPrecomputed& pre, int workers = 1);

struct FisherRegionResult {
  double t = 0.0;
  bool evaluated = false;
  bool rank_warning = false;
};

// Pseudo-likelihood ratio statistic T_S: interior values regressed on their
// neighborhood design, projected energy over residual energy.
FisherRegionResult fisher_statistic_region(const Field& x, const Region& s, int h);

DetectorOutput fisher_statistic(const Field& x, const RegionClass& c, int h, int workers = 1);

double fisher_threshold_theoretical(double nh, double n_class, double alpha, double c3);

struct Calibration {
  double threshold = 0.0;
  double se = 0.0;
  int n_sims = 0;
  double level = 0.0;
};

// Empirical (1 - level) quantile of the max statistic over null fields drawn
// from the calibration stream of `seed`; SE by order-statistic bootstrap.
Calibration calibrate_threshold_mc(const std::function<double(const Field&)>& max_statistic,
                                   const Lattice& lat, double level, int n_sims, uint64_t seed,
                                   int workers = 1);

// Serial reference kernels (kept alongside the parallel paths for testing and
// benchmarking).
DetectorOutput glrt_statistic_serial(const Field& x, const RegionClass& c, const PhiField& phi,
                                     const GlrtPrecomputed& pre);
DetectorOutput fisher_statistic_serial(const Field& x, const RegionClass& c, int h);

}  // namespace gmrfscan
