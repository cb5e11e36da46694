#pragma once

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gmrfscan/detect.hpp"
#include "gmrfscan/gmrf.hpp"
#include "gmrfscan/lattice.hpp"

namespace gmrfscan {

struct RegionClassSpec {
  RegionClassKind kind = RegionClassKind::intervals;
  Index param = 0;
  std::vector<std::vector<Index>> explicit_regions;

  RegionClass build(const Lattice& lat) const;
};

enum class SignalType { none, phi, ar, constant_phi, rademacher };

struct SignalSpec {
  SignalType type = SignalType::none;
  std::optional<PhiField> phi;     // SignalType::phi
  std::vector<double> psi;         // SignalType::ar
  double r = 0.0;                  // constant_phi / rademacher scale
  int h = 1;

  // Resolves to an interaction vector; rademacher draws from `rng`.
  PhiField build(int d, RngStream& rng) const;
};

enum class ThresholdMode { fixed, theoretical, mc_calibrated };

struct ThresholdSpec {
  ThresholdMode mode = ThresholdMode::mc_calibrated;
  double value = 4.0;   // fixed
  double c = 1.0;       // theoretical constant
  double alpha = 0.05;  // theoretical level
  double level = 0.05;  // MC level
  int n_cal = 2000;     // MC calibration replicates
};

struct ExperimentConfig {
  int d = 1;
  Index m = 0;
  RegionClassSpec regions;
  SignalSpec signal;
  DetectorKind detector = DetectorKind::fisher;
  int detector_h = 1;
  ThresholdSpec threshold;
  int64_t n_replicates = 200;
  uint64_t seed = 1;
  Index plant_region_index = -1;            // -1: middle region of the class
  std::vector<Index> plant_region_indices;  // optional multi-plant grid
  std::vector<double> sweep_r;
  std::vector<Index> sweep_k;
  std::vector<int> sweep_h;
  std::vector<Index> sweep_n;  // d = 1 only
  int cov_grid = 0;            // 0: default policy
  int cov_extent = 0;          // 0: derived from the class
};

ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
uint64_t config_hash(const nlohmann::json& j);

struct ResultRow {
  int64_t sweep_id = 0;
  Index n = 0;
  Index k = 0;
  int h = 1;
  double r = 0.0;
  double type1 = 0.0;
  double type2 = 0.0;
  double risk = 0.0;
  double se = 0.0;
  double runtime_ms = 0.0;
};

struct SkippedPoint {
  int64_t sweep_id = 0;
  std::string reason;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<SkippedPoint> skipped;  // infeasible sweep points
  uint64_t config_hash = 0;
  uint64_t seed = 0;
};

ResultTable run_experiment(const ExperimentConfig& cfg, int workers = 1);

struct PhaseCurveResult {
  ResultTable table;
  bool crossed = false;
  double r_half = 0.0;
  double se = 0.0;
};

// Requires an r sweep with at least 4 points; interpolates the risk = 0.5
// crossing and reports a bootstrap SE.
PhaseCurveResult phase_curve(const ExperimentConfig& cfg, int workers = 1);

// Header is exactly "sweep_id,n,k,h,r,type1,type2,risk,se,runtime_ms"; all
// columns except runtime_ms are part of the determinism contract.
void emit_csv(const ResultTable& t, std::ostream& os);
void emit_json(const ResultTable& t, std::ostream& os);
ResultTable parse_csv(std::istream& is);

}  // namespace gmrfscan
