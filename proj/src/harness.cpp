#include "gmrfscan/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "gmrfscan/bounds.hpp"
#include "gmrfscan/simulate.hpp"

namespace gmrfscan {

RegionClass RegionClassSpec::build(const Lattice& lat) const {
  switch (kind) {
    case RegionClassKind::intervals:
      return interval_class(lat, param);
    case RegionClassKind::hypercubes:
      return hypercube_class(lat, param);
    case RegionClassKind::disjoint_tiling:
      return disjoint_tiling(lat, param);
    case RegionClassKind::dyadic:
      return dyadic_hypercubes(lat);
    case RegionClassKind::explicit_class: {
      RegionClass c;
      c.kind = RegionClassKind::explicit_class;
      for (const auto& nodes : explicit_regions)
        c.regions.push_back(make_explicit_region(lat, nodes));
      require(c.size() >= 1, errc::empty_class, "explicit class is empty");
      return c;
    }
  }
  fail(errc::config, "unknown region class kind");
}

PhiField SignalSpec::build(int d, RngStream& rng) const {
  switch (type) {
    case SignalType::phi:
      require(phi.has_value(), errc::config, "phi signal requires coefficients");
      return *phi;
    case SignalType::ar:
      require(d == 1, errc::config, "AR signal requires d = 1");
      return ar_to_gmrf(make_ar(psi));
    case SignalType::constant_phi:
      return make_constant_phi(d, h, r);
    case SignalType::rademacher:
      return rademacher_prior_sample(d, h, r, rng);
    case SignalType::none:
      break;
  }
  fail(errc::config, "experiment has no signal specification");
}

namespace {

MultiIndex parse_offset_key(const std::string& key) {
  MultiIndex v;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, ',')) v.push_back(std::stoll(part));
  require(!v.empty(), errc::config, "empty offset key in phi values");
  return v;
}

PhiField parse_phi(const nlohmann::json& j) {
  require(j.contains("d") && j.contains("h") && j.contains("values"), errc::config,
          "phi requires d, h and values");
  const int d = j.at("d").get<int>();
  const int h = j.at("h").get<int>();
  std::map<MultiIndex, double> half;
  for (const auto& [key, val] : j.at("values").items())
    half[parse_offset_key(key)] = val.get<double>();
  return PhiField::from_half_offsets(d, h, half);
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
  try {
    ExperimentConfig cfg;
    const auto& lat = j.at("lattice");
    cfg.d = lat.at("d").get<int>();
    cfg.m = lat.at("m").get<Index>();

    const auto& rc = j.at("regions");
    const std::string cls = rc.at("class").get<std::string>();
    if (cls == "intervals") {
      cfg.regions.kind = RegionClassKind::intervals;
      cfg.regions.param = rc.at("k").get<Index>();
    } else if (cls == "hypercubes") {
      cfg.regions.kind = RegionClassKind::hypercubes;
      cfg.regions.param = rc.at("l").get<Index>();
    } else if (cls == "disjoint-tiling") {
      cfg.regions.kind = RegionClassKind::disjoint_tiling;
      cfg.regions.param = rc.at("l").get<Index>();
    } else if (cls == "dyadic") {
      cfg.regions.kind = RegionClassKind::dyadic;
    } else if (cls == "explicit") {
      cfg.regions.kind = RegionClassKind::explicit_class;
      cfg.regions.explicit_regions =
          rc.at("regions").get<std::vector<std::vector<Index>>>();
    } else {
      fail(errc::config, "unknown region class: " + cls);
    }

    if (j.contains("signal")) {
      const auto& sig = j.at("signal");
      const std::string type = sig.at("type").get<std::string>();
      if (type == "phi") {
        cfg.signal.type = SignalType::phi;
        cfg.signal.phi = parse_phi(sig);
        cfg.signal.h = cfg.signal.phi->radius();
      } else if (type == "ar") {
        cfg.signal.type = SignalType::ar;
        cfg.signal.psi = sig.at("psi").get<std::vector<double>>();
        cfg.signal.h = static_cast<int>(cfg.signal.psi.size());
      } else if (type == "constant-phi") {
        cfg.signal.type = SignalType::constant_phi;
        cfg.signal.r = sig.at("r").get<double>();
        cfg.signal.h = sig.value("h", 1);
      } else if (type == "rademacher") {
        cfg.signal.type = SignalType::rademacher;
        cfg.signal.r = sig.at("r").get<double>();
        cfg.signal.h = sig.value("h", 1);
      } else {
        fail(errc::config, "unknown signal type: " + type);
      }
    }

    if (j.contains("detector")) {
      const auto& det = j.at("detector");
      const std::string type = det.at("type").get<std::string>();
      if (type == "glrt")
        cfg.detector = DetectorKind::glrt;
      else if (type == "fisher")
        cfg.detector = DetectorKind::fisher;
      else
        fail(errc::config, "unknown detector: " + type);
      cfg.detector_h = det.value("h", cfg.signal.h);
    }

    if (j.contains("threshold")) {
      const auto& th = j.at("threshold");
      const std::string mode = th.at("mode").get<std::string>();
      if (mode == "fixed") {
        cfg.threshold.mode = ThresholdMode::fixed;
        cfg.threshold.value = th.value("value", 4.0);
      } else if (mode == "theoretical") {
        cfg.threshold.mode = ThresholdMode::theoretical;
        cfg.threshold.c = th.value("c", 1.0);
        cfg.threshold.alpha = th.value("alpha", 0.05);
      } else if (mode == "mc-calibrated") {
        cfg.threshold.mode = ThresholdMode::mc_calibrated;
        cfg.threshold.level = th.value("level", 0.05);
        cfg.threshold.n_cal = th.value("n_cal", 2000);
      } else {
        fail(errc::config, "unknown threshold mode: " + mode);
      }
    }

    cfg.n_replicates = j.value("n_replicates", int64_t(200));
    cfg.seed = j.value("seed", uint64_t(1));
    cfg.plant_region_index = j.value("plant_region_index", Index(-1));
    if (j.contains("plant_region_indices"))
      cfg.plant_region_indices = j.at("plant_region_indices").get<std::vector<Index>>();
    if (j.contains("sweep")) {
      const auto& sw = j.at("sweep");
      if (sw.contains("r")) cfg.sweep_r = sw.at("r").get<std::vector<double>>();
      if (sw.contains("k")) cfg.sweep_k = sw.at("k").get<std::vector<Index>>();
      if (sw.contains("h")) cfg.sweep_h = sw.at("h").get<std::vector<int>>();
      if (sw.contains("n")) cfg.sweep_n = sw.at("n").get<std::vector<Index>>();
    }
    cfg.cov_grid = j.value("cov_grid", 0);
    cfg.cov_extent = j.value("cov_extent", 0);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    fail(errc::config, std::string("config parse error: ") + e.what());
  }
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["lattice"] = {{"d", cfg.d}, {"m", cfg.m}};
  switch (cfg.regions.kind) {
    case RegionClassKind::intervals:
      j["regions"] = {{"class", "intervals"}, {"k", cfg.regions.param}};
      break;
    case RegionClassKind::hypercubes:
      j["regions"] = {{"class", "hypercubes"}, {"l", cfg.regions.param}};
      break;
    case RegionClassKind::disjoint_tiling:
      j["regions"] = {{"class", "disjoint-tiling"}, {"l", cfg.regions.param}};
      break;
    case RegionClassKind::dyadic:
      j["regions"] = {{"class", "dyadic"}};
      break;
    case RegionClassKind::explicit_class:
      j["regions"] = {{"class", "explicit"}, {"regions", cfg.regions.explicit_regions}};
      break;
  }
  switch (cfg.signal.type) {
    case SignalType::phi: {
      nlohmann::json values = nlohmann::json::object();
      const auto& off = cfg.signal.phi->offsets();
      for (Index i = 0; i < off.size(); ++i) {
        bool positive_leading = false;
        for (Index c : off.offsets[i]) {
          if (c > 0) positive_leading = true;
          if (c != 0) break;
        }
        if (!positive_leading) continue;
        std::string key;
        for (size_t a = 0; a < off.offsets[i].size(); ++a) {
          if (a) key += ',';
          key += std::to_string(off.offsets[i][a]);
        }
        values[key] = cfg.signal.phi->values()[i];
      }
      j["signal"] = {{"type", "phi"},
                     {"d", cfg.signal.phi->dim()},
                     {"h", cfg.signal.phi->radius()},
                     {"values", values}};
      break;
    }
    case SignalType::ar:
      j["signal"] = {{"type", "ar"}, {"psi", cfg.signal.psi}};
      break;
    case SignalType::constant_phi:
      j["signal"] = {{"type", "constant-phi"}, {"r", cfg.signal.r}, {"h", cfg.signal.h}};
      break;
    case SignalType::rademacher:
      j["signal"] = {{"type", "rademacher"}, {"r", cfg.signal.r}, {"h", cfg.signal.h}};
      break;
    case SignalType::none:
      break;
  }
  j["detector"] = {{"type", cfg.detector == DetectorKind::glrt ? "glrt" : "fisher"},
                   {"h", cfg.detector_h}};
  switch (cfg.threshold.mode) {
    case ThresholdMode::fixed:
      j["threshold"] = {{"mode", "fixed"}, {"value", cfg.threshold.value}};
      break;
    case ThresholdMode::theoretical:
      j["threshold"] = {{"mode", "theoretical"}, {"c", cfg.threshold.c},
                        {"alpha", cfg.threshold.alpha}};
      break;
    case ThresholdMode::mc_calibrated:
      j["threshold"] = {{"mode", "mc-calibrated"}, {"level", cfg.threshold.level},
                        {"n_cal", cfg.threshold.n_cal}};
      break;
  }
  j["n_replicates"] = cfg.n_replicates;
  j["seed"] = cfg.seed;
  if (cfg.plant_region_index >= 0) j["plant_region_index"] = cfg.plant_region_index;
  if (!cfg.plant_region_indices.empty()) j["plant_region_indices"] = cfg.plant_region_indices;
  nlohmann::json sw = nlohmann::json::object();
  if (!cfg.sweep_r.empty()) sw["r"] = cfg.sweep_r;
  if (!cfg.sweep_k.empty()) sw["k"] = cfg.sweep_k;
  if (!cfg.sweep_h.empty()) sw["h"] = cfg.sweep_h;
  if (!cfg.sweep_n.empty()) sw["n"] = cfg.sweep_n;
  if (!sw.empty()) j["sweep"] = sw;
  if (cfg.cov_grid) j["cov_grid"] = cfg.cov_grid;
  if (cfg.cov_extent) j["cov_extent"] = cfg.cov_extent;
  return j;
}

uint64_t config_hash(const nlohmann::json& j) {
  // FNV-1a over the canonical (sorted-key) serialization.
  const std::string s = j.dump();
  uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : s) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

namespace {

struct SweepPoint {
  int64_t id;
  Index m;
  Index k_param;
  int h;
  double r;
  bool has_r;
};

std::vector<SweepPoint> enumerate_sweep(const ExperimentConfig& cfg) {
  std::vector<Index> ms = {cfg.m};
  if (!cfg.sweep_n.empty()) {
    require(cfg.d == 1, errc::config, "n sweep is only defined for d = 1");
    ms.assign(cfg.sweep_n.begin(), cfg.sweep_n.end());
  }
  std::vector<Index> ks = {cfg.regions.param};
  if (!cfg.sweep_k.empty()) ks.assign(cfg.sweep_k.begin(), cfg.sweep_k.end());
  std::vector<int> hs = {cfg.signal.h};
  if (!cfg.sweep_h.empty()) hs.assign(cfg.sweep_h.begin(), cfg.sweep_h.end());
  std::vector<double> rs = {cfg.signal.r};
  bool has_r = !cfg.sweep_r.empty();
  if (has_r) rs = cfg.sweep_r;

  std::vector<SweepPoint> pts;
  int64_t id = 0;
  for (Index m : ms)
    for (Index k : ks)
      for (int h : hs)
        for (double r : rs) pts.push_back({id++, m, k, h, r, has_r});
  return pts;
}

struct PointContext {
  Lattice lat;
  RegionClass cls;
  PhiField phi;
  CovTable cov;
  Index region_size;
};

// Worst type-II over the planted grid plus the shared type-I rate.
ResultRow evaluate_point(const ExperimentConfig& cfg, const SweepPoint& pt, int workers,
                         uint64_t point_tag) {
  const auto t0 = std::chrono::steady_clock::now();

  Lattice lat(cfg.d, pt.m);
  RegionClassSpec rc = cfg.regions;
  if (rc.kind != RegionClassKind::dyadic && rc.kind != RegionClassKind::explicit_class)
    rc.param = pt.k_param;
  const RegionClass cls = rc.build(lat);

  SignalSpec sig = cfg.signal;
  sig.h = pt.h;
  if (pt.has_r) sig.r = pt.r;
  RngStream sig_rng = substream(cfg.seed, StreamPurpose::signal, ((point_tag << 16) | 1));
  const PhiField phi = sig.build(cfg.d, sig_rng);

  // Covariance table covering the largest region in the class.
  Index diam = 0;
  for (const auto& s : cls.regions) diam = std::max(diam, linf_diameter(s, lat));
  const int extent = cfg.cov_extent > 0 ? cfg.cov_extent : static_cast<int>(diam);
  const CovTable cov = autocovariances(phi, extent, cfg.cov_grid);

  // Planted regions.
  std::vector<Index> plants = cfg.plant_region_indices;
  if (plants.empty())
    plants.push_back(cfg.plant_region_index >= 0 ? cfg.plant_region_index : cls.size() / 2);
  for (Index p : plants)
    require(p >= 0 && p < cls.size(), errc::config, "planted region index out of range");

  // Detector closure over a field; an h sweep drives the detector h too.
  const int det_h = !cfg.sweep_h.empty() ? pt.h
                    : cfg.detector_h > 0 ? cfg.detector_h
                                         : pt.h;
  GlrtPrecomputed pre;
  if (cfg.detector == DetectorKind::glrt) pre = glrt_precompute(cls, phi, cov, lat, det_h);
  const auto max_stat = [&](const Field& f) {
    return cfg.detector == DetectorKind::glrt
               ? glrt_statistic_serial(f, cls, phi, pre).max_value
               : fisher_statistic_serial(f, cls, det_h).max_value;
  };

  // Threshold.
  double threshold = 0.0;
  switch (cfg.threshold.mode) {
    case ThresholdMode::fixed:
      threshold = cfg.threshold.value;
      break;
    case ThresholdMode::theoretical:
      threshold = cfg.detector == DetectorKind::glrt
                      ? 4.0 * cfg.threshold.c
                      : fisher_threshold_theoretical(
                            static_cast<double>(
                                neighborhood_offsets(cfg.d, det_h).size()),
                            static_cast<double>(cls.size()), cfg.threshold.alpha,
                            cfg.threshold.c);
      break;
    case ThresholdMode::mc_calibrated: {
      const Calibration cal =
          calibrate_threshold_mc(max_stat, lat, cfg.threshold.level, cfg.threshold.n_cal,
                                 cfg.seed + point_tag, workers);
      threshold = cal.threshold;
      break;
    }
  }

  // Type I over evaluation nulls.
  const int64_t reps = cfg.n_replicates;
  int64_t rejects = 0;
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, workers)) \
    reduction(+ : rejects)
  for (int64_t i = 0; i < reps; ++i) {
    RngStream rng = substream(cfg.seed, StreamPurpose::eval_null,
                              (point_tag << 40) | static_cast<uint64_t>(i));
    const Field f = sample_null(lat, rng);
    if (max_stat(f) > threshold) ++rejects;
  }
  const double type1 = static_cast<double>(rejects) / reps;
  const double se1_sq = type1 * (1.0 - type1) / reps;

  // Type II: worst over the planted grid.
  double type2 = 0.0, se2_sq = 0.0;
  for (size_t pi = 0; pi < plants.size(); ++pi) {
    const PatchSampler sampler(phi, cls.regions[plants[pi]], cov, lat);
    int64_t accepts = 0;
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, workers)) \
    reduction(+ : accepts)
    for (int64_t i = 0; i < reps; ++i) {
      RngStream rng =
          substream(cfg.seed, StreamPurpose::eval_alt,
                    (point_tag << 40) | (static_cast<uint64_t>(pi) << 32) |
                        static_cast<uint64_t>(i));
      const Field f = sampler.sample_field(rng, cfg.seed);
      if (max_stat(f) <= threshold) ++accepts;
    }
    const double t2 = static_cast<double>(accepts) / reps;
    if (t2 >= type2) {
      type2 = t2;
      se2_sq = t2 * (1.0 - t2) / reps;
    }
  }

  ResultRow row;
  row.sweep_id = pt.id;
  row.n = lat.size();
  row.k = cls.regions[plants[0]].size();
  row.h = pt.h;
  row.r = phi.l2();
  row.type1 = type1;
  row.type2 = type2;
  row.risk = type1 + type2;
  row.se = std::sqrt(se1_sq + se2_sq);
  row.runtime_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  return row;
}

}  // namespace

ResultTable run_experiment(const ExperimentConfig& cfg, int workers) {
  require(cfg.m >= 1 || !cfg.sweep_n.empty(), errc::config, "lattice side missing");
  const auto points = enumerate_sweep(cfg);
  ResultTable table;
  table.seed = cfg.seed;
  table.config_hash = config_hash(config_to_json(cfg));
  for (const auto& pt : points) {
    try {
      table.rows.push_back(evaluate_point(cfg, pt, workers, static_cast<uint64_t>(pt.id)));
    } catch (const error& e) {
      // Infeasible combos (k > m, invalid phi at this sweep value, ...) are
      // reported per point; a sweep with no feasible point is an error.
      if (points.size() == 1) throw;
      table.skipped.push_back({pt.id, e.what()});
    }
  }
  require(!table.rows.empty(), errc::config, "every sweep point was infeasible");
  return table;
}

PhaseCurveResult phase_curve(const ExperimentConfig& cfg, int workers) {
  require(cfg.sweep_r.size() >= 4, errc::config,
          "phase curve requires an r sweep with at least 4 points");
  PhaseCurveResult out;
  out.table = run_experiment(cfg, workers);

  // Rows are ordered by ascending sweep id = ascending r for a pure r sweep.
  const auto& rows = out.table.rows;
  const auto interpolate = [](double r0, double y0, double r1, double y1) {
    return r0 + (0.5 - y0) * (r1 - r0) / (y1 - y0);
  };
  for (size_t i = 0; i + 1 < rows.size(); ++i) {
    if (rows[i].risk >= 0.5 && rows[i + 1].risk < 0.5) {
      out.crossed = true;
      out.r_half = interpolate(rows[i].r, rows[i].risk, rows[i + 1].r, rows[i + 1].risk);
      break;
    }
  }
  if (!out.crossed) return out;

  // Bootstrap the binomial counts at every sweep point and re-interpolate.
  const int boot = 200;
  RngStream rng = substream(cfg.seed, StreamPurpose::bootstrap, 1);
  const double reps = static_cast<double>(cfg.n_replicates);
  std::vector<double> samples;
  samples.reserve(boot);
  for (int b = 0; b < boot; ++b) {
    std::vector<double> risk(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
      int64_t c1 = 0, c2 = 0;
      for (int64_t t = 0; t < cfg.n_replicates; ++t) {
        if (rng.next_double() < rows[i].type1) ++c1;
        if (rng.next_double() < rows[i].type2) ++c2;
      }
      risk[i] = (c1 + c2) / reps;
    }
    for (size_t i = 0; i + 1 < rows.size(); ++i) {
      if (risk[i] >= 0.5 && risk[i + 1] < 0.5) {
        samples.push_back(interpolate(rows[i].r, risk[i], rows[i + 1].r, risk[i + 1]));
        break;
      }
    }
  }
  if (samples.size() >= 2) {
    double mean = 0.0, m2 = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
      const double d = samples[i] - mean;
      mean += d / (i + 1);
      m2 += d * (samples[i] - mean);
    }
    out.se = std::sqrt(m2 / (samples.size() - 1));
  }
  return out;
}

void emit_csv(const ResultTable& t, std::ostream& os) {
  os << "sweep_id,n,k,h,r,type1,type2,risk,se,runtime_ms\n";
  char buf[512];
  for (const auto& row : t.rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%lld,%lld,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f\n",
                  static_cast<long long>(row.sweep_id), static_cast<long long>(row.n),
                  static_cast<long long>(row.k), row.h, row.r, row.type1, row.type2, row.risk,
                  row.se, row.runtime_ms);
    os << buf;
  }
}

void emit_json(const ResultTable& t, std::ostream& os) {
  nlohmann::json j;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(t.config_hash));
  j["config_hash"] = hash;
  j["seed"] = t.seed;
  if (!t.skipped.empty()) {
    j["skipped"] = nlohmann::json::array();
    for (const auto& s : t.skipped)
      j["skipped"].push_back({{"sweep_id", s.sweep_id}, {"reason", s.reason}});
  }
  j["rows"] = nlohmann::json::array();
  for (const auto& row : t.rows) {
    j["rows"].push_back({{"sweep_id", row.sweep_id},
                         {"n", row.n},
                         {"k", row.k},
                         {"h", row.h},
                         {"r", row.r},
                         {"type1", row.type1},
                         {"type2", row.type2},
                         {"risk", row.risk},
                         {"se", row.se},
                         {"runtime_ms", row.runtime_ms}});
  }
  os << j.dump(2) << "\n";
}

ResultTable parse_csv(std::istream& is) {
  ResultTable t;
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), errc::io, "empty result file");
  require(line == "sweep_id,n,k,h,r,type1,type2,risk,se,runtime_ms", errc::io,
          "unexpected result CSV header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ResultRow row;
    long long sweep_id = 0, n = 0, k = 0;
    if (std::sscanf(line.c_str(), "%lld,%lld,%lld,%d,%lg,%lg,%lg,%lg,%lg,%lg", &sweep_id, &n,
                    &k, &row.h, &row.r, &row.type1, &row.type2, &row.risk, &row.se,
                    &row.runtime_ms) != 10)
      fail(errc::io, "malformed result CSV row");
    row.sweep_id = sweep_id;
    row.n = n;
    row.k = k;
    t.rows.push_back(row);
  }
  return t;
}

}  // namespace gmrfscan
