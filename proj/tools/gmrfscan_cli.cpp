#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "gmrfscan/bounds.hpp"
#include "gmrfscan/detect.hpp"
#include "gmrfscan/harness.hpp"
#include "gmrfscan/oracle.hpp"
#include "gmrfscan/simulate.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace gmrfscan;
using nlohmann::json;

json load_json(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), errc::io, "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(errc::config, std::string("invalid JSON in ") + path + ": " + e.what());
  }
  return j;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  require(out.good(), errc::io, "cannot open " + path + " for writing");
  return out;
}

int default_workers() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

json region_to_json(const Region& s) {
  json j;
  j["size"] = s.size();
  if (s.shape != RegionShape::explicit_shape) {
    j["anchor"] = s.anchor;
    j["side"] = s.side;
  } else {
    j["nodes"] = s.nodes;
  }
  return j;
}

json detector_output_to_json(const DetectorOutput& out, const RegionClass& cls, bool emit_all) {
  json j;
  j["detector"] = out.kind == DetectorKind::glrt ? "glrt" : "fisher";
  j["max_value"] = out.max_value;
  j["argmax_index"] = out.argmax;
  if (out.argmax >= 0) j["argmax_region"] = region_to_json(cls.regions[out.argmax]);
  j["threshold"] = out.threshold;
  j["reject"] = out.reject;
  j["skipped"] = out.skipped;
  if (out.shrink_warning) j["shrink_warning"] = true;
  if (out.rank_warning) j["rank_warning"] = true;
  if (emit_all) {
    json per = json::array();
    for (Index i = 0; i < static_cast<Index>(out.per_region.size()); ++i) {
      if (out.evaluated[i])
        per.push_back(out.per_region[i]);
      else
        per.push_back(nullptr);
    }
    j["per_region"] = per;
  }
  return j;
}

double resolve_threshold(const ExperimentConfig& cfg, const Lattice& lat, const RegionClass& cls,
                         const std::function<double(const Field&)>& max_stat, int workers) {
  switch (cfg.threshold.mode) {
    case ThresholdMode::fixed:
      return cfg.threshold.value;
    case ThresholdMode::theoretical:
      if (cfg.detector == DetectorKind::glrt) return 4.0 * cfg.threshold.c;
      return fisher_threshold_theoretical(
          static_cast<double>(neighborhood_offsets(cfg.d, cfg.detector_h).size()),
          static_cast<double>(cls.size()), cfg.threshold.alpha, cfg.threshold.c);
    case ThresholdMode::mc_calibrated: {
      return calibrate_threshold_mc(max_stat, lat, cfg.threshold.level, cfg.threshold.n_cal,
                                    cfg.seed, workers)
          .threshold;
    }
  }
  fail(errc::config, "unknown threshold mode");
}

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 const std::string& format, bool force_null, uint64_t seed_override,
                 bool has_seed) {
  const ExperimentConfig cfg = parse_config(load_json(config_path));
  const uint64_t seed = has_seed ? seed_override : cfg.seed;
  Lattice lat(cfg.d, cfg.m);

  Field field;
  if (force_null || cfg.signal.type == SignalType::none) {
    field = sample_null(lat, seed);
  } else {
    const RegionClass cls = cfg.regions.build(lat);
    const Index plant =
        cfg.plant_region_index >= 0 ? cfg.plant_region_index : cls.size() / 2;
    require(plant < cls.size(), errc::config, "planted region index out of range");
    RngStream sig_rng = substream(seed, StreamPurpose::signal, 1);
    SignalSpec sig = cfg.signal;
    const PhiField phi = sig.build(cfg.d, sig_rng);
    const int extent =
        cfg.cov_extent > 0 ? cfg.cov_extent
                           : static_cast<int>(linf_diameter(cls.regions[plant], lat));
    const CovTable cov = autocovariances(phi, extent, cfg.cov_grid);
    if (cov.near_critical())
      std::cerr << "note: ||phi||_1 near 1, covariances decay slowly; consider a larger "
                   "cov_grid\n";
    field = sample_alternative(lat, cls.regions[plant], phi, cov, seed);
  }

  auto out = open_out(out_path);
  if (format == "json")
    write_field_json(field, out);
  else
    write_field_csv(field, out);
  return 0;
}

int cmd_scan(const std::string& config_path, const std::string& input_path,
             const std::string& detector, const std::string& out_path, bool emit_all,
             int workers, uint64_t seed_override, bool has_seed) {
  ExperimentConfig cfg = parse_config(load_json(config_path));
  if (has_seed) cfg.seed = seed_override;
  if (detector == "glrt")
    cfg.detector = DetectorKind::glrt;
  else if (detector == "fisher")
    cfg.detector = DetectorKind::fisher;
  else if (!detector.empty())
    fail(errc::config, "unknown detector: " + detector);

  Lattice lat(cfg.d, cfg.m);
  std::ifstream in(input_path);
  require(in.good(), errc::io, "cannot open " + input_path);
  Field field;
  field.lat = &lat;
  field.data = read_field_csv(in);
  require(static_cast<Index>(field.data.size()) == lat.size(), errc::config,
          "field length does not match the configured lattice");

  const RegionClass cls = cfg.regions.build(lat);
  DetectorOutput out;
  if (cfg.detector == DetectorKind::glrt) {
    RngStream sig_rng = substream(cfg.seed, StreamPurpose::signal, 1);
    SignalSpec sig = cfg.signal;
    const PhiField phi = sig.build(cfg.d, sig_rng);
    Index diam = 0;
    for (const auto& s : cls.regions) diam = std::max(diam, linf_diameter(s, lat));
    const int extent = cfg.cov_extent > 0 ? cfg.cov_extent : static_cast<int>(diam);
    const CovTable cov = autocovariances(phi, extent, cfg.cov_grid);
    const GlrtPrecomputed pre = glrt_precompute(cls, phi, cov, lat, cfg.detector_h);
    const auto max_stat = [&](const Field& f) {
      return glrt_statistic_serial(f, cls, phi, pre).max_value;
    };
    out = glrt_statistic(field, cls, phi, pre, workers);
    out.threshold = resolve_threshold(cfg, lat, cls, max_stat, workers);
  } else {
    const auto max_stat = [&](const Field& f) {
      return fisher_statistic_serial(f, cls, cfg.detector_h).max_value;
    };
    out = fisher_statistic(field, cls, cfg.detector_h, workers);
    out.threshold = resolve_threshold(cfg, lat, cls, max_stat, workers);
  }
  out.reject = out.max_value > out.threshold;

  auto os = open_out(out_path);
  os << detector_output_to_json(out, cls, emit_all).dump(2) << "\n";
  return 0;
}

int cmd_calibrate(const std::string& config_path, const std::string& out_path, int workers,
                  uint64_t seed_override, bool has_seed) {
  ExperimentConfig cfg = parse_config(load_json(config_path));
  if (has_seed) cfg.seed = seed_override;
  Lattice lat(cfg.d, cfg.m);
  const RegionClass cls = cfg.regions.build(lat);

  std::function<double(const Field&)> max_stat;
  GlrtPrecomputed pre;
  PhiField phi(cfg.d, std::max(1, cfg.detector_h));
  if (cfg.detector == DetectorKind::glrt) {
    RngStream sig_rng = substream(cfg.seed, StreamPurpose::signal, 1);
    SignalSpec sig = cfg.signal;
    phi = sig.build(cfg.d, sig_rng);
    Index diam = 0;
    for (const auto& s : cls.regions) diam = std::max(diam, linf_diameter(s, lat));
    const CovTable cov = autocovariances(
        phi, cfg.cov_extent > 0 ? cfg.cov_extent : static_cast<int>(diam), cfg.cov_grid);
    pre = glrt_precompute(cls, phi, cov, lat, cfg.detector_h);
    max_stat = [&](const Field& f) { return glrt_statistic_serial(f, cls, phi, pre).max_value; };
  } else {
    max_stat = [&](const Field& f) {
      return fisher_statistic_serial(f, cls, cfg.detector_h).max_value;
    };
  }

  const Calibration cal = calibrate_threshold_mc(max_stat, lat, cfg.threshold.level,
                                                 cfg.threshold.n_cal, cfg.seed, workers);
  json j = {{"threshold", cal.threshold},
            {"se", cal.se},
            {"level", cal.level},
            {"n_sims", cal.n_sims}};
  auto os = open_out(out_path);
  os << j.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_path,
              const std::string& json_path, bool do_phase_curve, int workers,
              uint64_t seed_override, bool has_seed) {
  ExperimentConfig cfg = parse_config(load_json(config_path));
  if (has_seed) cfg.seed = seed_override;

  ResultTable table;
  json extra;
  if (do_phase_curve) {
    const PhaseCurveResult pc = phase_curve(cfg, workers);
    table = pc.table;
    extra["phase_curve"] = {{"crossed", pc.crossed}};
    if (pc.crossed) {
      extra["phase_curve"]["r_half"] = pc.r_half;
      extra["phase_curve"]["se"] = pc.se;
    }
    if (!pc.crossed) std::cerr << "phase curve: risk never crossed 0.5 (no-crossing)\n";
  } else {
    table = run_experiment(cfg, workers);
  }

  auto os = open_out(out_path);
  emit_csv(table, os);
  if (!json_path.empty()) {
    std::ostringstream buf;
    emit_json(table, buf);
    json j = json::parse(buf.str());
    for (auto& [k, v] : extra.items()) j[k] = v;
    auto js = open_out(json_path);
    js << j.dump(2) << "\n";
  }
  return 0;
}

PhiField phi_from_params(const json& p) {
  if (p.contains("phi")) {
    const auto& jp = p.at("phi");
    std::map<MultiIndex, double> half;
    for (const auto& [key, val] : jp.at("values").items()) {
      MultiIndex v;
      std::stringstream ss(key);
      std::string part;
      while (std::getline(ss, part, ',')) v.push_back(std::stoll(part));
      half[v] = val.get<double>();
    }
    return PhiField::from_half_offsets(jp.at("d").get<int>(), jp.at("h").get<int>(), half);
  }
  if (p.contains("psi")) return ar_to_gmrf(make_ar(p.at("psi").get<std::vector<double>>()));
  if (p.contains("constant_phi")) {
    const auto& cp = p.at("constant_phi");
    return make_constant_phi(cp.at("d").get<int>(), cp.at("h").get<int>(),
                             cp.at("r").get<double>());
  }
  fail(errc::config, "params must provide phi, psi, or constant_phi");
}

json condition_to_json(const ConditionCheck& c) {
  return {{"lhs", c.lhs}, {"rhs", c.rhs}, {"satisfied", c.satisfied}};
}

json bound_report_to_json(const BoundReport& rep) {
  json j;
  j["bound_value"] = rep.bound_value;
  for (const auto& [name, cond] : rep.conditions) j["conditions"][name] = condition_to_json(cond);
  for (const auto& [name, value] : rep.constants_used) j["constants_used"][name] = value;
  return j;
}

int cmd_bounds(const std::string& mode, const std::string& params_path,
               const std::string& out_path) {
  const json p = load_json(params_path);
  json result;
  if (mode == "ar" || mode == "texture") {
    const double n = p.at("n").get<double>(), k = p.at("k").get<double>(),
                 h = p.at("h").get<double>();
    const double c1 = p.value("c1", 1.0), c2 = p.value("c2", 1.0);
    const RatePair rp =
        mode == "ar" ? rate_ar(n, k, h, c1, c2) : rate_texture(n, k, h, c1, c2);
    result = {{"lower", rp.lower},
              {"upper", rp.upper},
              {"h_condition", condition_to_json(rp.h_condition)},
              {"note", "h condition reported as a finite-n surrogate"}};
  } else if (mode == "hypercube") {
    result = bound_report_to_json(rate_hypercube(
        p.at("d").get<int>(), p.at("n").get<double>(), p.at("k").get<double>(),
        p.at("nh").get<double>(), p.value("c1", 1.0), p.value("c2", 1.0)));
  } else if (mode == "thm3" || mode == "cor3") {
    const int d = p.at("d").get<int>();
    Lattice lat(d, p.at("m").get<Index>());
    RegionClass cls;
    if (p.value("class", std::string("disjoint-tiling")) == "disjoint-tiling")
      cls = disjoint_tiling(lat, p.at("l").get<Index>());
    else
      fail(errc::config, "bounds modes require a disjoint tiling class");
    if (mode == "thm3") {
      result = bound_report_to_json(
          theorem3_conditions(cls, lat, p.at("h").get<int>(), p.at("a").get<double>(),
                              p.at("r").get<double>(), p.value("c0", 1.0)));
    } else {
      const PhiField phi = phi_from_params(p);
      BoundReport rep = known_cov_lower_bound(cls, phi);
      result = bound_report_to_json(rep);
      if (p.contains("a"))
        result["impossibility_radius"] =
            known_cov_impossibility_radius(cls, p.at("a").get<double>());
    }
  } else {
    fail(errc::config, "unknown bounds mode: " + mode);
  }
  auto os = open_out(out_path);
  os << result.dump(2) << "\n";
  return 0;
}

json oracle_report_to_json(const OracleReport& r) {
  json j = {{"check", r.check},   {"pass", r.pass},           {"observed", r.observed},
            {"expected", r.expected}, {"tolerance", r.tolerance}};
  if (r.n_sims > 0) j["n_sims"] = r.n_sims;
  return j;
}

int cmd_oracle_check(const std::string& suite, const std::string& params_path,
                     const std::string& out_path) {
  const json p = load_json(params_path);
  const int d = p.value("d", 1);
  Lattice lat(d, p.at("m").get<Index>());
  CovBuilder builder{&lat, 0, 0};
  const uint64_t seed = p.value("seed", uint64_t(1));

  json reports = json::array();
  if (suite == "lemmas" || suite == "all") {
    const PhiField phi = phi_from_params(p);
    const Region s = make_hypercube_region(
        lat, MultiIndex(d, p.value("anchor", Index(1))), p.at("l").get<Index>());
    for (const auto& r : lemma_suite(phi, s, lat, p.value("mc_reps", 2000), seed))
      reports.push_back(oracle_report_to_json(r));
  }
  if (suite == "second-moment" || suite == "all") {
    const PhiField phi = phi_from_params(p);
    const Region s =
        make_hypercube_region(lat, MultiIndex(d, 1), p.value("l_small", Index(4)));
    for (const auto& r :
         second_moment_check(phi, phi, s, builder, p.value("n_sims", int64_t(100000)), seed))
      reports.push_back(oracle_report_to_json(r));
  }
  if (suite == "bayes" || suite == "all") {
    const PhiField phi = phi_from_params(p);
    const RegionClass cls = disjoint_tiling(lat, p.value("l_tile", Index(3)));
    const BayesRiskResult br =
        bayes_risk_mc(cls, phi, lat, builder, p.value("n_sims_bayes", int64_t(2000)), seed);
    json j = {{"check", "bayes_risk_sandwich"},
              {"risk", br.risk},
              {"se", br.se},
              {"lower_bound_rhs", br.lower_bound_rhs},
              {"pass", br.risk >= br.lower_bound_rhs - 3.0 * br.se}};
    reports.push_back(j);
  }
  require(!reports.empty(), errc::config, "unknown oracle suite: " + suite);
  auto os = open_out(out_path);
  os << reports.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scan tests, simulation and risk bounds for Gaussian Markov random field "
               "patches hidden in white noise"};
  app.require_subcommand(1);

  std::string config_path, input_path, out_path = "out.csv", json_path, format = "csv";
  std::string detector, mode, params_path, suite = "all";
  bool emit_all = false, force_null = false, do_phase_curve = false;
  int workers = default_workers();
  uint64_t seed = 0;
  bool has_seed = false;

  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
      has_seed = true;
    });
  };

  auto* sim = app.add_subcommand("simulate", "draw a field under H0 or H1");
  sim->add_option("--config", config_path, "experiment config JSON")->required();
  sim->add_option("--out", out_path, "output path")->required();
  sim->add_option("--format", format, "csv|json");
  sim->add_flag("--null", force_null, "force an H0 draw");
  add_seed(sim);

  auto* scan = app.add_subcommand("scan", "run a detector on a stored field");
  scan->add_option("--config", config_path)->required();
  scan->add_option("--input", input_path, "field CSV")->required();
  scan->add_option("--detector", detector, "fisher|glrt");
  scan->add_option("--out", out_path)->required();
  scan->add_flag("--emit-all", emit_all, "include per-region statistics");
  scan->add_option("--workers", workers);
  add_seed(scan);

  auto* cal = app.add_subcommand("calibrate", "Monte Carlo threshold calibration");
  cal->add_option("--config", config_path)->required();
  cal->add_option("--out", out_path)->required();
  cal->add_option("--workers", workers);
  add_seed(cal);

  auto* sweep = app.add_subcommand("sweep", "replicated risk estimation over sweep axes");
  sweep->add_option("--config", config_path)->required();
  sweep->add_option("--out", out_path, "CSV output")->required();
  sweep->add_option("--json", json_path, "JSON output (with config hash)");
  sweep->add_flag("--phase-curve", do_phase_curve, "interpolate the risk = 0.5 boundary");
  sweep->add_option("--workers", workers);
  add_seed(sweep);

  auto* bnd = app.add_subcommand("bounds", "evaluate lower-bound and rate formulas");
  bnd->add_option("--mode", mode, "ar|texture|hypercube|thm3|cor3")->required();
  bnd->add_option("--params", params_path)->required();
  bnd->add_option("--out", out_path)->required();

  auto* ora = app.add_subcommand("oracle-check", "brute-force identity checks");
  ora->add_option("--suite", suite, "all|lemmas|second-moment|bayes");
  ora->add_option("--params", params_path)->required();
  ora->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(config_path, out_path, format, force_null, seed, has_seed);
    if (scan->parsed())
      return cmd_scan(config_path, input_path, detector, out_path, emit_all, workers, seed,
                      has_seed);
    if (cal->parsed()) return cmd_calibrate(config_path, out_path, workers, seed, has_seed);
    if (sweep->parsed())
      return cmd_sweep(config_path, out_path, json_path, do_phase_curve, workers, seed, has_seed);
    if (bnd->parsed()) return cmd_bounds(mode, params_path, out_path);
    if (ora->parsed()) return cmd_oracle_check(suite, params_path, out_path);
  } catch (const gmrfscan::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const bool config_like = e.kind() == errc::config || e.kind() == errc::io ||
                             e.kind() == errc::size || e.kind() == errc::empty_class;
    return config_like ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
