// Serial-vs-parallel benchmark for the scan kernels and the replicated
// Monte Carlo pipeline.
#include <chrono>
#include <cstdio>

#include "gmrfscan/detect.hpp"
#include "gmrfscan/harness.hpp"
#include "gmrfscan/simulate.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace gmrfscan;

namespace {

double ms_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

void report(const char* name, double serial_ms, double parallel_ms, int workers) {
  std::printf("%-38s %10.1f ms %10.1f ms   x%.2f (%d workers)\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms, workers);
}

}  // namespace

int main() {
#ifdef _OPENMP
  const int workers = omp_get_max_threads();
#else
  const int workers = 1;
#endif
  std::printf("%-38s %13s %13s\n", "kernel", "serial", "parallel");

  {
    // GLRT scan: 451 length-50 windows on n = 500, replicated fields.
    Lattice lat(1, 500);
    const RegionClass cls = interval_class(lat, 50);
    const PhiField phi = ar_to_gmrf(make_ar({0.9}));
    const CovTable cov = autocovariances(phi, 49);
    const GlrtPrecomputed pre = glrt_precompute(cls, phi, cov, lat);
    const int reps = 200;
    std::vector<Field> fields;
    for (int i = 0; i < reps; ++i) {
      RngStream rng = substream(7, StreamPurpose::eval_null, i);
      fields.push_back(sample_null(lat, rng));
    }
    auto t0 = std::chrono::steady_clock::now();
    double acc = 0;
    for (const auto& f : fields) acc += glrt_statistic_serial(f, cls, phi, pre).max_value;
    const double serial = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    for (const auto& f : fields) acc += glrt_statistic(f, cls, phi, pre, workers).max_value;
    const double parallel = ms_since(t0);
    report("glrt scan (451 windows x 200 fields)", serial, parallel, workers);
    if (acc == -1) std::printf("unreachable\n");
  }

  {
    // Fisher scan on a long series.
    Lattice lat(1, 100000);
    const RegionClass cls = interval_class(lat, 100);
    RngStream rng = substream(7, StreamPurpose::eval_null, 0);
    const Field f = sample_null(lat, rng);
    auto t0 = std::chrono::steady_clock::now();
    const double a = fisher_statistic_serial(f, cls, 1).max_value;
    const double serial = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    const double b = fisher_statistic(f, cls, 1, workers).max_value;
    const double parallel = ms_since(t0);
    report("fisher scan (n=1e5, k=100)", serial, parallel, workers);
    if (a != b) std::printf("MISMATCH: serial %.17g parallel %.17g\n", a, b);
  }

  {
    // Replicated risk estimation through the harness.
    ExperimentConfig cfg;
    cfg.d = 1;
    cfg.m = 500;
    cfg.regions.kind = RegionClassKind::intervals;
    cfg.regions.param = 50;
    cfg.signal.type = SignalType::ar;
    cfg.signal.psi = {0.9};
    cfg.signal.h = 1;
    cfg.detector = DetectorKind::fisher;
    cfg.detector_h = 1;
    cfg.threshold.mode = ThresholdMode::fixed;
    cfg.threshold.value = 15.0;
    cfg.n_replicates = 200;
    cfg.seed = 11;
    auto t0 = std::chrono::steady_clock::now();
    const ResultTable serial_table = run_experiment(cfg, 1);
    const double serial = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    const ResultTable parallel_table = run_experiment(cfg, workers);
    const double parallel = ms_since(t0);
    report("risk estimation (200+200 replicates)", serial, parallel, workers);
    if (serial_table.rows[0].risk != parallel_table.rows[0].risk)
      std::printf("MISMATCH: serial risk %.17g parallel %.17g\n", serial_table.rows[0].risk,
                  parallel_table.rows[0].risk);
  }
  return 0;
}
