#include "gmrfscan/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gmrfscan {

namespace {

constexpr double kRankTol = 1e-10;

double operator_norm(const Eigen::MatrixXd& m) {
  if (m.rows() <= 2000) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
  }
  // Power iteration on m^2; converges to the spectral radius of a symmetric m.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m.rows()).normalized();
  double prev = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Eigen::VectorXd w = m.selfadjointView<Eigen::Lower>() * v;
    w = m.selfadjointView<Eigen::Lower>() * w;
    const double lam = std::sqrt(w.norm());
    if (std::abs(lam - prev) <= 1e-8 * std::max(1.0, lam)) return lam;
    prev = lam;
    v = w.normalized();
  }
  return prev;
}

// Translation-invariant shape key: node offsets from the region's min corner.
std::vector<Index> shape_key(const Region& s, const Lattice& lat) {
  const int d = lat.dim();
  MultiIndex lo(d, std::numeric_limits<Index>::max());
  std::vector<MultiIndex> pos(s.nodes.size());
  for (size_t i = 0; i < s.nodes.size(); ++i) {
    pos[i] = lat.unflatten(s.nodes[i]);
    for (int a = 0; a < d; ++a) lo[a] = std::min(lo[a], pos[i][a]);
  }
  std::vector<Index> key;
  key.reserve(s.nodes.size() * d);
  for (const auto& p : pos)
    for (int a = 0; a < d; ++a) key.push_back(p[a] - lo[a]);
  return key;
}

double region_value_glrt(const Field& x, const Region& s, const GlrtShape& shape,
                         double log_nc) {
  const Index k = s.size();
  Eigen::VectorXd xs(k);
  for (Index i = 0; i < k; ++i) xs[i] = x.data[s.nodes[i]];
  const double quad = xs.dot(shape.m.selfadjointView<Eigen::Lower>() * xs);
  const double denom = shape.fro * std::sqrt(log_nc) + shape.opnorm * log_nc;
  return (quad - shape.trace) / denom;
}

void reduce_max(DetectorOutput& out) {
  out.max_value = -std::numeric_limits<double>::infinity();
  out.argmax = -1;
  for (Index i = 0; i < static_cast<Index>(out.per_region.size()); ++i) {
    if (!out.evaluated[i]) continue;
    if (out.per_region[i] > out.max_value) {
      out.max_value = out.per_region[i];
      out.argmax = i;
    }
  }
}

}  // namespace

GlrtPrecomputed glrt_precompute(const RegionClass& c, const PhiField& phi, const CovTable& cov,
                                const Lattice& lat, int h_for_shrink_check) {
  require(!phi.is_zero(), errc::degenerate, "GLRT statistic undefined for phi = 0");
  require(c.size() >= 2, errc::degenerate, "GLRT normalization requires |C| >= 2");
  GlrtPrecomputed pre;
  pre.log_nc = std::log(static_cast<double>(c.size()));
  pre.shape_of_region.resize(c.size());
  const int h = h_for_shrink_check > 0 ? h_for_shrink_check : phi.radius();

  std::map<std::vector<Index>, int> shape_ids;
  for (Index r = 0; r < c.size(); ++r) {
    const auto key = shape_key(c.regions[r], lat);
    auto [it, inserted] = shape_ids.emplace(key, static_cast<int>(pre.shapes.size()));
    pre.shape_of_region[r] = it->second;
    if (!inserted) continue;

    const Eigen::MatrixXd gamma = covariance_submatrix(phi, c.regions[r], cov, lat);
    Eigen::LLT<Eigen::MatrixXd> llt(gamma);
    require(llt.info() == Eigen::Success, errc::conditioning,
            "region covariance not positive definite");
    const Index k = c.regions[r].size();
    Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(k, k));
    GlrtShape shape;
    shape.m = Eigen::MatrixXd::Identity(k, k) - 0.5 * (inv + inv.transpose());
    shape.trace = shape.m.trace();
    shape.fro = shape.m.norm();
    shape.opnorm = operator_norm(shape.m);
    shape.informative = shape.fro > 1e-14;
    pre.shapes.push_back(std::move(shape));

    const Region interior = h_interior(c.regions[r], h, lat);
    if (2 * interior.size() < k) pre.shrink_warning = true;
  }
  return pre;
}

namespace {

void glrt_finalize(DetectorOutput& out, const RegionClass& c, const GlrtPrecomputed& pre) {
  for (Index r = 0; r < c.size(); ++r)
    if (!out.evaluated[r]) ++out.skipped;
  require(out.skipped < c.size(), errc::empty_scan,
          "every region in the scan was uninformative");
  out.shrink_warning = pre.shrink_warning;
  reduce_max(out);
}

}  // namespace

DetectorOutput glrt_statistic_serial(const Field& x, const RegionClass& c, const PhiField& phi,
                                     const GlrtPrecomputed& pre) {
  require(!phi.is_zero(), errc::degenerate, "GLRT statistic undefined for phi = 0");
  require(c.size() >= 2, errc::degenerate, "GLRT normalization requires |C| >= 2");
  DetectorOutput out;
  out.kind = DetectorKind::glrt;
  out.per_region.assign(c.size(), std::numeric_limits<double>::quiet_NaN());
  out.evaluated.assign(c.size(), 1);
  for (Index r = 0; r < c.size(); ++r) {
    const GlrtShape& shape = pre.shapes[pre.shape_of_region[r]];
    if (!shape.informative) {
      out.evaluated[r] = 0;
      continue;
    }
    out.per_region[r] = region_value_glrt(x, c.regions[r], shape, pre.log_nc);
  }
  glrt_finalize(out, c, pre);
  return out;
}

DetectorOutput glrt_statistic(const Field& x, const RegionClass& c, const PhiField& phi,
                              const GlrtPrecomputed& pre, int workers) {
  if (workers <= 1) return glrt_statistic_serial(x, c, phi, pre);
  require(!phi.is_zero(), errc::degenerate, "GLRT statistic undefined for phi = 0");
  require(c.size() >= 2, errc::degenerate, "GLRT normalization requires |C| >= 2");
  DetectorOutput out;
  out.kind = DetectorKind::glrt;
  out.per_region.assign(c.size(), std::numeric_limits<double>::quiet_NaN());
  out.evaluated.assign(c.size(), 1);
  const Index nr = c.size();
#pragma omp parallel for schedule(static) num_threads(workers)
  for (Index r = 0; r < nr; ++r) {
    const GlrtShape& shape = pre.shapes[pre.shape_of_region[r]];
    if (!shape.informative) {
      out.evaluated[r] = 0;
      continue;
    }
    out.per_region[r] = region_value_glrt(x, c.regions[r], shape, pre.log_nc);
  }
  glrt_finalize(out, c, pre);
  return out;
}

DetectorOutput glrt_test(const Field& x, const RegionClass& c, const PhiField& phi,
                         const GlrtPrecomputed& pre, int workers) {
  DetectorOutput out = glrt_statistic(x, c, phi, pre, workers);
  out.threshold = 4.0;
  out.reject = out.max_value > out.threshold;
  return out;
}

FisherRegionResult fisher_statistic_region(const Field& x, const Region& s, int h) {
  const Lattice& lat = *x.lat;
  const auto nh = neighborhood_offsets(lat.dim(), h);
  const Region interior = h_interior(s, h, lat);
  FisherRegionResult res;
  if (interior.size() == 0 || interior.size() <= nh.size()) return res;  // skipped

  // Flat strides of the neighborhood offsets; interior nodes never wrap since
  // their whole neighborhood stays inside S.
  std::vector<Index> delta(nh.size());
  for (Index j = 0; j < nh.size(); ++j) {
    Index d = 0;
    for (int a = 0; a < lat.dim(); ++a) d += nh.offsets[j][a] * lat.strides()[a];
    delta[j] = d;
  }

  const Index rows = interior.size();
  Eigen::MatrixXd f(rows, nh.size());
  Eigen::VectorXd y(rows);
  const Index n = lat.size();
  for (Index i = 0; i < rows; ++i) {
    const Index node = interior.nodes[i];
    y[i] = x.data[node];
    for (Index j = 0; j < nh.size(); ++j) {
      const Index nb = node + delta[j];
      require(nb >= 0 && nb < n, errc::config, "neighborhood left the observed lattice");
      f(i, j) = x.data[nb];
    }
  }

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(f);
  cod.setThreshold(kRankTol);
  res.rank_warning = cod.rank() < static_cast<Index>(nh.size());
  const Eigen::VectorXd coef = cod.solve(y);
  const Eigen::VectorXd proj = f * coef;
  const double explained = proj.squaredNorm();
  const double residual = (y - proj).squaredNorm();
  res.evaluated = true;
  if (residual <= 1e-12 * explained) {
    // Exact fit: the F-ratio is infinite (all-zero interiors give zero).
    res.t = explained > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  } else {
    res.t = static_cast<double>(rows) * explained / residual;
  }
  return res;
}

namespace {

DetectorOutput assemble_fisher(const RegionClass& c,
                               const std::vector<FisherRegionResult>& results) {
  DetectorOutput out;
  out.kind = DetectorKind::fisher;
  out.per_region.resize(c.size());
  out.evaluated.resize(c.size());
  for (Index r = 0; r < c.size(); ++r) {
    out.evaluated[r] = results[r].evaluated;
    out.per_region[r] =
        results[r].evaluated ? results[r].t : std::numeric_limits<double>::quiet_NaN();
    if (!results[r].evaluated) ++out.skipped;
    if (results[r].rank_warning) out.rank_warning = true;
  }
  require(out.skipped < c.size(), errc::empty_scan, "every region in the scan was skipped");
  reduce_max(out);
  return out;
}

}  // namespace

DetectorOutput fisher_statistic_serial(const Field& x, const RegionClass& c, int h) {
  std::vector<FisherRegionResult> results(c.size());
  for (Index r = 0; r < c.size(); ++r)
    results[r] = fisher_statistic_region(x, c.regions[r], h);
  return assemble_fisher(c, results);
}

DetectorOutput fisher_statistic(const Field& x, const RegionClass& c, int h, int workers) {
  if (workers <= 1) return fisher_statistic_serial(x, c, h);
  std::vector<FisherRegionResult> results(c.size());
  const Index nr = c.size();
#pragma omp parallel for schedule(static) num_threads(workers)
  for (Index r = 0; r < nr; ++r) results[r] = fisher_statistic_region(x, c.regions[r], h);
  return assemble_fisher(c, results);
}

double fisher_threshold_theoretical(double nh, double n_class, double alpha, double c3) {
  require(alpha > 0.0 && alpha < 1.0, errc::config, "alpha must lie in (0, 1)");
  const double la = std::log(1.0 / alpha);
  const double lc = std::log(n_class);
  return nh + c3 * (std::sqrt(nh * (lc + 1.0 + la)) + lc + la);
}

Calibration calibrate_threshold_mc(const std::function<double(const Field&)>& max_statistic,
                                   const Lattice& lat, double level, int n_sims, uint64_t seed,
                                   int workers) {
  require(level > 0.0 && level < 1.0, errc::config, "level must lie in (0, 1)");
  require(n_sims >= 100, errc::config, "calibration needs at least 100 simulations");
  require(level * n_sims >= 5.0, errc::config,
          "n_sims too small for the requested level (level * n_sims < 5)");

  std::vector<double> stats(n_sims);
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, workers))
  for (int i = 0; i < n_sims; ++i) {
    RngStream rng = substream(seed, StreamPurpose::calibration, static_cast<uint64_t>(i));
    const Field f = sample_null(lat, rng);
    stats[i] = max_statistic(f);
  }

  std::vector<double> sorted = stats;
  std::sort(sorted.begin(), sorted.end());
  const auto quantile_of = [&](const std::vector<double>& v) {
    Index idx = static_cast<Index>(std::ceil((1.0 - level) * v.size())) - 1;
    idx = std::clamp<Index>(idx, 0, static_cast<Index>(v.size()) - 1);
    return v[idx];
  };

  Calibration cal;
  cal.threshold = quantile_of(sorted);
  cal.level = level;
  cal.n_sims = n_sims;

  // Order-statistic bootstrap for the threshold SE.
  const int boot = 200;
  RngStream brng = substream(seed, StreamPurpose::bootstrap, 0);
  std::vector<double> re(n_sims);
  double mean = 0.0, m2 = 0.0;
  for (int b = 0; b < boot; ++b) {
    for (int i = 0; i < n_sims; ++i)
      re[i] = stats[brng.next_u64() % n_sims];
    std::sort(re.begin(), re.end());
    const double q = quantile_of(re);
    const double delta = q - mean;
    mean += delta / (b + 1);
    m2 += delta * (q - mean);
  }
  cal.se = std::sqrt(m2 / (boot - 1));
  return cal;
}

}  // namespace gmrfscan
