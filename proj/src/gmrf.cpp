#include "gmrfscan/gmrf.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gmrfscan {

namespace {

constexpr double kSpectralTol = 1e-10;
constexpr double kNearCriticalL1 = 0.95;

}  // namespace

PhiField::PhiField(int d, int h)
    : d_(d), h_(h), offsets_(neighborhood_offsets(d, h)),
      values_(offsets_.offsets.size(), 0.0) {}

Index PhiField::offset_index(const MultiIndex& v) const {
  // Offsets are lexicographic over {-h,...,h}^d with 0 removed; invert the
  // enumeration directly instead of searching.
  Index rank = 0;
  Index stride = 1;
  for (int a = d_ - 1; a >= 0; --a) {
    rank += (v[a] + h_) * stride;
    stride *= 2 * h_ + 1;
  }
  const Index zero_rank = (stride - 1) / 2;
  require(rank != zero_rank, errc::config, "zero offset has no interaction coefficient");
  return rank > zero_rank ? rank - 1 : rank;
}

double PhiField::at(const MultiIndex& v) const { return values_[offset_index(v)]; }

void PhiField::set_symmetric(const MultiIndex& v, double value) {
  MultiIndex neg(v.size());
  for (size_t a = 0; a < v.size(); ++a) neg[a] = -v[a];
  values_[offset_index(v)] = value;
  values_[offset_index(neg)] = value;
}

PhiField PhiField::from_offsets(int d, int h, const std::map<MultiIndex, double>& values) {
  PhiField phi(d, h);
  for (const auto& [v, x] : values) phi.values_[phi.offset_index(v)] = x;
  for (Index i = 0; i < phi.offsets_.size(); ++i) {
    MultiIndex neg = phi.offsets_.offsets[i];
    for (auto& c : neg) c = -c;
    if (phi.values_[i] != phi.values_[phi.offset_index(neg)])
      fail(errc::symmetry, "interaction vector must satisfy phi_v = phi_{-v}");
  }
  return phi;
}

PhiField PhiField::from_half_offsets(int d, int h, const std::map<MultiIndex, double>& values) {
  PhiField phi(d, h);
  for (const auto& [v, x] : values) phi.set_symmetric(v, x);
  return phi;
}

double PhiField::l1() const {
  double s = 0;
  for (double x : values_) s += std::abs(x);
  return s;
}

double PhiField::l2() const {
  double s = 0;
  for (double x : values_) s += x * x;
  return std::sqrt(s);
}

bool PhiField::is_zero() const {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return x == 0.0; });
}

int default_validation_grid(int d, int h) {
  const int floor_grid = d <= 2 ? 128 : 32;
  return std::max(4 * h + 4, floor_grid);
}

int default_cov_grid(int d, int extent, int h) {
  int floor_grid = 64;
  if (d == 1) floor_grid = 256;
  if (d == 2) floor_grid = 128;
  return std::max(8 * (extent + h), floor_grid);
}

namespace {

// Evaluates the precision symbol s(w) = 1 - sum_v phi_v cos<v, w> on the
// M^d DFT grid w_j = 2 pi j / M, returning the flat row-major array.
// Summation runs over a half neighborhood with doubled weights.
std::vector<double> precision_symbol_grid(const PhiField& phi, int M) {
  const int d = phi.dim();
  const int h = phi.radius();

  // Half-lattice: offsets whose first nonzero coordinate is positive.
  std::vector<std::pair<MultiIndex, double>> half;
  const auto& off = phi.offsets();
  for (Index i = 0; i < off.size(); ++i) {
    const auto& v = off.offsets[i];
    for (Index c : v) {
      if (c > 0) {
        half.emplace_back(v, 2.0 * phi.values()[i]);
        break;
      }
      if (c < 0) break;
    }
  }

  // Per-axis tables of e^{i t w_j} for t in [-h, h].
  const int tdim = 2 * h + 1;
  std::vector<std::complex<double>> axis(static_cast<size_t>(tdim) * M);
  for (int t = -h; t <= h; ++t)
    for (int j = 0; j < M; ++j)
      axis[static_cast<size_t>(t + h) * M + j] =
          std::polar(1.0, 2.0 * M_PI * t * j / static_cast<double>(M));

  Index total = 1;
  for (int a = 0; a < d; ++a) total *= M;
  std::vector<double> s(total);

#pragma omp parallel for schedule(static)
  for (Index idx = 0; idx < total; ++idx) {
    Index rem = idx;
    int j[8];
    for (int a = d - 1; a >= 0; --a) {
      j[a] = static_cast<int>(rem % M);
      rem /= M;
    }
    double acc = 1.0;
    for (const auto& [v, w] : half) {
      std::complex<double> e(1.0, 0.0);
      for (int a = 0; a < d; ++a)
        e *= axis[static_cast<size_t>(v[a] + h) * M + j[a]];
      acc -= w * e.real();
    }
    s[idx] = acc;
  }
  return s;
}

void check_grid(const PhiField& phi, int M, Index& total_out) {
  require(M >= 4 * phi.radius() + 4, errc::grid,
          "grid must resolve the degree-h trigonometric polynomial (need >= 4h+4 points)");
  Index total = 1;
  for (int a = 0; a < phi.dim(); ++a) {
    require(total <= (Index(1) << 28) / M, errc::size, "spectral grid too large");
    total *= M;
  }
  total_out = total;
}

}  // namespace

PhiValidation validate_phi(const PhiField& phi, int grid_points_per_axis) {
  const int M = grid_points_per_axis > 0 ? grid_points_per_axis
                                         : default_validation_grid(phi.dim(), phi.radius());
  Index total = 0;
  check_grid(phi, M, total);
  const auto s = precision_symbol_grid(phi, M);
  PhiValidation rep;
  rep.min_spectral_value = *std::min_element(s.begin(), s.end());
  rep.valid = rep.min_spectral_value > kSpectralTol;
  rep.sufficient_l1 = phi.l1() < 1.0;
  return rep;
}

double sigma_phi_sq(const PhiField& phi, int grid_points_per_axis) {
  const int M = grid_points_per_axis > 0 ? grid_points_per_axis
                                         : default_cov_grid(phi.dim(), 0, phi.radius());
  Index total = 0;
  check_grid(phi, M, total);
  const auto s = precision_symbol_grid(phi, M);
  double inv_mean = 0.0;
  for (double x : s) {
    require(x > kSpectralTol, errc::invalid_phi, "phi outside the valid parameter set");
    inv_mean += 1.0 / x;
  }
  return static_cast<double>(total) / inv_mean;
}

CovTable::CovTable(int d, int h, int extent, int grid, std::vector<double> gamma,
                   bool near_critical)
    : d_(d), h_(h), extent_(extent), grid_(grid), near_critical_(near_critical),
      span_(2 * extent + 1), gamma_(std::move(gamma)) {}

double CovTable::gamma(const MultiIndex& v) const {
  Index idx = 0;
  for (int a = 0; a < d_; ++a) {
    const Index c = v[a];
    require(c >= -extent_ && c <= extent_, errc::grid, "lag exceeds tabulated extent");
    idx = idx * span_ + (c + extent_);
  }
  return gamma_[idx];
}

double CovTable::sum_sq_offdiag() const {
  double s = 0;
  Index zero_idx = 0;
  for (int a = 0; a < d_; ++a) zero_idx = zero_idx * span_ + extent_;
  for (Index i = 0; i < static_cast<Index>(gamma_.size()); ++i)
    if (i != zero_idx) s += gamma_[i] * gamma_[i];
  return s;
}

CovTable autocovariances(const PhiField& phi, int extent, int grid_points_per_axis) {
  const int d = phi.dim();
  require(extent >= 0, errc::grid, "extent must be nonnegative");
  const int M = grid_points_per_axis > 0 ? grid_points_per_axis
                                         : default_cov_grid(d, extent, phi.radius());
  require(M >= 8 * (extent + phi.radius()), errc::grid,
          "grid too small relative to the requested extent");
  Index total = 0;
  check_grid(phi, M, total);

  auto g = precision_symbol_grid(phi, M);
  double inv_mean = 0.0;
  for (double x : g) {
    require(x > kSpectralTol, errc::invalid_phi, "phi outside the valid parameter set");
    inv_mean += 1.0 / x;
  }
  const double sigma_sq = static_cast<double>(total) / inv_mean;
  // g becomes sigma^2 / s(w), the (2 pi)^d-scaled spectral density.
  for (double& x : g) x = sigma_sq / x;

  // Partial inverse DFT, one axis at a time, keeping lags |t| <= extent.
  // After processing axis a the array has shape [lags^(a+1), M^(d-1-a)].
  const int nlag = 2 * extent + 1;
  std::vector<std::complex<double>> root(M);
  for (int j = 0; j < M; ++j) root[j] = std::polar(1.0, 2.0 * M_PI * j / static_cast<double>(M));

  std::vector<std::complex<double>> cur(g.begin(), g.end());
  Index lead = 1;              // product of processed lag dimensions
  Index grid_rem = total / M;  // remaining grid cells after this axis
  for (int a = 0; a < d; ++a) {
    // cur shape: [lead, M, grid_rem] -> next shape [lead, nlag, grid_rem]
    std::vector<std::complex<double>> next(lead * nlag * grid_rem);
#pragma omp parallel for schedule(static) collapse(2)
    for (Index b = 0; b < lead; ++b) {
      for (Index t = 0; t < nlag; ++t) {
        const Index lag = t - extent;
        std::complex<double>* out = &next[(b * nlag + t) * grid_rem];
        for (Index r = 0; r < grid_rem; ++r) out[r] = 0.0;
        for (Index j = 0; j < M; ++j) {
          const Index e = ((lag * j) % M + M) % M;
          const std::complex<double> w = root[e] / static_cast<double>(M);
          const std::complex<double>* in = &cur[(b * M + j) * grid_rem];
          for (Index r = 0; r < grid_rem; ++r) out[r] += w * in[r];
        }
      }
    }
    cur.swap(next);
    lead *= nlag;
    grid_rem = (a + 1 < d) ? grid_rem / M : 1;
  }

  std::vector<double> gamma(cur.size());
  for (size_t i = 0; i < cur.size(); ++i) gamma[i] = cur[i].real();

  // Enforce gamma_v = gamma_{-v} exactly (the quadrature is symmetric up to
  // rounding in the trigonometric tables).
  const Index nlag_total = static_cast<Index>(gamma.size());
  for (Index i = 0; i < nlag_total; ++i) {
    // Index of the negated lag tuple in the row-major [-e..e]^d layout.
    Index rem = i, neg = 0, stride = 1;
    for (int a = 0; a < d; ++a) stride *= nlag;
    stride /= nlag;
    for (int a = 0; a < d; ++a) {
      const Index t = rem / stride;
      rem %= stride;
      neg = neg * nlag + (nlag - 1 - t);
      if (a + 1 < d) stride /= nlag;
    }
    if (neg > i) {
      const double avg = 0.5 * (gamma[i] + gamma[neg]);
      gamma[i] = avg;
      gamma[neg] = avg;
    }
  }

  CovTable table(d, phi.radius(), extent, M, std::move(gamma),
                 phi.l1() > kNearCriticalL1);
  require(std::abs(table.gamma(MultiIndex(d, 0)) - 1.0) < 1e-8, errc::conditioning,
          "unit-variance normalization lost in spectral inversion");
  return table;
}

Eigen::MatrixXd covariance_submatrix(const PhiField& phi, const Region& s, const CovTable& cov,
                                     const Lattice& lat) {
  require(phi.dim() == cov.dim() && phi.radius() == cov.radius(), errc::config,
          "covariance table was built for a different interaction field");
  require(cov.extent() >= linf_diameter(s, lat), errc::grid,
          "covariance table extent smaller than the region diameter");
  const Index k = s.size();
  std::vector<MultiIndex> pos(k);
  for (Index i = 0; i < k; ++i) pos[i] = lat.unflatten(s.nodes[i]);
  Eigen::MatrixXd g(k, k);
  MultiIndex diff(lat.dim());
  for (Index i = 0; i < k; ++i) {
    g(i, i) = 1.0;
    for (Index j = 0; j < i; ++j) {
      for (int a = 0; a < lat.dim(); ++a) diff[a] = pos[i][a] - pos[j][a];
      const double v = cov.gamma(diff);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  require(llt.info() == Eigen::Success, errc::conditioning,
          "covariance submatrix not positive definite");
  return g;
}

PrecisionEntries precision_entries(const PhiField& phi, int grid_points_per_axis) {
  const double sig = sigma_phi_sq(phi, grid_points_per_axis);
  PrecisionEntries pe;
  pe.diag = 1.0 / sig;
  pe.off.resize(phi.values().size());
  for (size_t i = 0; i < pe.off.size(); ++i) pe.off[i] = -phi.values()[i] / sig;
  return pe;
}

namespace {

// Marginal variance of an AR(h) with unit innovation variance (Yule-Walker).
// Solves for the correlations rho_1..rho_h with rho_0 = 1 fixed.
std::vector<double> ar_correlations(const std::vector<double>& psi) {
  const int h = static_cast<int>(psi.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(h, h);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(h);
  for (int j = 1; j <= h; ++j) {
    a(j - 1, j - 1) += 1.0;
    for (int k = 1; k <= h; ++k) {
      const int lag = std::abs(j - k);
      if (lag == 0)
        b(j - 1) += psi[k - 1];
      else
        a(j - 1, lag - 1) -= psi[k - 1];
    }
  }
  Eigen::VectorXd rho = a.fullPivLu().solve(b);
  return std::vector<double>(rho.data(), rho.data() + h);
}

}  // namespace

ArParams make_ar(const std::vector<double>& psi) {
  const int h = static_cast<int>(psi.size());
  require(h >= 1, errc::config, "AR order must be positive");

  // Stationarity: roots of z^h - sum psi_i z^{h-i} inside the open unit disk
  // (companion-matrix eigenvalues).
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(h, h);
  for (int i = 0; i < h; ++i) comp(0, i) = psi[i];
  for (int i = 1; i < h; ++i) comp(i, i - 1) = 1.0;
  const auto eigs = comp.eigenvalues();
  for (int i = 0; i < h; ++i)
    require(std::abs(eigs[i]) < 1.0 - 1e-12, errc::config,
            "AR coefficients do not define a stationary process");

  ArParams ar;
  ar.h = h;
  ar.psi = psi;
  const auto rho = ar_correlations(psi);
  double tau = 1.0;
  for (int k = 1; k <= h; ++k) tau -= psi[k - 1] * rho[k - 1];
  require(tau > 0.0, errc::config, "AR innovation variance must be positive");
  ar.tau_sq = tau;
  return ar;
}

PhiField ar_to_gmrf(const ArParams& ar) {
  const int h = ar.h;
  double psi_sq = 0.0;
  for (double p : ar.psi) psi_sq += p * p;
  PhiField phi(1, h);
  for (int i = 1; i <= h; ++i) {
    double num = ar.psi[i - 1];
    for (int k = i + 1; k <= h; ++k) num -= ar.psi[k - 1] * ar.psi[k - i - 1];
    phi.set_symmetric({i}, num / (1.0 + psi_sq));
  }
  const auto rep = validate_phi(phi);
  require(rep.valid, errc::invalid_phi, "AR image fails the spectral validity check");
  return phi;
}

PhiField make_constant_phi(int d, int h, double r) {
  const auto nh = neighborhood_offsets(d, h);
  const double root = std::sqrt(static_cast<double>(nh.size()));
  require(r >= 0.0, errc::config, "target norm must be nonnegative");
  require(r * root < 1.0, errc::invalid_phi,
          "constant field violates the l1 sufficient condition (r sqrt|N_h| >= 1)");
  PhiField phi(d, h);
  for (const auto& v : nh.offsets) phi.set_symmetric(v, r / root);
  return phi;
}

Eigen::MatrixXd CovBuilder::operator()(const PhiField& phi, const Region& s) const {
  return covariance_submatrix(phi, s, table(phi, s), *lat);
}

CovTable CovBuilder::table(const PhiField& phi, const Region& s) const {
  const int extent = static_cast<int>(linf_diameter(s, *lat)) + extra_extent;
  return autocovariances(phi, extent, grid);
}

}  // namespace gmrfscan
