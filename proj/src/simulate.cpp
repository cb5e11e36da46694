#include "gmrfscan/simulate.hpp"

#include <json.hpp>

#include <cstdio>
#include <istream>
#include <ostream>

namespace gmrfscan {

namespace {
constexpr Index kMaxPatch = 10000;
}

Field sample_null(const Lattice& lat, RngStream& rng) {
  Field f;
  f.lat = &lat;
  f.data.resize(lat.size());
  for (auto& x : f.data) x = rng.next_gaussian();
  f.prov.hypothesis = Hypothesis::H0;
  return f;
}

Field sample_null(const Lattice& lat, uint64_t seed) {
  RngStream rng = substream(seed, StreamPurpose::generic, 0);
  Field f = sample_null(lat, rng);
  f.prov.seed = seed;
  return f;
}

PatchSampler::PatchSampler(const PhiField& phi, const Region& s, const CovTable& cov,
                           const Lattice& lat)
    : lat_(&lat), region_(s), phi_(phi) {
  require(s.size() <= kMaxPatch, errc::size,
          "patch too large for exact dense factorization (cap 10^4 nodes)");
  const Eigen::MatrixXd gamma = covariance_submatrix(phi, s, cov, lat);
  Eigen::LLT<Eigen::MatrixXd> llt(gamma);
  require(llt.info() == Eigen::Success, errc::conditioning,
          "patch covariance failed Cholesky factorization");
  chol_ = llt.matrixL();
}

Eigen::VectorXd PatchSampler::sample_patch(RngStream& rng) const {
  Eigen::VectorXd z(region_.size());
  for (Index i = 0; i < z.size(); ++i) z[i] = rng.next_gaussian();
  return chol_ * z;
}

Field PatchSampler::sample_field(RngStream& rng, uint64_t seed_for_provenance) const {
  const Eigen::VectorXd patch = sample_patch(rng);
  Field f;
  f.lat = lat_;
  f.data.assign(lat_->size(), 0.0);
  std::vector<char> in_patch(lat_->size(), 0);
  for (Index i = 0; i < region_.size(); ++i) {
    f.data[region_.nodes[i]] = patch[i];
    in_patch[region_.nodes[i]] = 1;
  }
  for (Index i = 0; i < lat_->size(); ++i)
    if (!in_patch[i]) f.data[i] = rng.next_gaussian();
  f.prov.hypothesis = Hypothesis::H1;
  f.prov.region = region_;
  f.prov.phi = phi_;
  f.prov.seed = seed_for_provenance;
  return f;
}

Eigen::VectorXd sample_gmrf_patch(const PhiField& phi, const Region& s, const CovTable& cov,
                                  const Lattice& lat, uint64_t seed) {
  PatchSampler sampler(phi, s, cov, lat);
  RngStream rng = substream(seed, StreamPurpose::generic, 0);
  return sampler.sample_patch(rng);
}

Field sample_alternative(const Lattice& lat, const Region& s, const PhiField& phi,
                         const CovTable& cov, uint64_t seed) {
  PatchSampler sampler(phi, s, cov, lat);
  RngStream rng = substream(seed, StreamPurpose::generic, 0);
  return sampler.sample_field(rng, seed);
}

void write_field_csv(const Field& f, std::ostream& os) {
  os << "index,value\n";
  char buf[64];
  for (size_t i = 0; i < f.data.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, f.data[i]);
    os << buf;
  }
}

std::vector<double> read_field_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), errc::io, "empty field file");
  require(line == "index,value" || line == "index,value\r", errc::io,
          "unexpected field CSV header");
  std::vector<double> data;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    require(comma != std::string::npos, errc::io, "malformed field CSV row");
    data.push_back(std::stod(line.substr(comma + 1)));
  }
  require(!data.empty(), errc::io, "field file has no data rows");
  return data;
}

void write_field_json(const Field& f, std::ostream& os) {
  nlohmann::json j;
  j["provenance"]["hypothesis"] = f.prov.hypothesis == Hypothesis::H0 ? "H0" : "H1";
  j["provenance"]["seed"] = f.prov.seed;
  j["provenance"]["rng"] = f.prov.rng;
  if (f.prov.region) {
    j["provenance"]["region"]["nodes"] = f.prov.region->nodes;
  }
  if (f.prov.phi) {
    nlohmann::json values = nlohmann::json::object();
    const auto& off = f.prov.phi->offsets();
    for (Index i = 0; i < off.size(); ++i) {
      // Emit the half lattice only; negatives are implied by symmetry.
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
      values[key] = f.prov.phi->values()[i];
    }
    j["provenance"]["phi"] = {{"d", f.prov.phi->dim()},
                              {"h", f.prov.phi->radius()},
                              {"values", values}};
  }
  j["data"] = f.data;
  os << j.dump(2) << "\n";
}

}  // namespace gmrfscan
