#include "gmrfscan/lattice.hpp"

#include <algorithm>
#include <unordered_set>

namespace gmrfscan {

namespace {

constexpr Index kMaxNodes = Index(1) << 40;

Index checked_pow(Index m, int d) {
  Index n = 1;
  for (int i = 0; i < d; ++i) {
    if (m != 0 && n > kMaxNodes / m) fail(errc::size, "m^d overflows addressable size");
    n *= m;
  }
  return n;
}

}  // namespace

Lattice::Lattice(int d, Index m) : d_(d), m_(m) {
  require(d >= 1 && d <= 8, errc::size, "lattice dimension must be in [1, 8]");
  require(m >= 1, errc::size, "lattice side must be positive");
  n_ = checked_pow(m, d);
  strides_.assign(d, 1);
  for (int a = d - 2; a >= 0; --a) strides_[a] = strides_[a + 1] * m;
}

Index Lattice::flatten(const MultiIndex& p) const {
  Index flat = 0;
  for (int a = 0; a < d_; ++a) flat += (p[a] - 1) * strides_[a];
  return flat;
}

MultiIndex Lattice::unflatten(Index flat) const {
  MultiIndex p(d_);
  for (int a = 0; a < d_; ++a) {
    p[a] = flat / strides_[a] + 1;
    flat %= strides_[a];
  }
  return p;
}

bool Lattice::contains(const MultiIndex& p) const {
  for (int a = 0; a < d_; ++a)
    if (p[a] < 1 || p[a] > m_) return false;
  return true;
}

Lattice make_lattice(int d, Index m) { return Lattice(d, m); }

bool Region::contains_node(Index flat) const {
  return std::binary_search(nodes.begin(), nodes.end(), flat);
}

NeighborhoodOffsets neighborhood_offsets(int d, int h) {
  require(d >= 1 && d <= 8, errc::size, "dimension must be in [1, 8]");
  require(h >= 1, errc::size, "neighborhood radius must be positive");
  NeighborhoodOffsets nh;
  nh.d = d;
  nh.h = h;
  MultiIndex v(d, -h);
  while (true) {
    bool zero = std::all_of(v.begin(), v.end(), [](Index x) { return x == 0; });
    if (!zero) nh.offsets.push_back(v);
    int a = d - 1;
    while (a >= 0 && v[a] == h) v[a--] = -h;
    if (a < 0) break;
    ++v[a];
  }
  return nh;
}

Region make_explicit_region(const Lattice& lat, std::vector<Index> nodes) {
  require(!nodes.empty(), errc::empty_class, "region must contain at least one node");
  std::sort(nodes.begin(), nodes.end());
  require(std::adjacent_find(nodes.begin(), nodes.end()) == nodes.end(), errc::config,
          "region nodes must be distinct");
  require(nodes.front() >= 0 && nodes.back() < lat.size(), errc::config,
          "region node outside the lattice");
  Region s;
  s.nodes = std::move(nodes);
  s.shape = RegionShape::explicit_shape;
  return s;
}

Region make_hypercube_region(const Lattice& lat, const MultiIndex& anchor, Index side) {
  const int d = lat.dim();
  require(side >= 1, errc::config, "hypercube side must be positive");
  for (int a = 0; a < d; ++a)
    require(anchor[a] >= 1 && anchor[a] + side - 1 <= lat.side(), errc::config,
            "hypercube exceeds lattice bounds");
  Region s;
  s.shape = (d == 1) ? RegionShape::interval : RegionShape::hypercube;
  s.anchor = anchor;
  s.side = side;
  s.nodes.reserve(checked_pow(side, d));
  // Row-major enumeration of the cube; flat indices come out ascending.
  MultiIndex q = anchor;
  while (true) {
    s.nodes.push_back(lat.flatten(q));
    int a = d - 1;
    while (a >= 0 && q[a] == anchor[a] + side - 1) --a;
    if (a < 0) break;
    ++q[a];
    for (int b = a + 1; b < d; ++b) q[b] = anchor[b];
  }
  return s;
}

RegionClass interval_class(const Lattice& lat, Index k) {
  require(lat.dim() == 1, errc::config, "interval class requires d = 1");
  require(k >= 1, errc::config, "interval length must be positive");
  require(k <= lat.side(), errc::empty_class, "interval length exceeds lattice side");
  RegionClass c;
  c.kind = RegionClassKind::intervals;
  c.param = k;
  for (Index a = 1; a + k - 1 <= lat.side(); ++a)
    c.regions.push_back(make_hypercube_region(lat, {a}, k));
  return c;
}

RegionClass hypercube_class(const Lattice& lat, Index side) {
  require(side >= 1, errc::config, "hypercube side must be positive");
  require(side <= lat.side(), errc::empty_class, "hypercube side exceeds lattice side");
  RegionClass c;
  c.kind = RegionClassKind::hypercubes;
  c.param = side;
  const int d = lat.dim();
  const Index amax = lat.side() - side + 1;
  MultiIndex anchor(d, 1);
  while (true) {
    c.regions.push_back(make_hypercube_region(lat, anchor, side));
    int a = d - 1;
    while (a >= 0 && anchor[a] == amax) anchor[a--] = 1;
    if (a < 0) break;
    ++anchor[a];
  }
  return c;
}

RegionClass disjoint_tiling(const Lattice& lat, Index side) {
  require(side >= 1, errc::config, "tile side must be positive");
  require(side <= lat.side(), errc::empty_class, "tile side exceeds lattice side");
  RegionClass c;
  c.kind = RegionClassKind::disjoint_tiling;
  c.param = side;
  const int d = lat.dim();
  const Index tiles = lat.side() / side;  // partial tiles dropped
  MultiIndex t(d, 0);
  while (true) {
    MultiIndex anchor(d);
    for (int a = 0; a < d; ++a) anchor[a] = t[a] * side + 1;
    c.regions.push_back(make_hypercube_region(lat, anchor, side));
    int a = d - 1;
    while (a >= 0 && t[a] == tiles - 1) t[a--] = 0;
    if (a < 0) break;
    ++t[a];
  }
  return c;
}

Index dyadic_count(int d, Index m) {
  Index total = 0;
  for (Index side = 1; side <= m; side *= 2) {
    Index per_axis = m / side;
    Index cnt = 1;
    for (int a = 0; a < d; ++a) cnt *= per_axis;
    total += cnt;
    if (side > m / 2) break;
  }
  return total;
}

RegionClass dyadic_hypercubes(const Lattice& lat) {
  RegionClass c;
  c.kind = RegionClassKind::dyadic;
  const int d = lat.dim();
  for (Index side = 1; side <= lat.side(); side *= 2) {
    const Index tiles = lat.side() / side;
    MultiIndex t(d, 0);
    while (true) {
      MultiIndex anchor(d);
      for (int a = 0; a < d; ++a) anchor[a] = t[a] * side + 1;
      c.regions.push_back(make_hypercube_region(lat, anchor, side));
      int a = d - 1;
      while (a >= 0 && t[a] == tiles - 1) t[a--] = 0;
      if (a < 0) break;
      ++t[a];
    }
    if (side > lat.side() / 2) break;
  }
  require(c.size() < 2 * lat.size(), errc::size, "dyadic class count bound violated");
  return c;
}

Region h_interior(const Region& s, int h, const Lattice& lat) {
  Region out;
  out.shape = RegionShape::explicit_shape;
  if (s.shape == RegionShape::interval || s.shape == RegionShape::hypercube) {
    if (s.side <= 2 * h) return out;  // interior empty
    MultiIndex anchor = s.anchor;
    for (auto& a : anchor) a += h;
    Region inner = make_hypercube_region(lat, anchor, s.side - 2 * h);
    inner.shape = s.shape;
    return inner;
  }
  std::unordered_set<Index> members(s.nodes.begin(), s.nodes.end());
  const auto nh = neighborhood_offsets(lat.dim(), h);
  for (Index flat : s.nodes) {
    const MultiIndex p = lat.unflatten(flat);
    bool interior = true;
    for (const auto& v : nh.offsets) {
      MultiIndex q = p;
      for (int a = 0; a < lat.dim(); ++a) q[a] += v[a];
      if (!lat.contains(q) || !members.count(lat.flatten(q))) {
        interior = false;
        break;
      }
    }
    if (interior) out.nodes.push_back(flat);
  }
  std::sort(out.nodes.begin(), out.nodes.end());
  return out;
}

Region h_boundary(const Region& s, int h, const Lattice& lat) {
  const Region interior = h_interior(s, h, lat);
  Region out;
  out.shape = RegionShape::explicit_shape;
  std::set_difference(s.nodes.begin(), s.nodes.end(), interior.nodes.begin(),
                      interior.nodes.end(), std::back_inserter(out.nodes));
  return out;
}

bool pairwise_disjoint(const RegionClass& c) {
  std::unordered_set<Index> seen;
  for (const auto& r : c.regions)
    for (Index node : r.nodes)
      if (!seen.insert(node).second) return false;
  return true;
}

Index linf_diameter(const Region& s, const Lattice& lat) {
  const int d = lat.dim();
  MultiIndex lo(d, lat.side() + 1), hi(d, 0);
  for (Index flat : s.nodes) {
    const MultiIndex p = lat.unflatten(flat);
    for (int a = 0; a < d; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  Index diam = 0;
  for (int a = 0; a < d; ++a) diam = std::max(diam, hi[a] - lo[a]);
  return diam;
}

}  // namespace gmrfscan
