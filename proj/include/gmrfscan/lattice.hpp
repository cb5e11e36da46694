#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gmrfscan/error.hpp"

namespace gmrfscan {

using Index = int64_t;
using MultiIndex = std::vector<Index>;  // 1-based coordinates in {1,...,m}^d

// {1,...,m}^d flattened row-major (axis 0 slowest), nodes addressed 0..n-1.
class Lattice {
 public:
  Lattice(int d, Index m);

  int dim() const { return d_; }
  Index side() const { return m_; }
  Index size() const { return n_; }

  Index flatten(const MultiIndex& p) const;
  MultiIndex unflatten(Index flat) const;
  bool contains(const MultiIndex& p) const;

  // Flat-index stride of a unit step along each axis.
  const std::vector<Index>& strides() const { return strides_; }

 private:
  int d_;
  Index m_;
  Index n_;
  std::vector<Index> strides_;
};

Lattice make_lattice(int d, Index m);

enum class RegionShape { interval, hypercube, explicit_shape };

// A candidate anomalous set S. Nodes are sorted flat indices; interval and
// hypercube regions additionally carry their anchor corner and side length.
struct Region {
  std::vector<Index> nodes;
  RegionShape shape = RegionShape::explicit_shape;
  MultiIndex anchor;  // min corner, 1-based (interval/hypercube only)
  Index side = 0;

  Index size() const { return static_cast<Index>(nodes.size()); }
  bool contains_node(Index flat) const;
};

enum class RegionClassKind { intervals, hypercubes, disjoint_tiling, dyadic, explicit_class };

struct RegionClass {
  std::vector<Region> regions;
  RegionClassKind kind = RegionClassKind::explicit_class;
  Index param = 0;  // k for intervals, side for hypercubes/tiling

  Index size() const { return static_cast<Index>(regions.size()); }
};

// The neighborhood {-h,...,h}^d \ {0}, lexicographically ordered offsets.
struct NeighborhoodOffsets {
  int d = 1;
  int h = 1;
  std::vector<MultiIndex> offsets;

  Index size() const { return static_cast<Index>(offsets.size()); }
};

NeighborhoodOffsets neighborhood_offsets(int d, int h);

Region make_explicit_region(const Lattice& lat, std::vector<Index> nodes);
Region make_hypercube_region(const Lattice& lat, const MultiIndex& anchor, Index side);

RegionClass interval_class(const Lattice& lat, Index k);
RegionClass hypercube_class(const Lattice& lat, Index side);
RegionClass disjoint_tiling(const Lattice& lat, Index side);
RegionClass dyadic_hypercubes(const Lattice& lat);

// Number of dyadic hypercubes without materializing them.
Index dyadic_count(int d, Index m);

// h-boundary of S: nodes within l_inf distance h of Z^d \ S (the infinite
// lattice complement, so regions touching the window edge keep a full ring).
Region h_boundary(const Region& s, int h, const Lattice& lat);
Region h_interior(const Region& s, int h, const Lattice& lat);

bool pairwise_disjoint(const RegionClass& c);

// l_inf diameter (max per-axis span) of a region.
Index linf_diameter(const Region& s, const Lattice& lat);

}  // namespace gmrfscan
