#pragma once

#include <stdexcept>
#include <string>

namespace gmrfscan {

enum class errc {
  size,          // lattice or patch exceeds addressable/supported size
  empty_class,   // region class would be empty
  symmetry,      // interaction vector not symmetric under negation
  invalid_phi,   // spectral validity check failed
  grid,          // quadrature grid too small for the requested extent
  conditioning,  // factorization failed, matrix not positive definite
  degenerate,    // statistic undefined (phi = 0 or |C| = 1)
  empty_scan,    // every region in the scan was skipped
  domain,        // determinant domain violated (eigenvalue-1/2 condition)
  config,        // malformed configuration
  io,            // file I/O failure
  too_large,     // brute-force instance cap exceeded
};

class error : public std::runtime_error {
 public:
  error(errc kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  errc kind() const { return kind_; }

 private:
  errc kind_;
};

[[noreturn]] inline void fail(errc kind, const std::string& what) { throw error(kind, what); }

inline void require(bool cond, errc kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace gmrfscan
