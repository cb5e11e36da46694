#include <doctest.h>

#include <cmath>
#include <vector>

#include "gmrfscan/rng.hpp"

using namespace gmrfscan;

TEST_CASE("philox known answer vectors") {
  // Reference vectors for philox4x32-10 (counter, key) -> output.
  Philox4x32 zero(0, 0);
  const auto b0 = zero(0);
  CHECK(b0[0] == 0x6627e8d5u);
  CHECK(b0[1] == 0xe169c58du);
  CHECK(b0[2] == 0xbc57ac4cu);
  CHECK(b0[3] == 0x9b00dbd8u);

  Philox4x32 ones(0xffffffffffffffffull, 0xffffffffffffffffull);
  const auto b1 = ones(0xffffffffffffffffull);
  CHECK(b1[0] == 0x408f276du);
  CHECK(b1[1] == 0x41c83b0eu);
  CHECK(b1[2] == 0xa20bc7c6u);
  CHECK(b1[3] == 0x6d5451fdu);
}

TEST_CASE("streams are deterministic and independent of interleaving") {
  RngStream a(42, 7);
  RngStream b(42, 7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c(42, 8);
  bool all_equal = true;
  RngStream a2(42, 7);
  for (int i = 0; i < 100; ++i)
    if (a2.next_u64() != c.next_u64()) all_equal = false;
  CHECK_FALSE(all_equal);
}

TEST_CASE("uniforms live in (0,1) with the right moments") {
  RngStream rng(1, 0);
  const int n = 200000;
  double sum = 0, sumsq = 0, lo = 1, hi = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_double();
    sum += u;
    sumsq += u * u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
  CHECK(std::abs(sum / n - 0.5) < 4.0 / std::sqrt(12.0 * n));
  CHECK(std::abs(sumsq / n - 1.0 / 3.0) < 0.005);
}

TEST_CASE("gaussians have standard moments") {
  RngStream rng(3, 0);
  const int n = 200000;
  double sum = 0, sumsq = 0, sum4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.next_gaussian();
    sum += z;
    sumsq += z * z;
    sum4 += z * z * z * z;
  }
  CHECK(std::abs(sum / n) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(sumsq / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(sum4 / n - 3.0) < 0.15);
}

TEST_CASE("purpose-tagged substreams do not collide") {
  RngStream cal = substream(5, StreamPurpose::calibration, 0);
  RngStream ev = substream(5, StreamPurpose::eval_null, 0);
  double corr = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) corr += cal.next_gaussian() * ev.next_gaussian();
  CHECK(std::abs(corr / n) < 4.0 / std::sqrt(static_cast<double>(n)));
}
