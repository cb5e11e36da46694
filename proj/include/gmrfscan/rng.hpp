#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace gmrfscan {

// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3", SC'11). A (seed, stream) pair addresses an
// independent sequence of 2^64 blocks of 128 bits; provenance records the
// identifier "philox4x32-10".
class Philox4x32 {
 public:
  using Block = std::array<uint32_t, 4>;

  Philox4x32(uint64_t seed, uint64_t stream)
      : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
        stream_{static_cast<uint32_t>(stream), static_cast<uint32_t>(stream >> 32)} {}

  Block operator()(uint64_t block_index) const {
    Block ctr = {static_cast<uint32_t>(block_index),
                 static_cast<uint32_t>(block_index >> 32), stream_[0], stream_[1]};
    std::array<uint32_t, 2> key = key_;
    ctr = round(ctr, key);
    for (int r = 1; r < 10; ++r) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
      ctr = round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr uint32_t kMul0 = 0xD2511F53u;
  static constexpr uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr uint32_t kWeyl1 = 0xBB67AE85u;

  static Block round(const Block& ctr, const std::array<uint32_t, 2>& key) {
    const uint64_t p0 = static_cast<uint64_t>(kMul0) * ctr[0];
    const uint64_t p1 = static_cast<uint64_t>(kMul1) * ctr[2];
    const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
    const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
    return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }

  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 2> stream_;
};

// Sequential view of one Philox stream: uniforms and Gaussians.
class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t stream) : gen_(seed, stream) {}

  uint32_t next_u32() {
    if (pos_ == 4) {
      block_ = gen_(counter_++);
      pos_ = 0;
    }
    return block_[pos_++];
  }

  uint64_t next_u64() {
    const uint64_t lo = next_u32();
    const uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on the open interval (0, 1).
  double next_double() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second value of each pair is buffered.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_double();
    const double u2 = next_double();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * M_PI * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
  }

 private:
  Philox4x32 gen_;
  Philox4x32::Block block_{};
  uint64_t counter_ = 0;
  int pos_ = 4;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stream-id layout used across the project: a purpose tag keeps calibration,
// evaluation and sampling draws on disjoint streams, and the index enumerates
// replicates (or planted regions x replicates) within a purpose.
enum class StreamPurpose : uint64_t {
  generic = 0,
  calibration = 1,
  eval_null = 2,
  eval_alt = 3,
  signal = 4,
  oracle = 5,
  bootstrap = 6,
};

inline RngStream substream(uint64_t seed, StreamPurpose purpose, uint64_t index) {
  return RngStream(seed, (static_cast<uint64_t>(purpose) << 56) | index);
}

}  // namespace gmrfscan
