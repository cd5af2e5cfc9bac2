#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "npcc/types.hpp"

namespace npcc {

/// Container for one coded point cloud. The layout is documented
/// bit-exactly in docs/bitstream.md; magic, version and field order are
/// normative.
struct Bitstream {
  static constexpr uint32_t kVersion = 1;

  uint32_t scale_num = 1;           // lossy scaling factor S = num/den
  uint32_t scale_den = 1;
  std::array<uint8_t, 32> model_hash{};
  uint64_t input_point_count = 0;   // pre-scaling count (bpp denominator)
  uint64_t coded_point_count = 0;   // count at the coded scale
  int32_t offset[3] = {0, 0, 0};    // per-axis shift applied after scaling
  uint32_t scale_count = 0;         // number of coded scale transitions
  CoordMatrix base_coords;          // raw-coded coarsest scale
  std::vector<uint8_t> payload;     // arithmetic-coded occupancy bits

  std::vector<uint8_t> serialize() const;
  static Bitstream deserialize(const std::vector<uint8_t>& bytes);
};

// LEB128-style varints used for the raw base-scale coordinates.
void putVarint(std::vector<uint8_t>& out, uint64_t v);
uint64_t getVarint(const uint8_t* data, size_t size, size_t& pos);
inline uint64_t zigzag(int64_t v) { return (uint64_t(v) << 1) ^ uint64_t(v >> 63); }
inline int64_t unzigzag(uint64_t v) { return int64_t(v >> 1) ^ -int64_t(v & 1); }

}  // namespace npcc
