#pragma once

#include <cstdint>
#include <vector>

#include "npcc/errors.hpp"

namespace npcc {

/// Probability of coding a 1-bit, quantized to p16/65536 with
/// p16 in [1, 65535] so both symbols always remain codable.
struct QuantProb {
  uint16_t p16;
};

/// round(p * 65536) clamped to [1, 65535]; round-half-away-from-zero.
QuantProb quantizeProb(double p);

/// Binary range encoder: 32-bit range, 64-bit low with byte-wise
/// renormalization and carry propagation. Integer-only state, so the
/// emitted bytes are identical on every platform.
class RangeEncoder {
 public:
  void encodeBit(int bit, QuantProb p);
  /// Flushes the remaining state; no more bits may be encoded afterwards.
  std::vector<uint8_t> finish();

  int64_t symbolCount() const { return symbols_; }

 private:
  void shiftLow();

  std::vector<uint8_t> bytes_;
  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  int64_t symbols_ = 0;
};

class RangeDecoder {
 public:
  RangeDecoder(const uint8_t* data, size_t size);
  int decodeBit(QuantProb p);

  size_t consumed() const { return pos_; }

 private:
  uint8_t nextByte();

  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

}  // namespace npcc
