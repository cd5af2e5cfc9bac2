#include <cmath>

#include "npcc/entropy/range_coder.hpp"

namespace npcc {

namespace {
constexpr uint32_t kTop = 1u << 24;

// Split the current range into a 1-symbol part of (range * p16) >> 16 and
// the complement. The 64-bit product keeps the quantization loss below
// one range unit per symbol.
inline uint32_t boundOf(uint32_t range, QuantProb p) {
  return uint32_t((uint64_t(range) * p.p16) >> 16);
}
}  // namespace

QuantProb quantizeProb(double p) {
  const double scaled = p * 65536.0;
  // round half away from zero; p is in (0,1) so only the upper clamp and
  // the floor clamp can trigger
  int64_t q = int64_t(std::floor(scaled + 0.5));
  if (q < 1) q = 1;
  if (q > 65535) q = 65535;
  return QuantProb{uint16_t(q)};
}

void RangeEncoder::encodeBit(int bit, QuantProb p) {
  const uint32_t bound = boundOf(range_, p);
  if (bit) {
    range_ = bound;
  } else {
    low_ += bound;
    range_ -= bound;
  }
  while (range_ < kTop) {
    shiftLow();
    range_ <<= 8;
  }
  ++symbols_;
}

void RangeEncoder::shiftLow() {
  if (uint32_t(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    uint8_t carry = uint8_t(low_ >> 32);
    uint8_t out = cache_;
    do {
      bytes_.push_back(uint8_t(out + carry));
      out = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = uint8_t(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ << 8) & 0xFFFFFFFFull;
}

std::vector<uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shiftLow();
  return std::move(bytes_);
}

RangeDecoder::RangeDecoder(const uint8_t* data, size_t size)
    : data_(data), size_(size) {
  for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | nextByte();
}

uint8_t RangeDecoder::nextByte() {
  if (pos_ >= size_) throw StreamExhausted();
  return data_[pos_++];
}

int RangeDecoder::decodeBit(QuantProb p) {
  const uint32_t bound = boundOf(range_, p);
  int bit;
  if (code_ < bound) {
    bit = 1;
    range_ = bound;
  } else {
    bit = 0;
    code_ -= bound;
    range_ -= bound;
  }
  while (range_ < kTop) {
    range_ <<= 8;
    code_ = (code_ << 8) | nextByte();
  }
  return bit;
}

}  // namespace npcc
