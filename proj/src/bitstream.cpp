#include <cstring>

#include "npcc/entropy/bitstream.hpp"
#include "npcc/errors.hpp"

namespace npcc {

namespace {

void putU32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

void putU64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

struct Reader {
  const uint8_t* data;
  size_t size;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > size) throw CorruptStream("bitstream truncated");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(data[pos + size_t(i)]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(data[pos + size_t(i)]) << (8 * i);
    pos += 8;
    return v;
  }
  uint64_t varint() { return getVarint(data, size, pos); }
};

}  // namespace

void putVarint(std::vector<uint8_t>& out, uint64_t v) {
  while (v >= 0x80) {
    out.push_back(uint8_t(v) | 0x80);
    v >>= 7;
  }
  out.push_back(uint8_t(v));
}

uint64_t getVarint(const uint8_t* data, size_t size, size_t& pos) {
  uint64_t v = 0;
  int shift = 0;
  while (true) {
    if (pos >= size) throw CorruptStream("bitstream truncated in varint");
    const uint8_t b = data[pos++];
    v |= uint64_t(b & 0x7F) << shift;
    if (!(b & 0x80)) return v;
    shift += 7;
    if (shift > 63) throw CorruptStream("varint too long");
  }
}

std::vector<uint8_t> Bitstream::serialize() const {
  std::vector<uint8_t> out;
  out.reserve(96 + size_t(base_coords.rows()) * 6 + payload.size());
  out.push_back('N');
  out.push_back('P');
  out.push_back('C');
  out.push_back('C');
  putU32(out, kVersion);
  putU32(out, scale_num);
  putU32(out, scale_den);
  out.insert(out.end(), model_hash.begin(), model_hash.end());
  putU64(out, input_point_count);
  putU64(out, coded_point_count);
  for (int a = 0; a < 3; ++a) putU32(out, uint32_t(offset[a]));
  putU32(out, scale_count);
  putU32(out, uint32_t(base_coords.rows()));
  int32_t prev[3] = {0, 0, 0};
  for (Eigen::Index i = 0; i < base_coords.rows(); ++i) {
    // per-component zigzag deltas; canonical order keeps them small
    putVarint(out, zigzag(int64_t(base_coords(i, 0)) - prev[0]));
    putVarint(out, zigzag(int64_t(base_coords(i, 1)) - prev[1]));
    putVarint(out, zigzag(int64_t(base_coords(i, 2)) - prev[2]));
    for (int a = 0; a < 3; ++a) prev[a] = base_coords(i, a);
  }
  putU64(out, payload.size());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Bitstream Bitstream::deserialize(const std::vector<uint8_t>& bytes) {
  Reader r{bytes.data(), bytes.size()};
  r.need(4);
  if (std::memcmp(bytes.data(), "NPCC", 4) != 0)
    throw CorruptStream("bad magic, not an NPCC bitstream");
  r.pos = 4;
  const uint32_t version = r.u32();
  if (version != kVersion) throw CorruptStream("unsupported bitstream version");
  Bitstream bs;
  bs.scale_num = r.u32();
  bs.scale_den = r.u32();
  if (bs.scale_num == 0 || bs.scale_den == 0)
    throw CorruptStream("invalid scaling factor");
  r.need(32);
  std::memcpy(bs.model_hash.data(), bytes.data() + r.pos, 32);
  r.pos += 32;
  bs.input_point_count = r.u64();
  bs.coded_point_count = r.u64();
  for (int a = 0; a < 3; ++a) bs.offset[a] = int32_t(r.u32());
  bs.scale_count = r.u32();
  const uint32_t base_count = r.u32();
  if (base_count > (1u << 26)) throw CorruptStream("implausible base point count");
  bs.base_coords.resize(base_count, 3);
  int64_t prev[3] = {0, 0, 0};
  for (uint32_t i = 0; i < base_count; ++i) {
    for (int a = 0; a < 3; ++a) {
      const int64_t v = prev[a] + unzigzag(r.varint());
      if (v > kMaxCoordMagnitude || v < -kMaxCoordMagnitude)
        throw CorruptStream("base coordinate out of range");
      bs.base_coords(i, a) = int32_t(v);
      prev[a] = v;
    }
  }
  const uint64_t payload_size = r.u64();
  r.need(payload_size);
  bs.payload.assign(bytes.begin() + long(r.pos), bytes.begin() + long(r.pos + payload_size));
  return bs;
}

}  // namespace npcc
