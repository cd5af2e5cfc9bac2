#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "npcc/entropy/bitstream.hpp"
#include "npcc/entropy/range_coder.hpp"
#include "npcc/rng.hpp"

using namespace npcc;

TEST_CASE("quantizeProb rounds and clamps") {
  CHECK(quantizeProb(0.5).p16 == 32768);
  CHECK(quantizeProb(1e-9).p16 == 1);          // clamp floor
  CHECK(quantizeProb(0.9999999).p16 == 65535); // clamp ceiling
  // round(0.123456 * 65536) = round(8090.812416) = 8091
  CHECK(quantizeProb(0.123456).p16 == 8091);
}

TEST_CASE("half-probability bits cost one bit each") {
  Rng rng(1);
  RangeEncoder enc;
  const QuantProb half{32768};
  std::vector<int> bits;
  for (int i = 0; i < 10000; ++i) {
    bits.push_back(int(rng.below(2)));
    enc.encodeBit(bits.back(), half);
  }
  const auto payload = enc.finish();
  CHECK(payload.size() >= 1242);
  CHECK(payload.size() <= 1262);

  RangeDecoder dec(payload.data(), payload.size());
  for (int i = 0; i < 10000; ++i) CHECK(dec.decodeBit(half) == bits[size_t(i)]);
}

TEST_CASE("near-certain symbols cost almost nothing") {
  RangeEncoder enc;
  const QuantProb p{65535};
  for (int i = 0; i < 1000; ++i) enc.encodeBit(1, p);
  const auto payload = enc.finish();
  CHECK(payload.size() < 8);
  RangeDecoder dec(payload.data(), payload.size());
  for (int i = 0; i < 1000; ++i) CHECK(dec.decodeBit(p) == 1);
}

TEST_CASE("random probability sequences round-trip with bounded overhead") {
  Rng rng(7);
  const int n = 100000;
  std::vector<int> bits(static_cast<size_t>(n));
  std::vector<QuantProb> probs(static_cast<size_t>(n));
  double ideal = 0;
  RangeEncoder enc;
  for (int i = 0; i < n; ++i) {
    probs[size_t(i)].p16 = uint16_t(1 + rng.below(65535));
    const double p1 = probs[size_t(i)].p16 / 65536.0;
    bits[size_t(i)] = rng.uniform() < p1 ? 1 : 0;
    enc.encodeBit(bits[size_t(i)], probs[size_t(i)]);
    ideal -= std::log2(bits[size_t(i)] ? p1 : 1.0 - p1);
  }
  const auto payload = enc.finish();
  const double actual_bits = double(payload.size()) * 8;
  CHECK(std::abs(actual_bits - ideal) < 64.0);

  RangeDecoder dec(payload.data(), payload.size());
  for (int i = 0; i < n; ++i) CHECK(dec.decodeBit(probs[size_t(i)]) == bits[size_t(i)]);
}

TEST_CASE("decoding past the stream end raises StreamExhausted") {
  RangeEncoder enc;
  for (int i = 0; i < 16; ++i) enc.encodeBit(i & 1, QuantProb{32768});
  const auto payload = enc.finish();
  RangeDecoder dec(payload.data(), payload.size());
  CHECK_THROWS_AS(
      [&] {
        for (int i = 0; i < 4000; ++i) dec.decodeBit(QuantProb{32768});
      }(),
      StreamExhausted);
}

TEST_CASE("coder state is integer-only: repeated runs emit identical bytes") {
  std::vector<uint8_t> first;
  for (int run = 0; run < 2; ++run) {
    Rng rng(99);
    RangeEncoder enc;
    for (int i = 0; i < 5000; ++i)
      enc.encodeBit(int(rng.below(2)), QuantProb{uint16_t(1 + rng.below(65535))});
    const auto payload = enc.finish();
    if (run == 0) first = payload;
    else CHECK(first == payload);
  }
}

TEST_CASE("varints round-trip") {
  std::vector<uint8_t> buf;
  const uint64_t values[] = {0, 1, 127, 128, 300, 1u << 20, (1ull << 62) + 12345};
  for (uint64_t v : values) putVarint(buf, v);
  size_t pos = 0;
  for (uint64_t v : values) CHECK(getVarint(buf.data(), buf.size(), pos) == v);
  CHECK(pos == buf.size());
  CHECK(unzigzag(zigzag(-5)) == -5);
  CHECK(unzigzag(zigzag(7)) == 7);
  CHECK(unzigzag(zigzag(int64_t(-2000000000))) == -2000000000);
}

TEST_CASE("bitstream header round-trips") {
  Bitstream bs;
  bs.scale_num = 1;
  bs.scale_den = 4;
  bs.model_hash.fill(0xAB);
  bs.input_point_count = 123456;
  bs.coded_point_count = 777;
  bs.offset[0] = -12;
  bs.offset[1] = 0;
  bs.offset[2] = 99;
  bs.scale_count = 3;
  bs.base_coords.resize(3, 3);
  bs.base_coords << 0, 5, -2, 1, 5, -2, 4, 0, 100;
  bs.payload = {1, 2, 3, 4, 5};
  const auto bytes = bs.serialize();
  const Bitstream back = Bitstream::deserialize(bytes);
  CHECK(back.scale_num == bs.scale_num);
  CHECK(back.scale_den == bs.scale_den);
  CHECK(back.model_hash == bs.model_hash);
  CHECK(back.input_point_count == bs.input_point_count);
  CHECK(back.coded_point_count == bs.coded_point_count);
  CHECK(back.offset[0] == -12);
  CHECK(back.offset[2] == 99);
  CHECK(back.scale_count == 3);
  CHECK(back.base_coords == bs.base_coords);
  CHECK(back.payload == bs.payload);
}

TEST_CASE("truncated or corrupted containers are rejected") {
  Bitstream bs;
  bs.base_coords.resize(1, 3);
  bs.base_coords << 1, 2, 3;
  bs.payload = {9, 9, 9};
  auto bytes = bs.serialize();
  auto truncated = bytes;
  truncated.resize(truncated.size() - 2);
  CHECK_THROWS_AS(Bitstream::deserialize(truncated), CorruptStream);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(Bitstream::deserialize(bad_magic), CorruptStream);
}
