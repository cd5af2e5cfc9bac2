#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "npcc/entropy/bitstream.hpp"
#include "npcc/mopa.hpp"
#include "npcc/types.hpp"

namespace npcc {

struct Rational {
  uint32_t num = 1;
  uint32_t den = 1;

  bool isOne() const { return num == den; }
};

/// Codec-level settings. The neighborhood size that drives the model is
/// carried inside the weights (MopaWeights::k) so encoder and decoder can
/// never disagree on it; `k`, `heads` and `cph` here configure freshly
/// constructed models (training, tests).
struct CodecConfig {
  int k = 16;
  int heads = 4;
  int cph = 8;
  Rational scale;                  // lossy scaling factor S, 1/1 = lossless
  int base_scale_threshold = 64;   // max raw-coded points at the coarsest scale
  uint64_t seed = 0;
  bool force_uniform = false;      // constant p = 0.5 model, baseline/testing
};

/// round-half-away-from-zero, the single rounding rule used everywhere.
int64_t roundHalfAwayFromZero(double x);

/// round(v * num / den) in exact integer arithmetic, half away from zero.
int64_t roundScaled(int64_t v, uint32_t num, uint32_t den);

/// P_Q = round(P / precision) per component.
CoordMatrix quantizeMm(const PointMatrix& points, double precision);

/// P_Q = round((P - offset) / q_s) with q_s = 2 / (2^depth - 1) and a
/// per-axis minimum offset; input normalized to [-1, 1].
CoordMatrix quantizeDepth(const PointMatrix& points, int depth);

struct EncodeResult {
  std::vector<uint8_t> bytes;  // serialized bitstream
  uint64_t payload_bits = 0;
  double bpp = 0;              // payload_bits / input point count
  int64_t symbols = 0;
  double ideal_bits = 0;       // entropy sum of the coded probabilities
};

struct DecodeResult {
  CoordMatrix coded_coords;    // exact coordinates at the coded scale
  CoordMatrix reconstruction;  // inverse-scaled when S < 1, else identical
};

EncodeResult encodePointCloud(const CoordMatrix& points, const CodecConfig& cfg,
                              const MopaWeights<float>& weights,
                              const std::array<uint8_t, 32>& model_hash);

DecodeResult decodePointCloud(const std::vector<uint8_t>& bytes,
                              const MopaWeights<float>& weights,
                              const std::array<uint8_t, 32>& model_hash,
                              bool force_uniform = false);

}  // namespace npcc
