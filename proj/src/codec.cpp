#include <cmath>

#include "npcc/codec.hpp"
#include "npcc/coord_map.hpp"

namespace npcc {

int64_t roundHalfAwayFromZero(double x) {
  return x >= 0 ? int64_t(std::floor(x + 0.5)) : int64_t(std::ceil(x - 0.5));
}

int64_t roundScaled(int64_t v, uint32_t num, uint32_t den) {
  const int64_t t = v * int64_t(num);
  int64_t q = t / int64_t(den);
  const int64_t r = t % int64_t(den);
  if (2 * std::abs(r) >= int64_t(den)) q += (t >= 0 ? 1 : -1);
  return q;
}

namespace {

int32_t checkedCoord(int64_t v) {
  if (v > kMaxCoordMagnitude || v < -kMaxCoordMagnitude)
    throw OverflowCoordinate("quantized coordinate magnitude exceeds 2^30");
  return int32_t(v);
}

}  // namespace

CoordMatrix quantizeMm(const PointMatrix& points, double precision) {
  if (points.rows() == 0) throw EmptyInput();
  if (!(precision > 0)) throw ShapeError("precision must be positive");
  CoordMatrix out(points.rows(), 3);
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (int a = 0; a < 3; ++a)
      out(i, a) = checkedCoord(roundHalfAwayFromZero(points(i, a) / precision));
  return out;
}

CoordMatrix quantizeDepth(const PointMatrix& points, int depth) {
  if (points.rows() == 0) throw EmptyInput();
  if (depth < 1 || depth > 30) throw ShapeError("octree depth out of range");
  const double qs = 2.0 / (std::pow(2.0, depth) - 1.0);
  double offset[3];
  for (int a = 0; a < 3; ++a) offset[a] = points.col(a).minCoeff();
  CoordMatrix out(points.rows(), 3);
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (int a = 0; a < 3; ++a)
      out(i, a) = checkedCoord(roundHalfAwayFromZero((points(i, a) - offset[a]) / qs));
  return out;
}

namespace {

// Scale, deduplicate and shift to non-negative coordinates; returns the
// canonical coded-scale coordinate set and the applied per-axis offset.
CoordMatrix prepareCoded(const CoordMatrix& points, const Rational& scale, int32_t offset[3]) {
  CoordMatrix scaled(points.rows(), 3);
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (int a = 0; a < 3; ++a)
      scaled(i, a) = checkedCoord(roundScaled(points(i, a), scale.num, scale.den));
  CoordMatrix coded = canonicalize(std::move(scaled), /*allow_duplicates=*/true);
  for (int a = 0; a < 3; ++a) offset[a] = coded.col(a).minCoeff();
  for (Eigen::Index i = 0; i < coded.rows(); ++i)
    for (int a = 0; a < 3; ++a) coded(i, a) -= offset[a];
  checkCoordRange(coded);
  return coded;
}

}  // namespace

EncodeResult encodePointCloud(const CoordMatrix& points, const CodecConfig& cfg,
                              const MopaWeights<float>& weights,
                              const std::array<uint8_t, 32>& model_hash) {
  if (points.rows() == 0) throw EmptyInput();
  if (cfg.scale.num == 0 || cfg.scale.den == 0)
    throw ShapeError("scaling factor must be positive");
  checkCoordRange(points);

  Bitstream bs;
  bs.scale_num = cfg.scale.num;
  bs.scale_den = cfg.scale.den;
  bs.model_hash = model_hash;
  bs.input_point_count = uint64_t(points.rows());

  CoordMatrix coded = prepareCoded(points, cfg.scale, bs.offset);
  bs.coded_point_count = uint64_t(coded.rows());

  // dyadic pyramid down to the raw-coded base scale
  std::vector<CoordMatrix> levels;
  levels.push_back(std::move(coded));
  while (levels.back().rows() > cfg.base_scale_threshold)
    levels.push_back(downscaleCoords(levels.back()));
  bs.scale_count = uint32_t(levels.size() - 1);
  bs.base_coords = levels.back();

  EncodeResult result;
  if (bs.scale_count > 0) {
    EncodingBitCoder coder;
    for (size_t t = levels.size() - 1; t > 0; --t) {
      const TransitionGeometry geom = buildTransitionGeometry(levels[t], weights.k);
      const CoordMap truth_set = buildCoordIndex(levels[t - 1]);
      const auto truth = [&](Eigen::Index row) {
        return truth_set.find(geom.cand.coords(row, 0), geom.cand.coords(row, 1),
                              geom.cand.coords(row, 2)) >= 0
                   ? 1
                   : 0;
      };
      const CodeScaleResult r = codeScale(geom, weights, coder, truth, cfg.force_uniform);
      result.symbols += r.symbols;
      result.ideal_bits += r.ideal_bits;
    }
    bs.payload = coder.encoder.finish();
  }
  result.bytes = bs.serialize();
  result.payload_bits = uint64_t(bs.payload.size()) * 8;
  result.bpp = double(result.payload_bits) / double(bs.input_point_count);
  return result;
}

DecodeResult decodePointCloud(const std::vector<uint8_t>& bytes,
                              const MopaWeights<float>& weights,
                              const std::array<uint8_t, 32>& model_hash, bool force_uniform) {
  const Bitstream bs = Bitstream::deserialize(bytes);
  if (bs.model_hash != model_hash)
    throw ModelMismatch("bitstream was produced with different model weights");

  CoordMatrix current = bs.base_coords;
  if (!isCanonical(current)) throw CorruptStream("base coordinates not in canonical order");

  if (bs.scale_count > 0) {
    if (current.rows() == 0) throw CorruptStream("empty base scale with coded transitions");
    DecodingBitCoder coder(bs.payload.data(), bs.payload.size());
    for (uint32_t t = 0; t < bs.scale_count; ++t) {
      const TransitionGeometry geom = buildTransitionGeometry(current, weights.k);
      const CodeScaleResult r = codeScale(geom, weights, coder, nullptr, force_uniform);
      current = r.child_coords;
    }
  }
  if (uint64_t(current.rows()) != bs.coded_point_count)
    throw CorruptStream("decoded point count does not match header");

  DecodeResult result;
  result.coded_coords = current;
  for (Eigen::Index i = 0; i < current.rows(); ++i)
    for (int a = 0; a < 3; ++a) result.coded_coords(i, a) += bs.offset[a];
  if (bs.scale_num == bs.scale_den) {
    result.reconstruction = result.coded_coords;
  } else {
    result.reconstruction.resize(current.rows(), 3);
    for (Eigen::Index i = 0; i < current.rows(); ++i)
      for (int a = 0; a < 3; ++a)
        result.reconstruction(i, a) =
            int32_t(roundScaled(result.coded_coords(i, a), bs.scale_den, bs.scale_num));
  }
  return result;
}

}  // namespace npcc
