#pragma once

#include <string>
#include <vector>

#include "npcc/types.hpp"

namespace npcc {

struct RdPoint {
  double bpp = 0;
  double psnr_d1 = 0;
  double psnr_d2 = 0;
};

/// Rate-distortion curve; bd-rate requires at least four points with
/// strictly increasing bpp.
struct RdCurve {
  std::vector<RdPoint> points;
};

enum class RdChannel { D1, D2 };

/// Point-to-point PSNR, MPEG convention: symmetric max of the two mean
/// squared nearest-neighbor distances, PSNR = 10 log10(3 peak^2 / MSE).
/// Identical clouds give +infinity.
double d1Psnr(const PointMatrix& ref, const PointMatrix& rec, double peak);

/// Point-to-plane PSNR. Per-point error is the displacement projected onto
/// the reference point's PCA normal (normal_k reference neighbors);
/// degenerate neighborhoods fall back to the point-to-point distance.
double d2Psnr(const PointMatrix& ref, const PointMatrix& rec, double peak, int normal_k = 9);

/// Bjontegaard delta rate in percent: cubic least-squares fit of
/// log10(rate) against PSNR per curve, averaged difference over the
/// overlapping PSNR interval.
double bdRate(const RdCurve& anchor, const RdCurve& test, RdChannel channel);

RdCurve readRdCurveCsv(const std::string& path);
void writeRdCurveCsv(const std::string& path, const RdCurve& curve);

/// Minimal standalone SVG rate-distortion plot (one polyline per curve).
void writeRdSvg(const std::string& path, const std::vector<RdCurve>& curves,
                const std::vector<std::string>& labels, RdChannel channel);

}  // namespace npcc
