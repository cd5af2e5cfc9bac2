#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace npcc {

/// Voxel coordinates are signed 32-bit; |c| must stay below 2^30 so that the
/// doubling in octant expansion can never overflow.
constexpr int32_t kMaxCoordMagnitude = 1 << 30;

/// One row per point, columns x, y, z.
using CoordMatrix = Eigen::Matrix<int32_t, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Coord = Eigen::RowVector3i;

/// Per-point features, one row per point.
template <typename Scalar>
using FeatureMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using IndexVector = Eigen::Matrix<int32_t, Eigen::Dynamic, 1>;

/// Real-valued point positions (pre-quantization I/O).
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

inline bool coordLess(const int32_t* a, const int32_t* b) {
  if (a[0] != b[0]) return a[0] < b[0];
  if (a[1] != b[1]) return a[1] < b[1];
  return a[2] < b[2];
}

}  // namespace npcc
