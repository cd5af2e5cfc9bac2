#pragma once

#include <cstdint>
#include <vector>

#include "npcc/types.hpp"

namespace npcc {

/// kNN table over a canonical coordinate set. Row i lists the indices of the
/// k nearest points to point i (the point itself included at distance 0),
/// sorted by squared Euclidean distance with lexicographic-coordinate
/// tie-breaking. When fewer than k points exist, trailing entries are
/// masked invalid.
struct Neighborhood {
  int32_t query_count = 0;
  int32_t k = 0;
  Eigen::Matrix<int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> indices;     // N x k
  Eigen::Matrix<int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rel_offsets; // N x 3k
  Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> valid_mask;  // N x k
  int32_t valid_per_row = 0;  // min(N, k); valid entries lead each row

  const int32_t* rel(Eigen::Index i, int j) const { return rel_offsets.row(i).data() + 3 * j; }
};

/// Exact k nearest neighbors under squared Euclidean distance (integer
/// arithmetic). Grid-bucket search with an expanding shell; exhaustive scan
/// for small inputs. Deterministic for any input order of equal sets.
Neighborhood knnSearch(const CoordMatrix& coords, int k);

/// Occupied 3x3x3 offsets per point, CSR layout. Slice index encodes the
/// offset lexicographically over (dz, dy, dx): slice = (dz+1)*9+(dy+1)*3+(dx+1).
struct OffsetMap {
  std::vector<int32_t> begin;      // N+1 prefix offsets
  std::vector<int32_t> neighbor;   // point index of the occupied neighbor
  std::vector<int8_t> slice;       // kernel slice 0..26

  int32_t count(Eigen::Index i) const { return begin[i + 1] - begin[i]; }
};

OffsetMap buildOffsetMap(const CoordMatrix& coords);

inline void sliceToOffset(int s, int32_t* d) {
  d[2] = s / 9 - 1;        // dz
  d[1] = (s / 3) % 3 - 1;  // dy
  d[0] = s % 3 - 1;        // dx
}

}  // namespace npcc
