#pragma once

#include "npcc/rng.hpp"
#include "npcc/types.hpp"

namespace npcc {

enum class CloudFamily {
  Plane,      // random oriented planar patch
  Lines,      // bundle of straight segments
  Lissajous,  // folded parametric sheet
  Mixed,      // union of the above
};

/// Voxelized synthetic cloud of roughly target_points unique voxels inside
/// [0, extent)^3. Deterministic in the generator state.
CoordMatrix synthesizeCloud(Rng& rng, CloudFamily family, Eigen::Index target_points,
                            int32_t extent);

/// Uniform random voxels, deduplicated (may return slightly fewer rows).
CoordMatrix uniformCloud(Rng& rng, Eigen::Index count, int32_t extent);

}  // namespace npcc
