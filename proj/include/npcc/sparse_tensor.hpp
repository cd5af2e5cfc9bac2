#pragma once

#include <utility>

#include "npcc/errors.hpp"
#include "npcc/types.hpp"

namespace npcc {

// Coordinate-level building blocks (implemented in src/coords.cpp). All of
// them keep or re-establish the canonical lexicographic (x, y, z) order.
CoordMatrix canonicalize(CoordMatrix coords, bool allow_duplicates);
bool isCanonical(const CoordMatrix& coords);
CoordMatrix downscaleCoords(const CoordMatrix& coords);
void checkCoordRange(const CoordMatrix& coords);

struct OctantChildren {
  CoordMatrix coords;      // 8N children, canonical order
  IndexVector octant;      // ox + 2*oy + 4*oz per child
  IndexVector parent;      // row into the parent tensor
};
OctantChildren expandOctantCoords(const CoordMatrix& coords);

/// Set of occupied voxels with per-voxel features. Rows of `coords` are
/// unique and sorted lexicographically by (x, y, z); `feats` rows follow the
/// same order. Immutable by convention once built.
template <typename Scalar>
struct SparseTensor {
  CoordMatrix coords;
  FeatureMatrix<Scalar> feats;
  int scale_level = 0;

  Eigen::Index size() const { return coords.rows(); }
  Eigen::Index featureDim() const { return feats.cols(); }
};

/// Sorts rows into canonical order, carrying features along. Throws
/// DuplicateCoordinate when two rows share a coordinate.
template <typename Scalar>
SparseTensor<Scalar> makeCanonical(const CoordMatrix& coords,
                                   const FeatureMatrix<Scalar>& feats,
                                   int scale_level = 0) {
  if (feats.rows() != coords.rows())
    throw ShapeError("feature row count does not match coordinate count");
  checkCoordRange(coords);
  std::vector<int32_t> order(static_cast<size_t>(coords.rows()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int32_t>(i);
  std::sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
    return coordLess(coords.row(a).data(), coords.row(b).data());
  });
  SparseTensor<Scalar> out;
  out.coords.resize(coords.rows(), 3);
  out.feats.resize(feats.rows(), feats.cols());
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    out.coords.row(i) = coords.row(order[static_cast<size_t>(i)]);
    out.feats.row(i) = feats.row(order[static_cast<size_t>(i)]);
    if (i > 0 && out.coords.row(i) == out.coords.row(i - 1))
      throw DuplicateCoordinate("duplicate voxel coordinate in tensor input");
  }
  out.scale_level = scale_level;
  return out;
}

/// Canonical tensor with all-ones occupancy features (dimension 1).
/// Duplicate input coordinates are merged.
template <typename Scalar>
SparseTensor<Scalar> occupancyTensor(const CoordMatrix& coords, int scale_level = 0) {
  SparseTensor<Scalar> out;
  out.coords = canonicalize(coords, /*allow_duplicates=*/true);
  out.feats = FeatureMatrix<Scalar>::Ones(out.coords.rows(), 1);
  out.scale_level = scale_level;
  return out;
}

/// Dyadic downscale: floor(c / 2) per axis, deduplicated. Output features
/// are the all-ones occupancy indicator.
template <typename Scalar>
SparseTensor<Scalar> downscale(const SparseTensor<Scalar>& t) {
  if (t.size() == 0) throw EmptyTensor();
  SparseTensor<Scalar> out;
  out.coords = downscaleCoords(t.coords);
  out.feats = FeatureMatrix<Scalar>::Ones(out.coords.rows(), 1);
  out.scale_level = t.scale_level + 1;
  return out;
}

template <typename Scalar>
struct OctantExpansion {
  SparseTensor<Scalar> tensor;  // 8N children, parent features copied
  IndexVector octant;
  IndexVector parent;
};

/// Expands every voxel into its eight children 2c + o, o in {0,1}^3. Each
/// child carries its parent's feature row and an octant index ox+2*oy+4*oz.
template <typename Scalar>
OctantExpansion<Scalar> expandOctants(const SparseTensor<Scalar>& t) {
  if (t.size() == 0) throw EmptyTensor();
  OctantChildren children = expandOctantCoords(t.coords);
  OctantExpansion<Scalar> out;
  out.tensor.coords = std::move(children.coords);
  out.tensor.scale_level = t.scale_level - 1;
  out.octant = std::move(children.octant);
  out.parent = std::move(children.parent);
  out.tensor.feats.resize(out.tensor.coords.rows(), t.feats.cols());
  for (Eigen::Index i = 0; i < out.tensor.coords.rows(); ++i)
    out.tensor.feats.row(i) = t.feats.row(out.parent(i));
  return out;
}

}  // namespace npcc
