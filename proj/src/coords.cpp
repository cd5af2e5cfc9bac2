#include <algorithm>
#include <vector>

#include "npcc/sparse_tensor.hpp"

namespace npcc {

namespace {

// floor(c / 2) for signed c; arithmetic shift floors.
inline int32_t half(int32_t c) { return c >> 1; }

}  // namespace

void checkCoordRange(const CoordMatrix& coords) {
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    for (int a = 0; a < 3; ++a)
      if (coords(i, a) > kMaxCoordMagnitude || coords(i, a) < -kMaxCoordMagnitude)
        throw OverflowCoordinate("voxel coordinate magnitude exceeds 2^30");
}

bool isCanonical(const CoordMatrix& coords) {
  for (Eigen::Index i = 1; i < coords.rows(); ++i)
    if (!coordLess(coords.row(i - 1).data(), coords.row(i).data())) return false;
  return true;
}

CoordMatrix canonicalize(CoordMatrix coords, bool allow_duplicates) {
  checkCoordRange(coords);
  const Eigen::Index n = coords.rows();
  std::vector<int32_t> order(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = static_cast<int32_t>(i);
  std::sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
    return coordLess(coords.row(a).data(), coords.row(b).data());
  });
  CoordMatrix sorted(n, 3);
  Eigen::Index m = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = coords.row(order[static_cast<size_t>(i)]);
    if (m > 0 && sorted.row(m - 1) == row) {
      if (!allow_duplicates) throw DuplicateCoordinate("duplicate voxel coordinate");
      continue;
    }
    sorted.row(m++) = row;
  }
  sorted.conservativeResize(m, 3);
  return sorted;
}

CoordMatrix downscaleCoords(const CoordMatrix& coords) {
  CoordMatrix parents(coords.rows(), 3);
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    parents(i, 0) = half(coords(i, 0));
    parents(i, 1) = half(coords(i, 1));
    parents(i, 2) = half(coords(i, 2));
  }
  return canonicalize(std::move(parents), /*allow_duplicates=*/true);
}

OctantChildren expandOctantCoords(const CoordMatrix& coords) {
  const Eigen::Index n = coords.rows();
  OctantChildren out;
  out.coords.resize(8 * n, 3);
  out.octant.resize(8 * n);
  out.parent.resize(8 * n);

  // Children of distinct parents never collide, so sorting is the only work.
  struct Child {
    int32_t c[3];
    int32_t octant;
    int32_t parent;
  };
  std::vector<Child> children(static_cast<size_t>(8 * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int o = 0; o < 8; ++o) {
      Child& ch = children[static_cast<size_t>(8 * i + o)];
      ch.c[0] = 2 * coords(i, 0) + (o & 1);
      ch.c[1] = 2 * coords(i, 1) + ((o >> 1) & 1);
      ch.c[2] = 2 * coords(i, 2) + ((o >> 2) & 1);
      ch.octant = o;
      ch.parent = static_cast<int32_t>(i);
    }
  }
  std::sort(children.begin(), children.end(),
            [](const Child& a, const Child& b) { return coordLess(a.c, b.c); });
  for (Eigen::Index i = 0; i < 8 * n; ++i) {
    const Child& ch = children[static_cast<size_t>(i)];
    out.coords(i, 0) = ch.c[0];
    out.coords(i, 1) = ch.c[1];
    out.coords(i, 2) = ch.c[2];
    out.octant(i) = ch.octant;
    out.parent(i) = ch.parent;
  }
  return out;
}

}  // namespace npcc
