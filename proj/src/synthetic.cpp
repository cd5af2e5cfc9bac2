#include <cmath>
#include <vector>

#include "npcc/sparse_tensor.hpp"
#include "npcc/synthetic.hpp"

namespace npcc {

namespace {

constexpr double kTau = 6.283185307179586;

void pushVoxel(std::vector<int32_t>& coords, double x, double y, double z, int32_t extent) {
  const auto clampAxis = [&](double v) {
    int64_t c = int64_t(std::floor(v));
    if (c < 0) c = 0;
    if (c >= extent) c = extent - 1;
    return int32_t(c);
  };
  coords.push_back(clampAxis(x));
  coords.push_back(clampAxis(y));
  coords.push_back(clampAxis(z));
}

CoordMatrix toMatrix(const std::vector<int32_t>& flat) {
  CoordMatrix m(Eigen::Index(flat.size() / 3), 3);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (int a = 0; a < 3; ++a) m(i, a) = flat[size_t(3 * i + a)];
  return canonicalize(std::move(m), /*allow_duplicates=*/true);
}

Eigen::RowVector3d randomUnit(Rng& rng) {
  while (true) {
    Eigen::RowVector3d v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double n = v.norm();
    if (n > 1e-3 && n <= 1.0) return v / n;
  }
}

void addPlane(Rng& rng, std::vector<int32_t>& out, Eigen::Index target, int32_t extent) {
  const Eigen::RowVector3d n = randomUnit(rng);
  Eigen::RowVector3d e1 = n.cross(Eigen::RowVector3d(0.0, 0.0, 1.0));
  if (e1.norm() < 1e-3) e1 = n.cross(Eigen::RowVector3d(0.0, 1.0, 0.0));
  e1.normalize();
  const Eigen::RowVector3d e2 = n.cross(e1);
  const Eigen::RowVector3d center(rng.uniform(0.25, 0.75) * extent,
                                  rng.uniform(0.25, 0.75) * extent,
                                  rng.uniform(0.25, 0.75) * extent);
  // unit parameter steps give a surface-dense voxelization
  const double half = std::sqrt(double(target)) * 0.75;
  for (double u = -half; u <= half; u += 1.0)
    for (double v = -half; v <= half; v += 1.0) {
      const Eigen::RowVector3d p = center + u * e1 + v * e2;
      pushVoxel(out, p(0), p(1), p(2), extent);
    }
}

void addLines(Rng& rng, std::vector<int32_t>& out, Eigen::Index target, int32_t extent) {
  const int segments = 3 + int(rng.below(5));
  const double per = double(target) / segments;
  for (int s = 0; s < segments; ++s) {
    const Eigen::RowVector3d dir = randomUnit(rng);
    const Eigen::RowVector3d start(rng.uniform(0.1, 0.9) * extent, rng.uniform(0.1, 0.9) * extent,
                                   rng.uniform(0.1, 0.9) * extent);
    for (double t = 0; t < per; t += 0.5) {
      const Eigen::RowVector3d p = start + t * dir;
      pushVoxel(out, p(0), p(1), p(2), extent);
    }
  }
}

void addLissajous(Rng& rng, std::vector<int32_t>& out, Eigen::Index target, int32_t extent) {
  const double ax = 1 + double(rng.below(3)), bx = 1 + double(rng.below(3));
  const double ay = 1 + double(rng.below(3)), by = 1 + double(rng.below(3));
  const double az = 1 + double(rng.below(2)), bz = 1 + double(rng.below(3));
  const double px = rng.uniform(0, kTau), py = rng.uniform(0, kTau), pz = rng.uniform(0, kTau);
  const double amp = 0.42 * extent, mid = 0.5 * extent;
  // parameter step chosen so adjacent samples land on adjacent voxels
  const Eigen::Index steps = Eigen::Index(std::sqrt(double(target)) * 2.2) + 8;
  for (Eigen::Index iu = 0; iu < steps; ++iu)
    for (Eigen::Index iv = 0; iv < steps; ++iv) {
      const double u = kTau * double(iu) / double(steps);
      const double v = kTau * double(iv) / double(steps);
      const double x = mid + amp * std::sin(ax * u + bx * v + px);
      const double y = mid + amp * std::sin(ay * u + by * v + py);
      const double z = mid + amp * std::sin(az * u + bz * v + pz);
      pushVoxel(out, x, y, z, extent);
    }
}

}  // namespace

CoordMatrix synthesizeCloud(Rng& rng, CloudFamily family, Eigen::Index target_points,
                            int32_t extent) {
  std::vector<int32_t> flat;
  flat.reserve(size_t(target_points) * 4);
  switch (family) {
    case CloudFamily::Plane:
      addPlane(rng, flat, target_points, extent);
      break;
    case CloudFamily::Lines:
      addLines(rng, flat, target_points, extent);
      break;
    case CloudFamily::Lissajous:
      addLissajous(rng, flat, target_points, extent);
      break;
    case CloudFamily::Mixed:
      addLissajous(rng, flat, target_points / 2, extent);
      addPlane(rng, flat, target_points / 3, extent);
      addLines(rng, flat, target_points / 6, extent);
      break;
  }
  CoordMatrix all = toMatrix(flat);
  if (all.rows() <= target_points) return all;
  // subsample deterministically, then restore canonical order
  std::vector<int32_t> pick(size_t(all.rows()));
  for (size_t i = 0; i < pick.size(); ++i) pick[i] = int32_t(i);
  for (size_t i = pick.size() - 1; i > 0; --i)
    std::swap(pick[i], pick[size_t(rng.below(uint64_t(i) + 1))]);
  CoordMatrix sampled(target_points, 3);
  for (Eigen::Index i = 0; i < target_points; ++i)
    sampled.row(i) = all.row(pick[size_t(i)]);
  return canonicalize(std::move(sampled), /*allow_duplicates=*/true);
}

CoordMatrix uniformCloud(Rng& rng, Eigen::Index count, int32_t extent) {
  CoordMatrix m(count, 3);
  for (Eigen::Index i = 0; i < count; ++i)
    for (int a = 0; a < 3; ++a) m(i, a) = int32_t(rng.below(uint64_t(extent)));
  return canonicalize(std::move(m), /*allow_duplicates=*/true);
}

}  // namespace npcc
