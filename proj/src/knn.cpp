#include <algorithm>
#include <cmath>
#include <vector>

#include "npcc/coord_map.hpp"
#include "npcc/errors.hpp"
#include "npcc/knn.hpp"

namespace npcc {

namespace {

using DistIdx = std::pair<uint64_t, int32_t>;

inline uint64_t sqDist(const int32_t* a, const int32_t* b) {
  const int64_t dx = int64_t(a[0]) - b[0];
  const int64_t dy = int64_t(a[1]) - b[1];
  const int64_t dz = int64_t(a[2]) - b[2];
  return uint64_t(dx * dx) + uint64_t(dy * dy) + uint64_t(dz * dz);
}

// Bounded max-heap over (squared distance, index) pairs; the pair order is
// also the tie-breaking rule, since index order equals lexicographic
// coordinate order in a canonical tensor.
class BestK {
 public:
  explicit BestK(size_t cap) : cap_(cap) { heap_.reserve(cap); }

  void offer(uint64_t d2, int32_t idx) {
    DistIdx e{d2, idx};
    if (heap_.size() < cap_) {
      heap_.push_back(e);
      std::push_heap(heap_.begin(), heap_.end());
    } else if (e < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = e;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  bool full() const { return heap_.size() == cap_; }
  uint64_t worst() const { return heap_.front().first; }

  std::vector<DistIdx> sorted() {
    std::sort(heap_.begin(), heap_.end());
    return std::move(heap_);
  }

 private:
  size_t cap_;
  std::vector<DistIdx> heap_;
};

struct Grid {
  CoordMap cell_of;            // cell coord -> bucket id
  std::vector<int32_t> start;  // bucket id -> CSR start
  std::vector<int32_t> items;  // point indices grouped by bucket
  int shift = 0;
  int32_t origin[3];           // world coordinate of cell (0,0,0)
  int32_t lo[3], hi[3];        // occupied cell bounds
};

Grid buildGrid(const CoordMatrix& coords) {
  const Eigen::Index n = coords.rows();
  Grid g;
  int32_t lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    lo[a] = coords.col(a).minCoeff();
    hi[a] = coords.col(a).maxCoeff();
    g.origin[a] = lo[a];
  }
  double volume = 1.0;
  for (int a = 0; a < 3; ++a) volume *= double(hi[a]) - lo[a] + 1.0;
  const double edge = std::cbrt(volume / std::max(1.0, double(n) / 2.0));
  g.shift = std::clamp(int(std::lround(std::log2(std::max(1.0, edge)))), 0, 30);

  const auto cellCoord = [&](Eigen::Index i, int a) {
    return int32_t((int64_t(coords(i, a)) - lo[a]) >> g.shift);
  };
  std::vector<int32_t> bucket(static_cast<size_t>(n));
  std::vector<int32_t> counts;
  g.cell_of.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int32_t cx = cellCoord(i, 0), cy = cellCoord(i, 1), cz = cellCoord(i, 2);
    int64_t b = g.cell_of.insert(cx, cy, cz, int32_t(counts.size()));
    if (b == int64_t(counts.size())) counts.push_back(0);
    bucket[size_t(i)] = int32_t(b);
    ++counts[size_t(b)];
  }
  g.start.assign(counts.size() + 1, 0);
  for (size_t b = 0; b < counts.size(); ++b) g.start[b + 1] = g.start[b] + counts[b];
  g.items.resize(size_t(n));
  std::vector<int32_t> cursor(g.start.begin(), g.start.end() - 1);
  for (Eigen::Index i = 0; i < n; ++i)
    g.items[size_t(cursor[size_t(bucket[size_t(i)])]++)] = int32_t(i);
  for (int a = 0; a < 3; ++a) {
    g.lo[a] = 0;
    g.hi[a] = int32_t((int64_t(hi[a]) - lo[a]) >> g.shift);
  }
  return g;
}

void scanBucket(const Grid& g, const CoordMatrix& coords, const int32_t* q,
                int32_t cx, int32_t cy, int32_t cz, BestK& best) {
  const int64_t b = g.cell_of.find(cx, cy, cz);
  if (b < 0) return;
  for (int32_t s = g.start[size_t(b)]; s < g.start[size_t(b) + 1]; ++s) {
    const int32_t j = g.items[size_t(s)];
    best.offer(sqDist(q, coords.row(j).data()), j);
  }
}

void gridQuery(const Grid& g, const CoordMatrix& coords, Eigen::Index qi,
               size_t cap, std::vector<DistIdx>& out) {
  const int32_t* q = coords.row(qi).data();
  int32_t qc[3];
  for (int a = 0; a < 3; ++a)
    qc[a] = int32_t((int64_t(q[a]) - g.origin[a]) >> g.shift);
  int32_t max_r = 0;
  for (int a = 0; a < 3; ++a)
    max_r = std::max({max_r, qc[a] - g.lo[a], g.hi[a] - qc[a]});

  BestK best(cap);
  for (int32_t r = 0; r <= max_r; ++r) {
    if (r >= 1 && best.full()) {
      const uint64_t gap = (uint64_t(r - 1) << g.shift) + 1;
      if (gap * gap > best.worst()) break;
    }
    if (r == 0) {
      scanBucket(g, coords, q, qc[0], qc[1], qc[2], best);
      continue;
    }
    const int32_t x0 = std::max(qc[0] - r, g.lo[0]), x1 = std::min(qc[0] + r, g.hi[0]);
    const int32_t y0 = std::max(qc[1] - r, g.lo[1]), y1 = std::min(qc[1] + r, g.hi[1]);
    const int32_t z0 = std::max(qc[2] - r, g.lo[2]), z1 = std::min(qc[2] + r, g.hi[2]);
    for (int sx = -1; sx <= 1; sx += 2) {  // two x faces, full y/z extent
      const int32_t x = qc[0] + sx * r;
      if (x < g.lo[0] || x > g.hi[0]) continue;
      for (int32_t y = y0; y <= y1; ++y)
        for (int32_t z = z0; z <= z1; ++z) scanBucket(g, coords, q, x, y, z, best);
    }
    const int32_t xi0 = std::max(qc[0] - r + 1, g.lo[0]), xi1 = std::min(qc[0] + r - 1, g.hi[0]);
    for (int sy = -1; sy <= 1; sy += 2) {  // two y faces, x interior
      const int32_t y = qc[1] + sy * r;
      if (y < g.lo[1] || y > g.hi[1]) continue;
      for (int32_t x = xi0; x <= xi1; ++x)
        for (int32_t z = z0; z <= z1; ++z) scanBucket(g, coords, q, x, y, z, best);
    }
    const int32_t yi0 = std::max(qc[1] - r + 1, g.lo[1]), yi1 = std::min(qc[1] + r - 1, g.hi[1]);
    for (int sz = -1; sz <= 1; sz += 2) {  // two z faces, x and y interior
      const int32_t z = qc[2] + sz * r;
      if (z < g.lo[2] || z > g.hi[2]) continue;
      for (int32_t x = xi0; x <= xi1; ++x)
        for (int32_t y = yi0; y <= yi1; ++y) scanBucket(g, coords, q, x, y, z, best);
    }
  }
  out = best.sorted();
}

}  // namespace

Neighborhood knnSearch(const CoordMatrix& coords, int k) {
  if (k < 1) throw ShapeError("kNN requires k >= 1");
  const Eigen::Index n = coords.rows();
  Neighborhood nbh;
  nbh.query_count = int32_t(n);
  nbh.k = k;
  nbh.valid_per_row = int32_t(std::min<Eigen::Index>(n, k));
  nbh.indices.setConstant(n, k, 0);
  nbh.rel_offsets.setZero(n, 3 * k);
  nbh.valid_mask.setZero(n, k);
  if (n == 0) return nbh;

  const size_t cap = size_t(nbh.valid_per_row);
  const bool exhaustive = n <= 256 || n <= Eigen::Index(k);

  Grid grid;
  if (!exhaustive) grid = buildGrid(coords);

  std::vector<DistIdx> found;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (exhaustive) {
      found.clear();
      found.reserve(size_t(n));
      for (Eigen::Index j = 0; j < n; ++j)
        found.emplace_back(sqDist(coords.row(i).data(), coords.row(j).data()), int32_t(j));
      std::sort(found.begin(), found.end());
      found.resize(cap);
    } else {
      gridQuery(grid, coords, i, cap, found);
    }
    for (size_t j = 0; j < cap; ++j) {
      const int32_t idx = found[j].second;
      nbh.indices(i, Eigen::Index(j)) = idx;
      nbh.valid_mask(i, Eigen::Index(j)) = 1;
      for (int a = 0; a < 3; ++a)
        nbh.rel_offsets(i, Eigen::Index(3 * j + size_t(a))) = coords(idx, a) - coords(i, a);
    }
  }
  return nbh;
}

OffsetMap buildOffsetMap(const CoordMatrix& coords) {
  const Eigen::Index n = coords.rows();
  const CoordMap index = buildCoordIndex(coords);
  OffsetMap map;
  map.begin.assign(size_t(n) + 1, 0);
  map.neighbor.reserve(size_t(n) * 8);
  map.slice.reserve(size_t(n) * 8);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int s = 0; s < 27; ++s) {
      int32_t d[3];
      sliceToOffset(s, d);
      const int64_t j = index.find(coords(i, 0) + d[0], coords(i, 1) + d[1], coords(i, 2) + d[2]);
      if (j >= 0) {
        map.neighbor.push_back(int32_t(j));
        map.slice.push_back(int8_t(s));
      }
    }
    map.begin[size_t(i) + 1] = int32_t(map.neighbor.size());
  }
  return map;
}

}  // namespace npcc
