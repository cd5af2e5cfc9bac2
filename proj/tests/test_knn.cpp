#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "npcc/knn.hpp"
#include "npcc/rng.hpp"
#include "npcc/sparse_tensor.hpp"
#include "npcc/synthetic.hpp"
#include "oracles.hpp"

using namespace npcc;

namespace {

CoordMatrix coordsOf(std::initializer_list<std::array<int32_t, 3>> rows) {
  CoordMatrix m(Eigen::Index(rows.size()), 3);
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    m.row(i++) << r[0], r[1], r[2];
  }
  return m;
}

void checkAgainstBrute(const CoordMatrix& coords, int k) {
  const Neighborhood nbh = knnSearch(coords, k);
  const auto brute = oracle::bruteKnn(coords, k);
  REQUIRE(nbh.query_count == coords.rows());
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    REQUIRE(size_t(nbh.valid_per_row) == brute[size_t(i)].size());
    for (int j = 0; j < nbh.valid_per_row; ++j) {
      CHECK(nbh.indices(i, j) == brute[size_t(i)][size_t(j)]);
      CHECK(nbh.valid_mask(i, j) == 1);
      for (int a = 0; a < 3; ++a)
        CHECK(nbh.rel(i, j)[a] == coords(nbh.indices(i, j), a) - coords(i, a));
    }
    for (int j = nbh.valid_per_row; j < k; ++j) CHECK(nbh.valid_mask(i, j) == 0);
  }
}

}  // namespace

TEST_CASE("single point: one valid self neighbor, rest masked") {
  const CoordMatrix coords = coordsOf({{5, 5, 5}});
  const Neighborhood nbh = knnSearch(coords, 4);
  CHECK(nbh.valid_per_row == 1);
  CHECK(nbh.indices(0, 0) == 0);
  CHECK(nbh.valid_mask(0, 0) == 1);
  CHECK(nbh.valid_mask(0, 1) == 0);
  CHECK(nbh.rel(0, 0)[0] == 0);
}

TEST_CASE("collinear points order by distance with self first") {
  const CoordMatrix coords = coordsOf({{0, 0, 0}, {2, 0, 0}, {5, 0, 0}});
  const Neighborhood nbh = knnSearch(coords, 2);
  CHECK(nbh.indices(0, 0) == 0);  // itself, distance 0
  CHECK(nbh.indices(0, 1) == 1);  // distance 2 beats distance 5
}

TEST_CASE("exact distance ties break lexicographically") {
  // (1,0,0) and (0,1,0) are both at distance 1 from the origin
  const CoordMatrix coords = canonicalize(coordsOf({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}), false);
  const Neighborhood nbh = knnSearch(coords, 3);
  Eigen::Index origin = -1;
  for (Eigen::Index i = 0; i < 3; ++i)
    if (coords(i, 0) == 0 && coords(i, 1) == 0 && coords(i, 2) == 0) origin = i;
  REQUIRE(origin >= 0);
  // after self, (0,1,0) precedes (1,0,0) lexicographically
  CHECK(coords(nbh.indices(origin, 1), 0) == 0);
  CHECK(coords(nbh.indices(origin, 1), 1) == 1);
  CHECK(coords(nbh.indices(origin, 2), 0) == 1);
}

TEST_CASE("500 random points match the exhaustive oracle at k=16") {
  Rng rng(42);
  const CoordMatrix coords = uniformCloud(rng, 500, 48);
  checkAgainstBrute(coords, 16);
}

TEST_CASE("grid path matches the oracle on larger clouds") {
  Rng rng(43);
  checkAgainstBrute(uniformCloud(rng, 1500, 64), 8);
  checkAgainstBrute(uniformCloud(rng, 2000, 512), 16);
  Rng rng2(44);
  checkAgainstBrute(synthesizeCloud(rng2, CloudFamily::Lissajous, 1800, 128), 16);
}

TEST_CASE("clustered geometry with far outliers stays exact") {
  Rng rng(45);
  CoordMatrix dense = uniformCloud(rng, 400, 12);
  CoordMatrix far(3, 3);
  far << 5000, 5000, 5000, -4000, 2000, 1000, 0, -3000, 4000;
  CoordMatrix all(dense.rows() + 3, 3);
  all << dense, far;
  checkAgainstBrute(canonicalize(all, true), 5);
}

TEST_CASE("k >= N returns every point for every query") {
  Rng rng(46);
  const CoordMatrix coords = uniformCloud(rng, 60, 16);
  const Neighborhood nbh = knnSearch(coords, int(coords.rows()) + 10);
  CHECK(nbh.valid_per_row == coords.rows());
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    std::set<int32_t> seen;
    for (int j = 0; j < nbh.valid_per_row; ++j) seen.insert(nbh.indices(i, j));
    CHECK(seen.size() == size_t(coords.rows()));
  }
}

TEST_CASE("knn is invariant to input permutation after canonicalization") {
  Rng rng(47);
  CoordMatrix coords = uniformCloud(rng, 300, 32);
  const Neighborhood a = knnSearch(coords, 7);
  // shuffle rows then re-canonicalize; identical tensor, identical result
  CoordMatrix shuffled = coords;
  for (Eigen::Index i = coords.rows() - 1; i > 0; --i) {
    const Eigen::Index j = Eigen::Index(rng.below(uint64_t(i) + 1));
    shuffled.row(i).swap(shuffled.row(j));
  }
  const Neighborhood b = knnSearch(canonicalize(shuffled, false), 7);
  CHECK(a.indices == b.indices);
  CHECK(a.rel_offsets == b.rel_offsets);
}

TEST_CASE("neighborhood_33 offset map") {
  SUBCASE("isolated point sees only the center offset") {
    const OffsetMap map = buildOffsetMap(coordsOf({{9, 9, 9}}));
    REQUIRE(map.count(0) == 1);
    CHECK(map.slice[0] == 13);  // (0,0,0)
    CHECK(map.neighbor[0] == 0);
  }
  SUBCASE("full 3x3x3 cube: center sees all 27 offsets") {
    std::vector<std::array<int32_t, 3>> rows;
    for (int z = 0; z < 3; ++z)
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) rows.push_back({x, y, z});
    CoordMatrix coords(27, 3);
    for (size_t i = 0; i < rows.size(); ++i)
      coords.row(Eigen::Index(i)) << rows[i][0], rows[i][1], rows[i][2];
    coords = canonicalize(coords, false);
    const OffsetMap map = buildOffsetMap(coords);
    Eigen::Index center = -1;
    for (Eigen::Index i = 0; i < 27; ++i)
      if (coords(i, 0) == 1 && coords(i, 1) == 1 && coords(i, 2) == 1) center = i;
    CHECK(map.count(center) == 27);
  }
  SUBCASE("random occupancy matches a dense boolean-grid oracle") {
    Rng rng(48);
    const CoordMatrix coords = uniformCloud(rng, 410, 16);  // ~10% of 16^3
    bool grid[16][16][16] = {};
    for (Eigen::Index i = 0; i < coords.rows(); ++i)
      grid[coords(i, 0)][coords(i, 1)][coords(i, 2)] = true;
    const OffsetMap map = buildOffsetMap(coords);
    for (Eigen::Index i = 0; i < coords.rows(); ++i) {
      int expected = 0;
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int x = coords(i, 0) + dx, y = coords(i, 1) + dy, z = coords(i, 2) + dz;
            if (x >= 0 && x < 16 && y >= 0 && y < 16 && z >= 0 && z < 16 && grid[x][y][z])
              ++expected;
          }
      CHECK(map.count(i) == expected);
      // entries are ordered by slice and carry the offset arithmetic
      for (int32_t e = map.begin[size_t(i)]; e < map.begin[size_t(i) + 1]; ++e) {
        int32_t d[3];
        sliceToOffset(map.slice[size_t(e)], d);
        const int32_t j = map.neighbor[size_t(e)];
        for (int a = 0; a < 3; ++a) CHECK(coords(j, a) == coords(i, a) + d[a]);
      }
    }
  }
}
