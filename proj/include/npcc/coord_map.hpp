#pragma once

#include <cstdint>
#include <vector>

#include "npcc/types.hpp"

namespace npcc {

/// Open-addressing hash map from a voxel coordinate to a 32-bit payload
/// (point index, bucket index, ...). Linear probing, power-of-two capacity.
/// Keys are never removed; build once, query many times.
class CoordMap {
 public:
  static constexpr int64_t kEmpty = -1;

  CoordMap() { reserve(0); }

  explicit CoordMap(int64_t expected) { reserve(expected); }

  void reserve(int64_t expected) {
    int64_t cap = 16;
    while (cap < expected * 2) cap <<= 1;
    mask_ = cap - 1;
    keys_.assign(static_cast<size_t>(cap) * 3, 0);
    values_.assign(static_cast<size_t>(cap), kEmpty);
  }

  /// Inserts key -> value if absent; returns the stored value either way.
  int64_t insert(int32_t x, int32_t y, int32_t z, int32_t value) {
    size_t slot = probe(x, y, z);
    if (values_[slot] == kEmpty) {
      keys_[slot * 3 + 0] = x;
      keys_[slot * 3 + 1] = y;
      keys_[slot * 3 + 2] = z;
      values_[slot] = value;
      ++size_;
    }
    return values_[slot];
  }

  /// Returns the payload or kEmpty.
  int64_t find(int32_t x, int32_t y, int32_t z) const {
    return values_[probe(x, y, z)];
  }

  int64_t size() const { return size_; }

 private:
  size_t probe(int32_t x, int32_t y, int32_t z) const {
    size_t slot = hash(x, y, z) & static_cast<size_t>(mask_);
    while (values_[slot] != kEmpty) {
      const int32_t* k = &keys_[slot * 3];
      if (k[0] == x && k[1] == y && k[2] == z) return slot;
      slot = (slot + 1) & static_cast<size_t>(mask_);
    }
    return slot;
  }

  static size_t hash(int32_t x, int32_t y, int32_t z) {
    uint64_t h = static_cast<uint32_t>(x) * 0x9e3779b185ebca87ULL;
    h ^= static_cast<uint32_t>(y) * 0xc2b2ae3d27d4eb4fULL;
    h ^= static_cast<uint32_t>(z) * 0x165667b19e3779f9ULL;
    h ^= h >> 29;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 32;
    return static_cast<size_t>(h);
  }

  std::vector<int32_t> keys_;
  std::vector<int64_t> values_;
  int64_t mask_ = 15;
  int64_t size_ = 0;
};

/// Builds a map from every coordinate row to its row index.
inline CoordMap buildCoordIndex(const CoordMatrix& coords) {
  CoordMap map(coords.rows());
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    map.insert(coords(i, 0), coords(i, 1), coords(i, 2), static_cast<int32_t>(i));
  return map;
}

}  // namespace npcc
