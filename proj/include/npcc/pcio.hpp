#pragma once

#include <string>

#include "npcc/types.hpp"

namespace npcc {

struct RawCloud {
  PointMatrix points;
  std::string source_format;  // "ply-ascii", "ply-binary", "kitti-bin"
};

/// PLY reader: ASCII and binary_little_endian, float or double x/y/z vertex
/// properties; other scalar properties are skipped.
RawCloud readPly(const std::string& path);

/// Binary little-endian PLY with float x/y/z.
void writePly(const std::string& path, const PointMatrix& points);

/// Raw KITTI scan: packed float32 (x, y, z, intensity) records, intensity
/// dropped.
RawCloud readKittiBin(const std::string& path);

/// Dispatch on file extension (.ply / .bin).
RawCloud readCloudAuto(const std::string& path);

}  // namespace npcc
