#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "npcc/errors.hpp"
#include "npcc/pcio.hpp"

namespace npcc {

namespace {

struct PlyProperty {
  std::string type;
  std::string name;
};

size_t scalarSize(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  if (type == "int" || type == "uint" || type == "int32" || type == "uint32" || type == "float" ||
      type == "float32")
    return 4;
  if (type == "double" || type == "float64") return 8;
  throw MalformedFile("unsupported PLY property type: " + type);
}

struct PlyElement {
  std::string name;
  uint64_t count = 0;
  std::vector<PlyProperty> props;
  bool has_list = false;
};

double parseAsciiValue(std::istringstream& ss, const std::string& type) {
  double v;
  if (!(ss >> v)) throw MalformedFile("short PLY data row");
  (void)type;
  return v;
}

double readBinaryScalar(std::ifstream& f, const std::string& type) {
  uint8_t buf[8];
  const size_t n = scalarSize(type);
  f.read(reinterpret_cast<char*>(buf), std::streamsize(n));
  if (!f) throw CountMismatch("PLY data ends before declared element count");
  if (type == "float" || type == "float32") {
    float v;
    std::memcpy(&v, buf, 4);
    return double(v);
  }
  if (type == "double" || type == "float64") {
    double v;
    std::memcpy(&v, buf, 8);
    return v;
  }
  // integer scalars are only ever skipped, value irrelevant
  return 0;
}

}  // namespace

RawCloud readPly(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MalformedFile("cannot open PLY file: " + path);
  std::string line;
  if (!std::getline(f, line) || (line != "ply" && line != "ply\r"))
    throw MalformedFile("missing 'ply' magic in " + path);

  bool ascii = false, binary_le = false;
  std::vector<PlyElement> elements;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string keyword;
    ss >> keyword;
    if (keyword == "comment" || keyword == "obj_info" || keyword.empty()) continue;
    if (keyword == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "ascii") ascii = true;
      else if (fmt == "binary_little_endian") binary_le = true;
      else throw UnsupportedEncoding("unsupported PLY format: " + fmt);
    } else if (keyword == "element") {
      PlyElement e;
      if (!(ss >> e.name >> e.count)) throw MalformedFile("bad PLY element line");
      elements.push_back(e);
    } else if (keyword == "property") {
      if (elements.empty()) throw MalformedFile("PLY property before any element");
      std::string type;
      ss >> type;
      if (type == "list") {
        elements.back().has_list = true;
        continue;
      }
      PlyProperty p;
      p.type = type;
      if (!(ss >> p.name)) throw MalformedFile("bad PLY property line");
      elements.back().props.push_back(p);
    } else if (keyword == "end_header") {
      break;
    } else {
      throw MalformedFile("unrecognized PLY header keyword: " + keyword);
    }
  }
  if (!ascii && !binary_le) throw MalformedFile("PLY header missing format line");

  const PlyElement* vertex = nullptr;
  for (const auto& e : elements) {
    if (e.name == "vertex") {
      vertex = &e;
      break;
    }
    // elements preceding the vertices must be skipped over byte-exactly
    if (!ascii && e.has_list)
      throw UnsupportedEncoding("list property before vertex element in binary PLY");
  }
  if (!vertex) throw MalformedFile("PLY has no vertex element");

  int xyz_col[3] = {-1, -1, -1};
  for (size_t c = 0; c < vertex->props.size(); ++c) {
    const auto& p = vertex->props[c];
    const bool real = p.type == "float" || p.type == "float32" || p.type == "double" ||
                      p.type == "float64";
    if (p.name == "x" && real) xyz_col[0] = int(c);
    if (p.name == "y" && real) xyz_col[1] = int(c);
    if (p.name == "z" && real) xyz_col[2] = int(c);
  }
  if (xyz_col[0] < 0 || xyz_col[1] < 0 || xyz_col[2] < 0)
    throw MalformedFile("PLY vertex element lacks float x/y/z properties");

  RawCloud cloud;
  cloud.source_format = ascii ? "ply-ascii" : "ply-binary";
  cloud.points.resize(Eigen::Index(vertex->count), 3);

  for (const auto& e : elements) {
    if (&e == vertex) break;
    if (ascii) {
      for (uint64_t i = 0; i < e.count; ++i)
        if (!std::getline(f, line)) throw CountMismatch("PLY data ends early");
    } else {
      size_t row = 0;
      for (const auto& p : e.props) row += scalarSize(p.type);
      f.seekg(std::streamoff(row * e.count), std::ios::cur);
    }
  }

  for (uint64_t i = 0; i < vertex->count; ++i) {
    double row[3] = {0, 0, 0};
    if (ascii) {
      do {
        if (!std::getline(f, line)) throw CountMismatch("PLY data ends before vertex count");
      } while (line.find_first_not_of(" \t\r") == std::string::npos);
      std::istringstream ss(line);
      for (size_t c = 0; c < vertex->props.size(); ++c) {
        const double v = parseAsciiValue(ss, vertex->props[c].type);
        for (int a = 0; a < 3; ++a)
          if (int(c) == xyz_col[a]) row[a] = v;
      }
    } else {
      for (size_t c = 0; c < vertex->props.size(); ++c) {
        const double v = readBinaryScalar(f, vertex->props[c].type);
        for (int a = 0; a < 3; ++a)
          if (int(c) == xyz_col[a]) row[a] = v;
      }
    }
    for (int a = 0; a < 3; ++a) {
      if (!std::isfinite(row[a])) throw MalformedFile("non-finite coordinate in PLY");
      cloud.points(Eigen::Index(i), a) = row[a];
    }
  }
  return cloud;
}

void writePly(const std::string& path, const PointMatrix& points) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw MalformedFile("cannot open PLY for writing: " + path);
  f << "ply\nformat binary_little_endian 1.0\n";
  f << "element vertex " << points.rows() << "\n";
  f << "property float x\nproperty float y\nproperty float z\nend_header\n";
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    float row[3] = {float(points(i, 0)), float(points(i, 1)), float(points(i, 2))};
    f.write(reinterpret_cast<const char*>(row), 12);
  }
  if (!f) throw MalformedFile("failed writing PLY: " + path);
}

RawCloud readKittiBin(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw MalformedFile("cannot open scan file: " + path);
  const std::streamsize size = f.tellg();
  if (size % 16 != 0)
    throw MalformedFile("scan file length is not a multiple of 16 bytes");
  f.seekg(0);
  const Eigen::Index n = Eigen::Index(size / 16);
  RawCloud cloud;
  cloud.source_format = "kitti-bin";
  cloud.points.resize(n, 3);
  std::vector<float> record(4);
  for (Eigen::Index i = 0; i < n; ++i) {
    f.read(reinterpret_cast<char*>(record.data()), 16);
    if (!f) throw MalformedFile("scan file read error");
    for (int a = 0; a < 3; ++a) cloud.points(i, a) = double(record[size_t(a)]);
  }
  return cloud;
}

RawCloud readCloudAuto(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".ply") return readPly(path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".bin") return readKittiBin(path);
  throw MalformedFile("unrecognized point cloud extension (expect .ply or .bin): " + path);
}

}  // namespace npcc
