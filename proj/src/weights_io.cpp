#include <cstring>
#include <fstream>

#include "npcc/nn/weights_io.hpp"

namespace npcc {

namespace {

void putU32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

uint32_t getU32(const std::vector<uint8_t>& bytes, size_t& pos) {
  if (pos + 4 > bytes.size()) throw MalformedFile("weights file truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(bytes[pos + size_t(i)]) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

std::vector<uint8_t> serializeWeights(const ModelConfig& config,
                                      const std::vector<NamedTensor>& tensors) {
  std::vector<uint8_t> out;
  out.push_back('N');
  out.push_back('P');
  out.push_back('A');
  out.push_back('W');
  putU32(out, 1);  // format version
  putU32(out, config.d);
  putU32(out, config.k);
  putU32(out, config.heads);
  putU32(out, config.cph);
  putU32(out, config.stages);
  for (const auto& t : tensors) {
    putU32(out, uint32_t(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    putU32(out, uint32_t(t.dims.size()));
    uint64_t count = 1;
    for (uint32_t d : t.dims) {
      putU32(out, d);
      count *= d;
    }
    if (count != t.data.size()) throw ShapeError("tensor element count inconsistent with dims");
    const size_t at = out.size();
    out.resize(at + 4 * t.data.size());
    std::memcpy(out.data() + at, t.data.data(), 4 * t.data.size());
  }
  return out;
}

WeightsBlob parseWeights(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 28 || std::memcmp(bytes.data(), "NPAW", 4) != 0)
    throw MalformedFile("not an NPAW weights file");
  size_t pos = 4;
  const uint32_t version = getU32(bytes, pos);
  if (version != 1) throw MalformedFile("unsupported weights format version");
  WeightsBlob blob;
  blob.config.d = getU32(bytes, pos);
  blob.config.k = getU32(bytes, pos);
  blob.config.heads = getU32(bytes, pos);
  blob.config.cph = getU32(bytes, pos);
  blob.config.stages = getU32(bytes, pos);
  while (pos < bytes.size()) {
    NamedTensor t;
    const uint32_t name_len = getU32(bytes, pos);
    if (name_len > 256 || pos + name_len > bytes.size())
      throw MalformedFile("weights file corrupt: bad tensor name");
    t.name.assign(reinterpret_cast<const char*>(bytes.data() + pos), name_len);
    pos += name_len;
    const uint32_t rank = getU32(bytes, pos);
    if (rank > 4) throw MalformedFile("weights file corrupt: bad tensor rank");
    uint64_t count = 1;
    for (uint32_t r = 0; r < rank; ++r) {
      t.dims.push_back(getU32(bytes, pos));
      count *= t.dims.back();
    }
    if (count > (1u << 28) || pos + 4 * count > bytes.size())
      throw MalformedFile("weights file corrupt: tensor data truncated");
    t.data.resize(count);
    std::memcpy(t.data.data(), bytes.data() + pos, 4 * count);
    pos += 4 * count;
    blob.tensors.push_back(std::move(t));
  }
  blob.hash = sha256(bytes.data() + 8, bytes.size() - 8);
  return blob;
}

void saveWeightsFile(const std::string& path, const ModelConfig& config,
                     const std::vector<NamedTensor>& tensors) {
  const std::vector<uint8_t> bytes = serializeWeights(config, tensors);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw MalformedFile("cannot open weights file for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw MalformedFile("failed writing weights file: " + path);
}

WeightsBlob loadWeightsFile(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw MalformedFile("cannot open weights file: " + path);
  const std::streamsize size = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(size));
  f.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!f) throw MalformedFile("failed reading weights file: " + path);
  return parseWeights(bytes);
}

}  // namespace npcc
