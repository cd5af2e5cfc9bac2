#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "npcc/mopa.hpp"
#include "npcc/sha256.hpp"

namespace npcc {

struct NamedTensor {
  std::string name;
  std::vector<uint32_t> dims;
  std::vector<float> data;
};

struct ModelConfig {
  uint32_t d = kMopaWidth;
  uint32_t k = 16;
  uint32_t heads = 4;
  uint32_t cph = 8;
  uint32_t stages = kMopaStages;
};

struct WeightsBlob {
  ModelConfig config;
  std::vector<NamedTensor> tensors;
  std::array<uint8_t, 32> hash{};  // SHA-256 of everything after magic+version
};

/// "NPAW" magic, version, config block, then the named tensor records.
/// Little-endian throughout; raw 32-bit floats.
std::vector<uint8_t> serializeWeights(const ModelConfig& config,
                                      const std::vector<NamedTensor>& tensors);
WeightsBlob parseWeights(const std::vector<uint8_t>& bytes);

void saveWeightsFile(const std::string& path, const ModelConfig& config,
                     const std::vector<NamedTensor>& tensors);
WeightsBlob loadWeightsFile(const std::string& path);

template <typename S>
std::vector<NamedTensor> mopaToTensors(const MopaWeights<S>& w) {
  std::vector<NamedTensor> out;
  visitMopaTensors(
      [&](const char* name, const auto& t) {
        using T = std::decay_t<decltype(t)>;
        NamedTensor nt;
        nt.name = name;
        if constexpr (T::ColsAtCompileTime == 1) {
          nt.dims = {uint32_t(t.size())};
        } else {
          nt.dims = {uint32_t(t.rows()), uint32_t(t.cols())};
        }
        nt.data.resize(size_t(t.size()));
        for (Eigen::Index i = 0; i < t.size(); ++i)
          nt.data[size_t(i)] = float(t.data()[i]);  // row-major storage
        out.push_back(std::move(nt));
      },
      w);
  return out;
}

template <typename S>
MopaWeights<S> mopaFromTensors(const ModelConfig& config,
                               const std::vector<NamedTensor>& tensors) {
  if (config.d != kMopaWidth || config.stages != kMopaStages)
    throw MalformedFile("weights file declares unsupported model dimensions");
  if (config.heads < 1 || config.cph < 1)
    throw MalformedFile("weights file declares invalid head configuration");
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;

  Rng dummy(0);
  MopaWeights<S> w = makeMopaWeights<S>(int(config.heads), int(config.cph), int(config.k), dummy);
  visitMopaTensors(
      [&](const char* name, auto& t) {
        const auto it = by_name.find(name);
        if (it == by_name.end())
          throw MalformedFile(std::string("weights file is missing tensor ") + name);
        const NamedTensor& nt = *it->second;
        using T = std::decay_t<decltype(t)>;
        bool shape_ok;
        if constexpr (T::ColsAtCompileTime == 1) {
          shape_ok = nt.dims.size() == 1 && Eigen::Index(nt.dims[0]) == t.size();
        } else {
          shape_ok = nt.dims.size() == 2 && Eigen::Index(nt.dims[0]) == t.rows() &&
                     Eigen::Index(nt.dims[1]) == t.cols();
        }
        if (!shape_ok)
          throw MalformedFile(std::string("tensor shape mismatch for ") + name);
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = S(nt.data[size_t(i)]);
      },
      w);
  return w;
}

template <typename S>
struct LoadedModel {
  MopaWeights<S> weights;
  std::array<uint8_t, 32> hash;
};

template <typename S>
LoadedModel<S> loadMopaModel(const std::string& path) {
  const WeightsBlob blob = loadWeightsFile(path);
  return {mopaFromTensors<S>(blob.config, blob.tensors), blob.hash};
}

template <typename S>
void saveMopaModel(const std::string& path, const MopaWeights<S>& w) {
  ModelConfig config;
  config.k = uint32_t(w.k);
  config.heads = uint32_t(w.heads());
  config.cph = uint32_t(w.cph());
  saveWeightsFile(path, config, mopaToTensors(w));
}

/// Hash of the in-memory model as it would appear on disk; identical to the
/// hash stored when saving and recovered when loading.
template <typename S>
std::array<uint8_t, 32> mopaModelHash(const MopaWeights<S>& w) {
  ModelConfig config;
  config.k = uint32_t(w.k);
  config.heads = uint32_t(w.heads());
  config.cph = uint32_t(w.cph());
  const std::vector<uint8_t> bytes = serializeWeights(config, mopaToTensors(w));
  return sha256(bytes.data() + 8, bytes.size() - 8);
}

}  // namespace npcc
