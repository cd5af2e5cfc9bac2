#include <fstream>

#include "npcc/coord_map.hpp"
#include "npcc/nn/weights_io.hpp"
#include "npcc/trainer.hpp"

namespace npcc {

std::vector<int> truthBits(const TransitionGeometry& g, const CoordMatrix& fine_coords) {
  const CoordMap fine = buildCoordIndex(fine_coords);
  std::vector<int> bits(size_t(g.candidateCount()), 0);
  for (Eigen::Index r = 0; r < g.candidateCount(); ++r)
    bits[size_t(r)] =
        fine.find(g.cand.coords(r, 0), g.cand.coords(r, 1), g.cand.coords(r, 2)) >= 0 ? 1 : 0;
  return bits;
}

std::vector<TrainPair> makePairs(const CoordMatrix& cloud, int min_level, int max_level) {
  std::vector<CoordMatrix> levels;
  levels.push_back(canonicalize(cloud, /*allow_duplicates=*/true));
  for (int l = 1; l <= max_level; ++l)
    levels.push_back(downscaleCoords(levels.back()));
  std::vector<TrainPair> pairs;
  for (int l = min_level; l < int(levels.size()); ++l)
    pairs.push_back({levels[size_t(l)], levels[size_t(l) - 1]});
  return pairs;
}

namespace {

template <typename S>
ToyTrainResult runTraining(const TrainConfig& cfg, const std::vector<CoordMatrix>& clouds,
                           const std::string& weights_out) {
  Rng rng(cfg.seed);
  MopaWeights<S> w = makeMopaWeights<S>(cfg.heads, cfg.cph, cfg.k, rng);
  AdamState<S> opt(w);

  std::vector<TrainPair> pool;
  for (const auto& cloud : clouds) {
    auto pairs = makePairs(cloud, cfg.pair_min_level, cfg.pair_max_level);
    pool.insert(pool.end(), pairs.begin(), pairs.end());
  }
  if (pool.empty()) throw EmptyInput();

  ToyTrainResult result;
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<TrainPair> batch;
    for (int b = 0; b < cfg.batch; ++b)
      batch.push_back(pool[size_t(rng.below(pool.size()))]);
    const double loss = trainStep(w, batch, opt, cfg.lr);
    result.log.push_back({step, loss});
    result.final_loss = loss;
  }
  saveMopaModel(weights_out, w);
  return result;
}

}  // namespace

ToyTrainResult trainToy(const TrainConfig& cfg, const std::vector<CoordMatrix>& clouds,
                        const std::string& weights_out) {
  cfg.validate();
  if (cfg.use_double) return runTraining<double>(cfg, clouds, weights_out);
  return runTraining<float>(cfg, clouds, weights_out);
}

double evalCrossEntropy(const std::string& weights_path, const std::vector<TrainPair>& pairs) {
  const LoadedModel<float> model = loadMopaModel<float>(weights_path);
  return mopaBatchLoss<float>(model.weights, pairs, nullptr);
}

std::vector<CoordMatrix> defaultCorpus(uint64_t seed, int cloud_count, Eigen::Index points,
                                       int32_t extent) {
  Rng rng(seed);
  std::vector<CoordMatrix> clouds;
  static const CloudFamily families[] = {CloudFamily::Plane, CloudFamily::Lines,
                                         CloudFamily::Lissajous, CloudFamily::Mixed};
  for (int c = 0; c < cloud_count; ++c)
    clouds.push_back(synthesizeCloud(rng, families[c % 4], points, extent));
  return clouds;
}

void writeTrainLogCsv(const std::string& path, const std::vector<TrainLogEntry>& log) {
  std::ofstream f(path);
  if (!f) throw MalformedFile("cannot open training log for writing: " + path);
  f << "step,loss\n";
  f.precision(10);
  for (const auto& e : log) f << e.step << "," << e.loss << "\n";
}

}  // namespace npcc
