#pragma once

#include <string>
#include <vector>

#include "npcc/mopa_train.hpp"
#include "npcc/synthetic.hpp"

namespace npcc {

struct TrainConfig {
  double lr = 1e-3;
  int batch = 2;        // transition pairs per optimizer step
  int steps = 200;
  uint64_t seed = 1;
  int pair_min_level = 1;  // finest transition sampled: level 1 -> level 0
  int pair_max_level = 3;
  int k = 16;
  int heads = 4;
  int cph = 8;
  bool use_double = false;  // 64-bit training mode

  void validate() const {
    if (!(lr > 0) || batch < 1 || steps < 0 || pair_min_level < 1 ||
        pair_max_level < pair_min_level || k < 1 || heads < 1 || cph < 1)
      throw ShapeError("invalid training configuration");
  }
};

/// One supervised sample: a parent-scale tensor and the true child set one
/// scale finer.
struct TrainPair {
  CoordMatrix parent_coords;
  CoordMatrix child_coords;
};

/// Downscale chain pairs (level L -> L-1) for L in [min_level, max_level];
/// levels past the point where the cloud degenerates to a single voxel are
/// skipped.
std::vector<TrainPair> makePairs(const CoordMatrix& cloud, int min_level, int max_level);

/// Adam moments, same shapes as the weights.
template <typename S>
struct AdamState {
  MopaWeights<S> m, v;
  int64_t t = 0;

  explicit AdamState(const MopaWeights<S>& w) : m(zeroLike(w)), v(zeroLike(w)) {}
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

template <typename S>
void adamStep(MopaWeights<S>& w, const MopaWeights<S>& g, AdamState<S>& opt, double lr) {
  ++opt.t;
  const double c1 = 1.0 - std::pow(kAdamBeta1, double(opt.t));
  const double c2 = 1.0 - std::pow(kAdamBeta2, double(opt.t));
  visitMopaTensors(
      [&](const char*, auto& wt, const auto& gt, auto& mt, auto& vt) {
        for (Eigen::Index i = 0; i < wt.size(); ++i) {
          const double gi = double(gt.data()[i]);
          const double m = kAdamBeta1 * double(mt.data()[i]) + (1 - kAdamBeta1) * gi;
          const double v = kAdamBeta2 * double(vt.data()[i]) + (1 - kAdamBeta2) * gi * gi;
          mt.data()[i] = S(m);
          vt.data()[i] = S(v);
          wt.data()[i] -= S(lr * (m / c1) / (std::sqrt(v / c2) + kAdamEps));
        }
      },
      w, g, opt.m, opt.v);
}

/// Teacher-forced loss over a set of pairs: mean BCE per coded symbol.
/// When grads is non-null the parameter gradients are accumulated there.
template <typename S>
double mopaBatchLoss(const MopaWeights<S>& w, const std::vector<TrainPair>& pairs,
                     MopaWeights<S>* grads) {
  int64_t total_symbols = 0;
  for (const auto& p : pairs) total_symbols += 8 * p.parent_coords.rows();
  if (total_symbols == 0) throw EmptyInput();
  double loss_sum = 0;
  for (const auto& p : pairs) {
    const TransitionGeometry geom = buildTransitionGeometry(p.parent_coords, w.k);
    const std::vector<int> truth = truthBits(geom, p.child_coords);
    const MopaTrainState<S> st = mopaTeacherForward(geom, truth, w);
    auto [mean_loss, grad] = bceLoss<S>(st.probs_by_row, truth);
    const double scale = double(st.probs_by_row.size()) / double(total_symbols);
    loss_sum += mean_loss * scale;
    if (grads) {
      grad *= S(scale);
      mopaTeacherBackward(geom, truth, w, st, grad, *grads);
    }
  }
  return loss_sum;
}

template <typename S>
double trainStep(MopaWeights<S>& w, const std::vector<TrainPair>& batch, AdamState<S>& opt,
                 double lr) {
  MopaWeights<S> grads = zeroLike(w);
  const double loss = mopaBatchLoss(w, batch, &grads);
  if (!std::isfinite(loss))
    throw TrainingDiverged("loss is not finite; aborting training");
  adamStep(w, grads, opt, lr);
  return loss;
}

struct TrainLogEntry {
  int step;
  double loss;
};

struct ToyTrainResult {
  std::vector<TrainLogEntry> log;
  double final_loss = 0;
};

/// Trains float32 or float64 weights on an in-memory synthetic corpus and
/// writes the checkpoint in the NPAW format. Deterministic in the seed.
ToyTrainResult trainToy(const TrainConfig& cfg, const std::vector<CoordMatrix>& clouds,
                        const std::string& weights_out);

/// Held-out mean cross entropy per symbol under teacher forcing.
double evalCrossEntropy(const std::string& weights_path, const std::vector<TrainPair>& pairs);

/// Default in-repo corpus used by train-toy and the acceptance suite.
std::vector<CoordMatrix> defaultCorpus(uint64_t seed, int cloud_count, Eigen::Index points,
                                       int32_t extent);

void writeTrainLogCsv(const std::string& path, const std::vector<TrainLogEntry>& log);

}  // namespace npcc
