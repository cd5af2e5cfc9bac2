#pragma once

#include <utility>

#include "npcc/mopa.hpp"

namespace npcc {

constexpr double kBceClamp = 1e-7;

/// Mean binary cross entropy with probability clamping, plus the gradient
/// with respect to the probabilities (zero where the clamp binds).
template <typename S>
std::pair<double, Vector<S>> bceLoss(const Vector<S>& probs, const std::vector<int>& bits) {
  if (probs.size() != Eigen::Index(bits.size()))
    throw ShapeError("bce: probability/bit count mismatch");
  const Eigen::Index n = probs.size();
  double loss = 0;
  Vector<S> grad = Vector<S>::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = double(probs(i));
    const double pc = std::min(1.0 - kBceClamp, std::max(kBceClamp, p));
    const int b = bits[size_t(i)];
    loss -= b ? std::log(pc) : std::log(1.0 - pc);
    if (p > kBceClamp && p < 1.0 - kBceClamp)
      grad(i) = S((b ? -1.0 / pc : 1.0 / (1.0 - pc)) / double(n));
  }
  return {loss / double(n), std::move(grad)};
}

/// Forward state of one teacher-forced transition: every stage sees the
/// ground-truth occupancy of the preceding octant groups, exactly as the
/// encoder does.
template <typename S>
struct MopaTrainState {
  AggregateCache<S> agg_cache;
  FeatureMatrix<S> agg_out;
  FeatureMatrix<S> base;
  std::array<StageCache<S>, kMopaStages> stage_caches;
  Vector<S> probs_by_row;  // each candidate's probability from its own stage
};

template <typename S>
MopaTrainState<S> mopaTeacherForward(const TransitionGeometry& g, const std::vector<int>& truth,
                                     const MopaWeights<S>& w) {
  if (Eigen::Index(truth.size()) != g.candidateCount())
    throw ShapeError("truth bit count does not match candidate count");
  MopaTrainState<S> st;
  st.agg_out = aggregate(g, w, &st.agg_cache);
  st.base = candidateBaseFeatures(g, st.agg_out, w);
  st.probs_by_row.resize(g.candidateCount());
  FeatureMatrix<S> x = st.base;
  for (int stage = 0; stage < kMopaStages; ++stage) {
    stageForward(x, g, w.stages[size_t(stage)], &st.stage_caches[size_t(stage)]);
    for (const int32_t row : g.group_rows[size_t(stage)]) {
      st.probs_by_row(row) = st.stage_caches[size_t(stage)].probs(row, 0);
      x.row(row) += w.occupancy_embed.row(truth[size_t(row)]);
    }
  }
  return st;
}

/// Accumulates parameter gradients for one transition given the loss
/// gradient with respect to each candidate's coded probability.
template <typename S>
void mopaTeacherBackward(const TransitionGeometry& g, const std::vector<int>& truth,
                         const MopaWeights<S>& w, const MopaTrainState<S>& st,
                         const Vector<S>& gprobs_by_row, MopaWeights<S>& gw) {
  const Eigen::Index m = g.candidateCount();
  FeatureMatrix<S> gx_accum = FeatureMatrix<S>::Zero(m, kMopaWidth);
  for (int stage = kMopaStages - 1; stage >= 0; --stage) {
    const auto& cache = st.stage_caches[size_t(stage)];
    const auto& head = w.stages[size_t(stage)];
    auto& ghead = gw.stages[size_t(stage)];
    // occupancy embeddings written after this stage only influence later
    // stages, whose input gradients are already accumulated
    for (const int32_t row : g.group_rows[size_t(stage)])
      gw.occupancy_embed.row(truth[size_t(row)]) += gx_accum.row(row);

    FeatureMatrix<S> gprobs = FeatureMatrix<S>::Zero(m, 1);
    for (const int32_t row : g.group_rows[size_t(stage)]) gprobs(row, 0) = gprobs_by_row(row);
    FeatureMatrix<S> gc2 = sigmoidBackward(cache.probs, gprobs);
    FeatureMatrix<S> gc1r = sconvBackward(cache.c1r, g.cand_plan, head.conv2, gc2, ghead.conv2);
    FeatureMatrix<S> gc1 = reluBackward(cache.c1, gc1r);
    FeatureMatrix<S> gfout = sconvBackward(cache.fout, g.cand_plan, head.conv1, gc1, ghead.conv1);
    gx_accum += npaformerBackward(cache.x, g.cand_nbh, head.former, cache.former, gfout,
                                  ghead.former);
  }
  for (Eigen::Index row = 0; row < m; ++row)
    gw.octant_embed.row(g.cand.octant(row)) += gx_accum.row(row);
  FeatureMatrix<S> g_agg =
      tsconvBackward(st.agg_out, g.cand.parent, w.tsconv, gx_accum, gw.tsconv);
  FeatureMatrix<S> g_res = npaformerBackward(st.agg_cache.res, g.parent_nbh, w.agg_former,
                                             st.agg_cache.former, g_agg, gw.agg_former);
  FeatureMatrix<S> g_hr =
      sconvBackward(st.agg_cache.lifted_relu, g.parent_plan, w.agg_res1, g_res, gw.agg_res1);
  FeatureMatrix<S> g_h = g_res + reluBackward(st.agg_cache.lifted, g_hr);
  sconvBackward(st.agg_cache.ones, g.parent_plan, w.agg_res0, g_h, gw.agg_res0);
}

/// Ground-truth occupancy bits for every expanded candidate: membership of
/// the child coordinate in the finer tensor.
std::vector<int> truthBits(const TransitionGeometry& g, const CoordMatrix& fine_coords);

}  // namespace npcc
