#pragma once

#include <array>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "npcc/entropy/range_coder.hpp"
#include "npcc/nn/attention.hpp"
#include "npcc/nn/sconv.hpp"
#include "npcc/sparse_tensor.hpp"

namespace npcc {

constexpr int kMopaWidth = 32;   // feature width through the whole module
constexpr int kMopaStages = 8;   // one stage per octant, ascending order

/// Per-stage probability head: NPAFormer over the candidate set followed
/// by two 3x3x3 convolutions squeezing 32 channels to a scalar logit.
template <typename S>
struct StageHead {
  NpaformerWeights<S> former;
  SconvWeights<S> conv1;  // 32 -> 32
  SconvWeights<S> conv2;  // 32 -> 1
};

/// All learnable parameters of one scale transition, shared by every
/// transition in the pyramid.
template <typename S>
struct MopaWeights {
  SconvWeights<S> agg_res0;  // 3x3x3, 1 -> 32 (occupancy lift)
  SconvWeights<S> agg_res1;  // 3x3x3, 32 -> 32
  NpaformerWeights<S> agg_former;
  SconvWeights<S> tsconv;    // 1x1x1 upscaling projection, 32 -> 32
  FeatureMatrix<S> octant_embed;     // 8 x 32
  std::array<StageHead<S>, kMopaStages> stages;
  FeatureMatrix<S> occupancy_embed;  // 2 x 32, indexed by the coded bit
  int k = 16;                        // neighborhood size the model was built for

  int heads() const { return agg_former.npa.heads; }
  int cph() const { return agg_former.npa.cph; }
};

template <typename S>
MopaWeights<S> makeMopaWeights(int heads, int cph, int k, Rng& rng) {
  MopaWeights<S> w;
  w.k = k;
  w.agg_res0 = makeSconv<S>(kMopaWidth, 1, 27, rng);
  w.agg_res1 = makeSconv<S>(kMopaWidth, kMopaWidth, 27, rng);
  w.agg_former = makeNpaformer<S>(kMopaWidth, heads, cph, rng);
  w.tsconv = makeSconv<S>(kMopaWidth, kMopaWidth, 1, rng);
  const double bound = std::sqrt(6.0 / (8 + kMopaWidth));
  w.octant_embed.resize(8, kMopaWidth);
  for (Eigen::Index r = 0; r < 8; ++r)
    for (Eigen::Index c = 0; c < kMopaWidth; ++c)
      w.octant_embed(r, c) = S(rng.uniform(-bound, bound));
  for (auto& stage : w.stages) {
    stage.former = makeNpaformer<S>(kMopaWidth, heads, cph, rng);
    stage.conv1 = makeSconv<S>(kMopaWidth, kMopaWidth, 27, rng);
    stage.conv2 = makeSconv<S>(1, kMopaWidth, 27, rng);
  }
  w.occupancy_embed.resize(2, kMopaWidth);
  const double bound2 = std::sqrt(6.0 / (2 + kMopaWidth));
  for (Eigen::Index r = 0; r < 2; ++r)
    for (Eigen::Index c = 0; c < kMopaWidth; ++c)
      w.occupancy_embed(r, c) = S(rng.uniform(-bound2, bound2));
  return w;
}

/// Applies f once per trainable tensor, in a fixed canonical order, for any
/// number of weight structs in lockstep. Powers the optimizer, the
/// flattened parameter view and serialization.
template <typename F, typename... W>
void visitMopaTensors(F&& f, W&&... w) {
  const auto conv = [&](const char* base, auto&... c) {
    const size_t slices = [](auto& first, auto&...) { return first.kernel.size(); }(c...);
    for (size_t s = 0; s < slices; ++s) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s.kernel%02zu", base, s);
      f(name, c.kernel[s]...);
    }
    f((std::string(base) + ".bias").c_str(), c.bias...);
  };
  const auto linear = [&](const std::string& base, auto&... l) {
    f((base + ".weight").c_str(), l.weight...);
    f((base + ".bias").c_str(), l.bias...);
  };
  const auto former = [&](const std::string& base, auto&... fw) {
    const int heads = [](auto& first, auto&...) { return first.npa.heads; }(fw...);
    for (int h = 0; h < heads; ++h) {
      linear(base + ".npa.h" + std::to_string(h) + ".wq", fw.npa.wq[size_t(h)]...);
      linear(base + ".npa.h" + std::to_string(h) + ".wk", fw.npa.wk[size_t(h)]...);
      linear(base + ".npa.h" + std::to_string(h) + ".wv", fw.npa.wv[size_t(h)]...);
    }
    linear(base + ".npa.out_proj", fw.npa.out_proj...);
    f((base + ".norm1.scale").c_str(), fw.norm1.scale...);
    f((base + ".norm1.shift").c_str(), fw.norm1.shift...);
    f((base + ".norm2.scale").c_str(), fw.norm2.scale...);
    f((base + ".norm2.shift").c_str(), fw.norm2.shift...);
    linear(base + ".ffn1", fw.ffn1...);
    linear(base + ".ffn2", fw.ffn2...);
  };
  conv("agg_res0", w.agg_res0...);
  conv("agg_res1", w.agg_res1...);
  former("agg_former", w.agg_former...);
  conv("tsconv", w.tsconv...);
  f("octant_embed", w.octant_embed...);
  for (int g = 0; g < kMopaStages; ++g) {
    const std::string base = "stage" + std::to_string(g);
    former(base + ".former", w.stages[size_t(g)].former...);
    conv((base + ".conv1").c_str(), w.stages[size_t(g)].conv1...);
    conv((base + ".conv2").c_str(), w.stages[size_t(g)].conv2...);
  }
  f("occupancy_embed", w.occupancy_embed...);
}

/// Zero-initialized gradient holder of the same shapes as w.
template <typename S>
MopaWeights<S> zeroLike(const MopaWeights<S>& w) {
  MopaWeights<S> g = w;
  visitMopaTensors([](const char*, auto& t) { t.setZero(); }, g);
  return g;
}

/// Fixed per-transition geometry: parent tensor structure, expanded
/// candidate children, and the neighbor tables both levels need. Built once
/// and reused across the eight stages.
struct TransitionGeometry {
  CoordMatrix parents;
  Neighborhood parent_nbh;
  SconvPlan parent_plan;
  OctantChildren cand;
  Neighborhood cand_nbh;
  SconvPlan cand_plan;
  std::array<std::vector<int32_t>, kMopaStages> group_rows;

  Eigen::Index parentCount() const { return parents.rows(); }
  Eigen::Index candidateCount() const { return cand.coords.rows(); }
};

inline TransitionGeometry buildTransitionGeometry(const CoordMatrix& parent_coords, int k) {
  if (parent_coords.rows() == 0) throw EmptyTensor();
  TransitionGeometry g;
  g.parents = parent_coords;
  g.parent_nbh = knnSearch(g.parents, k);
  g.parent_plan = buildSconvPlan(buildOffsetMap(g.parents), g.parents.rows());
  g.cand = expandOctantCoords(g.parents);
  g.cand_nbh = knnSearch(g.cand.coords, k);
  g.cand_plan = buildSconvPlan(buildOffsetMap(g.cand.coords), g.cand.coords.rows());
  for (Eigen::Index r = 0; r < g.cand.coords.rows(); ++r)
    g.group_rows[size_t(g.cand.octant(r))].push_back(int32_t(r));
  return g;
}

template <typename S>
struct AggregateCache {
  FeatureMatrix<S> ones;
  FeatureMatrix<S> lifted;   // h = conv0(ones)
  FeatureMatrix<S> lifted_relu;
  FeatureMatrix<S> res;      // conv1(relu(h)) + h
  NpaformerCache<S> former;
};

/// Neighborhood aggregation at the parent scale: a two-convolution
/// residual block lifting the occupancy indicator to 32 channels, then an
/// NPAFormer over the parent kNN graph.
template <typename S>
FeatureMatrix<S> aggregate(const TransitionGeometry& g, const MopaWeights<S>& w,
                           AggregateCache<S>* cache = nullptr) {
  FeatureMatrix<S> ones = FeatureMatrix<S>::Ones(g.parentCount(), 1);
  FeatureMatrix<S> h = sconvForward(ones, g.parent_plan, w.agg_res0);
  FeatureMatrix<S> hr = reluForward(h);
  FeatureMatrix<S> res = sconvForward(hr, g.parent_plan, w.agg_res1) + h;
  FeatureMatrix<S> out =
      npaformerForward(res, g.parent_nbh, w.agg_former, cache ? &cache->former : nullptr);
  if (cache) {
    cache->ones = std::move(ones);
    cache->lifted = std::move(h);
    cache->lifted_relu = std::move(hr);
    cache->res = std::move(res);
  }
  return out;
}

/// Base candidate features before any occupancy feedback: TSConv-projected
/// parent aggregate plus the octant embedding.
template <typename S>
FeatureMatrix<S> candidateBaseFeatures(const TransitionGeometry& g, const FeatureMatrix<S>& agg,
                                       const MopaWeights<S>& w) {
  FeatureMatrix<S> base = tsconvUpscale(agg, g.cand.parent, w.tsconv);
  for (Eigen::Index r = 0; r < base.rows(); ++r)
    base.row(r) += w.octant_embed.row(g.cand.octant(r));
  return base;
}

template <typename S>
struct StageCache {
  FeatureMatrix<S> x;  // stage input features
  NpaformerCache<S> former;
  FeatureMatrix<S> fout, c1, c1r, c2, probs;
};

/// Full probability column for one stage head; callers read the rows of
/// the stage's octant group.
template <typename S>
FeatureMatrix<S> stageForward(const FeatureMatrix<S>& x, const TransitionGeometry& g,
                              const StageHead<S>& head, StageCache<S>* cache = nullptr) {
  FeatureMatrix<S> fout =
      npaformerForward(x, g.cand_nbh, head.former, cache ? &cache->former : nullptr);
  FeatureMatrix<S> c1 = sconvForward(fout, g.cand_plan, head.conv1);
  FeatureMatrix<S> c1r = reluForward(c1);
  FeatureMatrix<S> c2 = sconvForward(c1r, g.cand_plan, head.conv2);
  FeatureMatrix<S> probs = sigmoidForward(c2);
  if (cache) {
    cache->x = x;
    cache->fout = std::move(fout);
    cache->c1 = std::move(c1);
    cache->c1r = std::move(c1r);
    cache->c2 = std::move(c2);
    cache->probs = probs;
  }
  return probs;
}

/// Occupancy probabilities for the children of stage `stage`, conditioned
/// on the decoded bits of the preceding stages. `decoded_bits[g]` holds one
/// bit per group-g row in canonical order; supplying bits at or past the
/// requested stage is a StageOrderViolation.
template <typename S>
Vector<S> predictStage(const TransitionGeometry& g, const FeatureMatrix<S>& base_feats, int stage,
                       const std::vector<std::vector<int>>& decoded_bits,
                       const MopaWeights<S>& w) {
  if (stage < 0 || stage >= kMopaStages) throw ShapeError("stage index out of range");
  if (int(decoded_bits.size()) > stage)
    throw StageOrderViolation("occupancy bits supplied for a stage not yet coded");
  FeatureMatrix<S> x = base_feats;
  for (int e = 0; e < int(decoded_bits.size()); ++e) {
    const auto& rows = g.group_rows[size_t(e)];
    if (decoded_bits[size_t(e)].size() != rows.size())
      throw ShapeError("decoded bit count does not match stage group size");
    for (size_t i = 0; i < rows.size(); ++i)
      x.row(rows[i]) += w.occupancy_embed.row(decoded_bits[size_t(e)][i]);
  }
  FeatureMatrix<S> probs = stageForward(x, g, w.stages[size_t(stage)], (StageCache<S>*)nullptr);
  const auto& rows = g.group_rows[size_t(stage)];
  Vector<S> out(Eigen::Index(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) out(Eigen::Index(i)) = probs(rows[i], 0);
  return out;
}

/// Symbol transport shared by the encoder and decoder so both sides run
/// the identical model evaluation sequence.
class BitCoder {
 public:
  virtual ~BitCoder() = default;
  /// Encoder: codes truth_bit and returns it. Decoder: ignores truth_bit
  /// and returns the decoded bit.
  virtual int transfer(int truth_bit, QuantProb p) = 0;
  virtual bool decoding() const = 0;
};

class EncodingBitCoder : public BitCoder {
 public:
  int transfer(int truth_bit, QuantProb p) override {
    encoder.encodeBit(truth_bit, p);
    return truth_bit;
  }
  bool decoding() const override { return false; }

  RangeEncoder encoder;
};

class DecodingBitCoder : public BitCoder {
 public:
  DecodingBitCoder(const uint8_t* data, size_t size) : decoder(data, size) {}
  int transfer(int, QuantProb p) override { return decoder.decodeBit(p); }
  bool decoding() const override { return true; }

  RangeDecoder decoder;
};

struct CodeScaleResult {
  CoordMatrix child_coords;
  int64_t symbols = 0;
  double ideal_bits = 0;              // sum of -log2(p16/65536) over coded symbols
  std::vector<uint16_t> coded_probs;  // quantized probability of each coded symbol
};

/// Codes one scale transition, stage by stage in octant order. `truth`
/// maps a candidate row to its occupancy bit and is only consulted when
/// encoding. Probabilities depend only on the parent tensor and
/// previously coded bits, so the decoder reproduces them exactly.
template <typename S>
CodeScaleResult codeScale(const TransitionGeometry& g, const MopaWeights<S>& w, BitCoder& coder,
                          const std::function<int(Eigen::Index)>& truth,
                          bool force_uniform = false) {
  FeatureMatrix<S> base;
  if (!force_uniform) {
    FeatureMatrix<S> agg = aggregate(g, w);
    base = candidateBaseFeatures(g, agg, w);
  }
  CodeScaleResult result;
  std::vector<int> bits(size_t(g.candidateCount()), 0);
  FeatureMatrix<S> x = base;
  for (int stage = 0; stage < kMopaStages; ++stage) {
    FeatureMatrix<S> probs;
    if (!force_uniform) probs = stageForward(x, g, w.stages[size_t(stage)]);
    for (const int32_t row : g.group_rows[size_t(stage)]) {
      const QuantProb qp =
          force_uniform ? QuantProb{32768} : quantizeProb(double(probs(row, 0)));
      const int bit = coder.transfer(truth ? truth(row) : 0, qp);
      bits[size_t(row)] = bit;
      result.coded_probs.push_back(qp.p16);
      ++result.symbols;
      const double p1 = double(qp.p16) / 65536.0;
      result.ideal_bits -= std::log2(bit ? p1 : 1.0 - p1);
      if (!force_uniform) x.row(row) += w.occupancy_embed.row(bit);
    }
  }
  Eigen::Index count = 0;
  for (const int b : bits) count += b;
  if (count == 0)
    throw CorruptStream("decoded scale is entirely empty");
  result.child_coords.resize(count, 3);
  Eigen::Index out = 0;
  for (Eigen::Index r = 0; r < g.candidateCount(); ++r)
    if (bits[size_t(r)]) result.child_coords.row(out++) = g.cand.coords.row(r);
  return result;
}

}  // namespace npcc
