#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memory>

#include "npcc/coord_map.hpp"
#include "npcc/mopa_train.hpp"
#include "npcc/synthetic.hpp"
#include "npcc/trainer.hpp"

using namespace npcc;

namespace {

std::function<int(Eigen::Index)> truthFn(const TransitionGeometry& g, const CoordMatrix& fine) {
  auto set = std::make_shared<CoordMap>(buildCoordIndex(fine));
  const CoordMatrix* cand = &g.cand.coords;
  return [set, cand](Eigen::Index row) {
    return set->find((*cand)(row, 0), (*cand)(row, 1), (*cand)(row, 2)) >= 0 ? 1 : 0;
  };
}

}  // namespace

TEST_CASE("aggregate handles a single isolated point") {
  Rng rng(31);
  const MopaWeights<double> w = makeMopaWeights<double>(2, 4, 6, rng);
  CoordMatrix one(1, 3);
  one << 4, 4, 4;
  const TransitionGeometry g = buildTransitionGeometry(one, w.k);
  const FeatureMatrix<double> out = aggregate(g, w);
  REQUIRE(out.rows() == 1);
  REQUIRE(out.cols() == kMopaWidth);
  CHECK(out.allFinite());
}

TEST_CASE("aggregate residual paths pass the lifted features through") {
  Rng rng(32);
  MopaWeights<double> w = makeMopaWeights<double>(2, 4, 4, rng);
  // keep the occupancy lift, zero every branch that adds on top of it
  w.agg_res1.setZero();
  w.agg_former.npa.out_proj.setZero();
  w.agg_former.ffn2.setZero();
  const CoordMatrix coords = uniformCloud(rng, 40, 10);
  const TransitionGeometry g = buildTransitionGeometry(coords, w.k);
  const FeatureMatrix<double> ones = FeatureMatrix<double>::Ones(coords.rows(), 1);
  const FeatureMatrix<double> lifted = sconvForward(ones, g.parent_plan, w.agg_res0);
  const FeatureMatrix<double> out = aggregate(g, w);
  CHECK((out - lifted).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stage probabilities lie strictly inside (0,1)") {
  Rng rng(33);
  const MopaWeights<double> w = makeMopaWeights<double>(4, 8, 8, rng);
  const CoordMatrix coords = synthesizeCloud(rng, CloudFamily::Plane, 150, 32);
  const TransitionGeometry g = buildTransitionGeometry(coords, w.k);
  const FeatureMatrix<double> base = candidateBaseFeatures(g, aggregate(g, w), w);
  for (int stage = 0; stage < kMopaStages; ++stage) {
    std::vector<std::vector<int>> bits(static_cast<size_t>(stage));
    for (int e = 0; e < stage; ++e)
      bits[size_t(e)].assign(g.group_rows[size_t(e)].size(), e & 1);
    const Vector<double> probs = predictStage(g, base, stage, bits, w);
    REQUIRE(probs.size() == Eigen::Index(g.group_rows[size_t(stage)].size()));
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      CHECK(probs(i) > 0.0);
      CHECK(probs(i) < 1.0);
    }
  }
}

TEST_CASE("supplying bits for the current stage is a StageOrderViolation") {
  Rng rng(34);
  const MopaWeights<double> w = makeMopaWeights<double>(1, 32, 4, rng);
  const CoordMatrix coords = uniformCloud(rng, 20, 8);
  const TransitionGeometry g = buildTransitionGeometry(coords, w.k);
  const FeatureMatrix<double> base = candidateBaseFeatures(g, aggregate(g, w), w);
  std::vector<std::vector<int>> bits(3);
  for (int e = 0; e < 3; ++e) bits[size_t(e)].assign(g.group_rows[size_t(e)].size(), 0);
  CHECK_THROWS_AS(predictStage(g, base, 2, bits, w), StageOrderViolation);
}

TEST_CASE("probabilities are invariant to parent input permutation") {
  Rng rng(35);
  const MopaWeights<double> w = makeMopaWeights<double>(2, 8, 6, rng);
  CoordMatrix coords = uniformCloud(rng, 60, 16);
  const TransitionGeometry g1 = buildTransitionGeometry(coords, w.k);
  CoordMatrix shuffled = coords;
  for (Eigen::Index i = shuffled.rows() - 1; i > 0; --i)
    shuffled.row(i).swap(shuffled.row(Eigen::Index(rng.below(uint64_t(i) + 1))));
  const TransitionGeometry g2 = buildTransitionGeometry(canonicalize(shuffled, false), w.k);
  const FeatureMatrix<double> base1 = candidateBaseFeatures(g1, aggregate(g1, w), w);
  const FeatureMatrix<double> base2 = candidateBaseFeatures(g2, aggregate(g2, w), w);
  const Vector<double> p1 = predictStage(g1, base1, 0, {}, w);
  const Vector<double> p2 = predictStage(g2, base2, 0, {}, w);
  REQUIRE(p1.size() == p2.size());
  CHECK((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stage probabilities do not depend on truth of later stages") {
  Rng rng(36);
  const MopaWeights<double> w = makeMopaWeights<double>(2, 4, 6, rng);
  const CoordMatrix cloud = synthesizeCloud(rng, CloudFamily::Lissajous, 160, 24);
  const auto pairs = makePairs(cloud, 1, 1);
  REQUIRE(!pairs.empty());
  const TransitionGeometry g = buildTransitionGeometry(pairs[0].parent_coords, w.k);
  std::vector<int> truth = truthBits(g, pairs[0].child_coords);

  const MopaTrainState<double> st = mopaTeacherForward(g, truth, w);
  std::vector<int> zeroed = truth;
  for (int stage = 3; stage < kMopaStages; ++stage)
    for (const int32_t row : g.group_rows[size_t(stage)]) zeroed[size_t(row)] = 0;
  const MopaTrainState<double> st2 = mopaTeacherForward(g, zeroed, w);
  for (int stage = 0; stage <= 3; ++stage)
    for (const int32_t row : g.group_rows[size_t(stage)])
      CHECK(st.probs_by_row(row) == st2.probs_by_row(row));
}

TEST_CASE("encoder and decoder produce bit-identical probability sequences") {
  Rng rng(37);
  MopaWeights<float> w = makeMopaWeights<float>(4, 8, 8, rng);
  const CoordMatrix cloud = synthesizeCloud(rng, CloudFamily::Mixed, 300, 32);
  const auto pairs = makePairs(cloud, 1, 1);
  const TransitionGeometry g = buildTransitionGeometry(pairs[0].parent_coords, w.k);

  EncodingBitCoder enc;
  const CodeScaleResult encoded =
      codeScale(g, w, enc, truthFn(g, pairs[0].child_coords));
  const auto payload = enc.encoder.finish();

  DecodingBitCoder dec(payload.data(), payload.size());
  const CodeScaleResult decoded = codeScale<float>(g, w, dec, nullptr);

  CHECK(encoded.coded_probs == decoded.coded_probs);
  CHECK(encoded.child_coords == decoded.child_coords);
  CHECK(decoded.child_coords == pairs[0].child_coords);
}

TEST_CASE("code_scale round-trips random clouds under random weights") {
  Rng rng(38);
  for (int trial = 0; trial < 3; ++trial) {
    MopaWeights<float> w = makeMopaWeights<float>(trial % 2 ? 2 : 4, trial % 2 ? 16 : 8, 8, rng);
    const CoordMatrix cloud = uniformCloud(rng, 1000, 64);
    const auto pairs = makePairs(cloud, 1, 1);
    const TransitionGeometry g = buildTransitionGeometry(pairs[0].parent_coords, w.k);

    EncodingBitCoder enc;
    const CodeScaleResult encoded = codeScale(g, w, enc, truthFn(g, pairs[0].child_coords));
    CHECK(encoded.symbols == 8 * g.parentCount());
    const auto payload = enc.encoder.finish();

    DecodingBitCoder dec(payload.data(), payload.size());
    const CodeScaleResult decoded = codeScale<float>(g, w, dec, nullptr);
    CHECK(decoded.child_coords == pairs[0].child_coords);

    // near-optimality of the arithmetic coder against the model entropy
    CHECK(std::abs(double(payload.size()) * 8 - encoded.ideal_bits) < 64.0);
  }
}

TEST_CASE("uniform probability model costs one bit per candidate") {
  Rng rng(39);
  MopaWeights<float> w = makeMopaWeights<float>(1, 32, 4, rng);
  const CoordMatrix cloud = uniformCloud(rng, 600, 48);
  const auto pairs = makePairs(cloud, 1, 1);
  const TransitionGeometry g = buildTransitionGeometry(pairs[0].parent_coords, w.k);
  EncodingBitCoder enc;
  codeScale(g, w, enc, truthFn(g, pairs[0].child_coords), /*force_uniform=*/true);
  const auto payload = enc.encoder.finish();
  const double expected_bits = 8.0 * double(g.parentCount());
  CHECK(double(payload.size()) * 8 >= expected_bits - 8);
  CHECK(double(payload.size()) * 8 <= expected_bits + 64);
}

TEST_CASE("teacher forcing and the coding path agree on probabilities") {
  Rng rng(40);
  MopaWeights<float> w = makeMopaWeights<float>(2, 8, 6, rng);
  const CoordMatrix cloud = synthesizeCloud(rng, CloudFamily::Plane, 120, 24);
  const auto pairs = makePairs(cloud, 1, 1);
  const TransitionGeometry g = buildTransitionGeometry(pairs[0].parent_coords, w.k);
  const std::vector<int> truth = truthBits(g, pairs[0].child_coords);

  const MopaTrainState<float> st = mopaTeacherForward(g, truth, w);
  EncodingBitCoder enc;
  const CodeScaleResult encoded = codeScale(g, w, enc, truthFn(g, pairs[0].child_coords));

  // same function evaluated by both paths up to 16-bit quantization
  Eigen::Index sym = 0;
  for (int stage = 0; stage < kMopaStages; ++stage)
    for (const int32_t row : g.group_rows[size_t(stage)]) {
      const double coded = double(encoded.coded_probs[size_t(sym)]) / 65536.0;
      CHECK(std::abs(double(st.probs_by_row(row)) - coded) < 2.5 / 65536.0);
      ++sym;
    }
}
