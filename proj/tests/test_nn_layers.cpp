#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "npcc/nn/complexity.hpp"
#include "npcc/nn/sconv.hpp"
#include "npcc/nn/weights_io.hpp"
#include "npcc/sha256.hpp"
#include "npcc/synthetic.hpp"
#include "oracles.hpp"

using namespace npcc;

TEST_CASE("sigmoid of zero is one half") {
  FeatureMatrix<double> x(1, 3);
  x << 0.0, 2.0, -2.0;
  const auto y = sigmoidForward(x);
  CHECK(y(0, 0) == doctest::Approx(0.5));
  CHECK(y(0, 1) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
}

TEST_CASE("layernorm of a constant row is zero before scale and shift") {
  FeatureMatrix<double> x(1, 6);
  x.setConstant(3.5);  // exactly representable: the mean subtracts to zero
  LayerNormParams<double> p = makeLayerNorm<double>(6);
  const auto y = layerNormForward(x, p);
  for (Eigen::Index c = 0; c < 6; ++c) CHECK(y(0, c) == 0.0);

  // non-representable constants leave only rounding residue, no blow-up
  x.setConstant(3.7);
  const auto y2 = layerNormForward(x, p);
  CHECK(y2.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(3);
  FeatureMatrix<double> x(10, 8);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-9, 9);
  const auto y = softmaxForward(x);
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    CHECK(y.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("linear layer shape errors are typed") {
  Rng rng(4);
  const LinearWeights<double> w = makeLinear<double>(3, 5, rng);
  FeatureMatrix<double> bad(2, 4);
  bad.setZero();
  CHECK_THROWS_AS(linearForward(bad, w), ShapeError);
}

TEST_CASE("sconv identity kernel passes features through") {
  Rng rng(5);
  const CoordMatrix coords = uniformCloud(rng, 1, 10);
  const SconvPlan plan = buildSconvPlan(buildOffsetMap(coords), 1);
  SconvWeights<double> w = makeSconv<double>(3, 3, 27, rng);
  w.setZero();
  w.kernel[13].setIdentity();  // center offset
  FeatureMatrix<double> x(1, 3);
  x << 4.0, -1.0, 0.5;
  const auto y = sconvForward(x, plan, w);
  CHECK(y(0, 0) == 4.0);
  CHECK(y(0, 1) == -1.0);
  CHECK(y(0, 2) == 0.5);
}

TEST_CASE("sconv with zero features yields the bias") {
  Rng rng(6);
  const CoordMatrix coords = uniformCloud(rng, 1, 10);
  const SconvPlan plan = buildSconvPlan(buildOffsetMap(coords), 1);
  SconvWeights<double> w = makeSconv<double>(2, 4, 27, rng);
  w.bias << -3.5, 8.25;
  const FeatureMatrix<double> x = FeatureMatrix<double>::Zero(1, 4);
  const auto y = sconvForward(x, plan, w);
  CHECK(y(0, 0) == -3.5);
  CHECK(y(0, 1) == 8.25);
}

TEST_CASE("sconv matches the dense convolution oracle on a 12-cube") {
  Rng rng(7);
  const CoordMatrix coords = uniformCloud(rng, 350, 12);
  const SconvPlan plan = buildSconvPlan(buildOffsetMap(coords), coords.rows());
  const SconvWeights<double> w = makeSconv<double>(5, 3, 27, rng);
  FeatureMatrix<double> x(coords.rows(), 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const auto fast = sconvForward(x, plan, w);
  const auto dense = oracle::denseConv(coords, x, w.kernel, w.bias);
  CHECK((fast - dense).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("tsconv identity projects parent features to all eight children") {
  Rng rng(8);
  const CoordMatrix coords = uniformCloud(rng, 4, 6);
  const auto children = expandOctantCoords(coords);
  SconvWeights<double> w = makeSconv<double>(3, 3, 1, rng);
  w.setZero();
  w.kernel[0].setIdentity();
  FeatureMatrix<double> x(coords.rows(), 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const auto y = tsconvUpscale(x, children.parent, w);
  REQUIRE(y.rows() == 8 * coords.rows());
  for (Eigen::Index c = 0; c < y.rows(); ++c)
    CHECK((y.row(c) - x.row(children.parent(c))).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tsconv zero weights leave only the bias") {
  Rng rng(9);
  const CoordMatrix coords = uniformCloud(rng, 2, 6);
  const auto children = expandOctantCoords(coords);
  SconvWeights<double> w = makeSconv<double>(2, 3, 1, rng);
  w.setZero();
  w.bias << 1.25, -0.5;
  const FeatureMatrix<double> x = FeatureMatrix<double>::Ones(coords.rows(), 3);
  const auto y = tsconvUpscale(x, children.parent, w);
  for (Eigen::Index c = 0; c < y.rows(); ++c) {
    CHECK(y(c, 0) == 1.25);
    CHECK(y(c, 1) == -0.5);
  }
}

TEST_CASE("tsconv child coordinate set equals the octant expansion oracle") {
  Rng rng(10);
  const CoordMatrix coords = uniformCloud(rng, 50, 20);
  const auto children = expandOctantCoords(coords);
  std::set<oracle::Key> expected;
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    for (int o = 0; o < 8; ++o)
      expected.insert({2 * coords(i, 0) + (o & 1), 2 * coords(i, 1) + ((o >> 1) & 1),
                       2 * coords(i, 2) + ((o >> 2) & 1)});
  REQUIRE(size_t(children.coords.rows()) == expected.size());
  for (Eigen::Index i = 0; i < children.coords.rows(); ++i)
    CHECK(expected.count(oracle::keyOf(children.coords, i)) == 1);
}

TEST_CASE("complexity formulas evaluate exactly") {
  CHECK(npaComplexity(1, 1, 1) == 12);
  CHECK(globalAttentionComplexity(1, 1) == 6);
  // the local/global ratio shrinks as N grows at fixed k and C
  double prev = 1e300;
  for (uint64_t n : {1000ull, 10000ull, 100000ull}) {
    const double ratio =
        double(npaComplexity(n, 16, 32)) / double(globalAttentionComplexity(n, 32));
    CHECK(ratio < prev);
    prev = ratio;
  }
}

TEST_CASE("sha256 matches the NIST vectors") {
  const auto empty = sha256(nullptr, 0);
  CHECK(hexDigest(empty) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const char* abc = "abc";
  CHECK(hexDigest(sha256(reinterpret_cast<const uint8_t*>(abc), 3)) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const std::string two_block = "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq";
  CHECK(hexDigest(sha256(reinterpret_cast<const uint8_t*>(two_block.data()), two_block.size())) ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("weights file round-trips and hashes consistently") {
  Rng rng(11);
  MopaWeights<float> w = makeMopaWeights<float>(2, 16, 12, rng);
  const std::string path = "test_weights.npaw";
  saveMopaModel(path, w);
  const LoadedModel<float> loaded = loadMopaModel<float>(path);
  CHECK(loaded.weights.k == 12);
  CHECK(loaded.weights.heads() == 2);
  CHECK(loaded.weights.cph() == 16);
  CHECK(loaded.hash == mopaModelHash(w));

  bool identical = true;
  visitMopaTensors(
      [&](const char*, const auto& a, const auto& b) {
        if ((a - b).cwiseAbs().maxCoeff() != 0) identical = false;
      },
      w, loaded.weights);
  CHECK(identical);
  std::remove(path.c_str());
}

TEST_CASE("corrupt weights files are rejected with typed errors") {
  Rng rng(12);
  MopaWeights<float> w = makeMopaWeights<float>(1, 32, 8, rng);
  auto bytes = serializeWeights(ModelConfig{32, 8, 1, 32, 8}, mopaToTensors(w));
  auto bad = bytes;
  bad[1] = 'X';
  CHECK_THROWS_AS(parseWeights(bad), MalformedFile);
  auto truncated = bytes;
  truncated.resize(truncated.size() / 2);
  CHECK_THROWS_AS(parseWeights(truncated), MalformedFile);
}
