#include "npcc/gradcheck.hpp"

namespace npcc {

namespace {

using gradcheck_detail::checkAgainstFd;
using gradcheck_detail::FlatView;
using gradcheck_detail::flattenTensor;
using D = double;

FeatureMatrix<D> randomMatrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  FeatureMatrix<D> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// random values kept away from zero so relu kinks cannot corrupt the
// finite differences
FeatureMatrix<D> randomOffZero(Eigen::Index r, Eigen::Index c, Rng& rng) {
  FeatureMatrix<D> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double v = rng.normal();
    m.data()[i] = (v >= 0 ? 0.2 : -0.2) + v;
  }
  return m;
}

CoordMatrix smallCloud(Rng& rng, Eigen::Index n, int32_t extent) {
  CoordMatrix c = uniformCloud(rng, n * 2, extent);
  if (c.rows() > n) c.conservativeResize(n, 3);
  return c;
}

GradCheckReport checkLinear(Rng& rng) {
  const Eigen::Index n = 7, din = 5, dout = 4;
  FeatureMatrix<D> x = randomMatrix(n, din, rng);
  LinearWeights<D> w = makeLinear<D>(dout, din, rng);
  const FeatureMatrix<D> r = randomMatrix(n, dout, rng);
  const auto loss = [&] { return (linearForward(x, w).array() * r.array()).sum(); };

  LinearWeights<D> gw = w;
  gw.setZero();
  FeatureMatrix<D> gx = linearBackward(x, w, r, gw);
  FlatView params, grads;
  flattenTensor(params, w.weight);
  flattenTensor(params, w.bias);
  flattenTensor(params, x);
  flattenTensor(grads, gw.weight);
  flattenTensor(grads, gw.bias);
  flattenTensor(grads, gx);
  return checkAgainstFd("linear", params, grads, loss, 12, rng, 1e-6);
}

GradCheckReport checkRelu(Rng& rng) {
  FeatureMatrix<D> x = randomOffZero(6, 5, rng);
  const FeatureMatrix<D> r = randomMatrix(6, 5, rng);
  const auto loss = [&] { return (reluForward(x).array() * r.array()).sum(); };
  FeatureMatrix<D> gx = reluBackward(x, r);
  FlatView params, grads;
  flattenTensor(params, x);
  flattenTensor(grads, gx);
  return checkAgainstFd("relu", params, grads, loss, 10, rng, 1e-6, 1e-7);
}

GradCheckReport checkSigmoid(Rng& rng) {
  FeatureMatrix<D> x = randomMatrix(6, 5, rng);
  const FeatureMatrix<D> r = randomMatrix(6, 5, rng);
  const auto loss = [&] { return (sigmoidForward(x).array() * r.array()).sum(); };
  const FeatureMatrix<D> y = sigmoidForward(x);
  FeatureMatrix<D> gx = sigmoidBackward(y, r);
  FlatView params, grads;
  flattenTensor(params, x);
  flattenTensor(grads, gx);
  return checkAgainstFd("sigmoid", params, grads, loss, 10, rng, 1e-6);
}

GradCheckReport checkSoftmax(Rng& rng) {
  FeatureMatrix<D> x = randomMatrix(6, 7, rng);
  const FeatureMatrix<D> r = randomMatrix(6, 7, rng);
  const auto loss = [&] { return (softmaxForward(x).array() * r.array()).sum(); };
  const FeatureMatrix<D> y = softmaxForward(x);
  FeatureMatrix<D> gx = softmaxBackward(y, r);
  FlatView params, grads;
  flattenTensor(params, x);
  flattenTensor(grads, gx);
  return checkAgainstFd("softmax", params, grads, loss, 10, rng, 1e-6);
}

GradCheckReport checkLayerNorm(Rng& rng) {
  const Eigen::Index n = 6, d = 8;
  FeatureMatrix<D> x = randomMatrix(n, d, rng);
  LayerNormParams<D> p = makeLayerNorm<D>(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    p.scale(i) = 1.0 + 0.3 * rng.normal();
    p.shift(i) = 0.2 * rng.normal();
  }
  const FeatureMatrix<D> r = randomMatrix(n, d, rng);
  const auto loss = [&] { return (layerNormForward(x, p).array() * r.array()).sum(); };

  LayerNormCache<D> cache;
  layerNormForward(x, p, &cache);
  LayerNormParams<D> gp{Vector<D>::Zero(d), Vector<D>::Zero(d)};
  FeatureMatrix<D> gx = layerNormBackward(cache, p, r, gp);
  FlatView params, grads;
  flattenTensor(params, p.scale);
  flattenTensor(params, p.shift);
  flattenTensor(params, x);
  flattenTensor(grads, gp.scale);
  flattenTensor(grads, gp.shift);
  flattenTensor(grads, gx);
  return checkAgainstFd("layernorm", params, grads, loss, 12, rng, 1e-6);
}

GradCheckReport checkSconv(Rng& rng) {
  const Eigen::Index n = 30;
  const CoordMatrix coords = smallCloud(rng, n, 6);
  const SconvPlan plan = buildSconvPlan(buildOffsetMap(coords), coords.rows());
  const Eigen::Index din = 4, dout = 3;
  FeatureMatrix<D> x = randomMatrix(coords.rows(), din, rng);
  SconvWeights<D> w = makeSconv<D>(dout, din, 27, rng);
  const FeatureMatrix<D> r = randomMatrix(coords.rows(), dout, rng);
  const auto loss = [&] { return (sconvForward(x, plan, w).array() * r.array()).sum(); };

  SconvWeights<D> gw = w;
  gw.setZero();
  FeatureMatrix<D> gx = sconvBackward(x, plan, w, r, gw);
  FlatView params, grads;
  for (auto& k : w.kernel) flattenTensor(params, k);
  flattenTensor(params, w.bias);
  flattenTensor(params, x);
  for (auto& k : gw.kernel) flattenTensor(grads, k);
  flattenTensor(grads, gw.bias);
  flattenTensor(grads, gx);
  return checkAgainstFd("sconv", params, grads, loss, 14, rng, 1e-6);
}

GradCheckReport checkTsconv(Rng& rng) {
  const CoordMatrix coords = smallCloud(rng, 9, 5);
  const OctantChildren children = expandOctantCoords(coords);
  const Eigen::Index din = 4, dout = 3;
  FeatureMatrix<D> x = randomMatrix(coords.rows(), din, rng);
  SconvWeights<D> w = makeSconv<D>(dout, din, 1, rng);
  const FeatureMatrix<D> r = randomMatrix(children.coords.rows(), dout, rng);
  const auto loss = [&] {
    return (tsconvUpscale(x, children.parent, w).array() * r.array()).sum();
  };

  SconvWeights<D> gw = w;
  gw.setZero();
  FeatureMatrix<D> gx = tsconvBackward(x, children.parent, w, r, gw);
  FlatView params, grads;
  flattenTensor(params, w.kernel[0]);
  flattenTensor(params, w.bias);
  flattenTensor(params, x);
  flattenTensor(grads, gw.kernel[0]);
  flattenTensor(grads, gw.bias);
  flattenTensor(grads, gx);
  return checkAgainstFd("tsconv", params, grads, loss, 12, rng, 1e-6);
}

void flattenNpa(FlatView& view, NpaLayerWeights<D>& w) {
  for (int h = 0; h < w.heads; ++h) {
    flattenTensor(view, w.wq[size_t(h)].weight);
    flattenTensor(view, w.wq[size_t(h)].bias);
    flattenTensor(view, w.wk[size_t(h)].weight);
    flattenTensor(view, w.wk[size_t(h)].bias);
    flattenTensor(view, w.wv[size_t(h)].weight);
    flattenTensor(view, w.wv[size_t(h)].bias);
  }
  flattenTensor(view, w.out_proj.weight);
  flattenTensor(view, w.out_proj.bias);
}

GradCheckReport checkNpa(Rng& rng) {
  const CoordMatrix coords = smallCloud(rng, 24, 8);
  const Neighborhood nbh = knnSearch(coords, 5);
  const Eigen::Index d = 6;
  FeatureMatrix<D> x = randomMatrix(coords.rows(), d, rng);
  NpaLayerWeights<D> w = makeNpaLayer<D>(d, d, 2, 4, rng);
  const FeatureMatrix<D> r = randomMatrix(coords.rows(), d, rng);
  const auto loss = [&] { return (npaForward(x, nbh, w).array() * r.array()).sum(); };

  NpaCache<D> cache;
  npaForward(x, nbh, w, &cache);
  NpaLayerWeights<D> gw = w;
  for (int h = 0; h < w.heads; ++h) {
    gw.wq[size_t(h)].setZero();
    gw.wk[size_t(h)].setZero();
    gw.wv[size_t(h)].setZero();
  }
  gw.out_proj.setZero();
  FeatureMatrix<D> gx = npaBackward(x, nbh, w, cache, r, gw);
  FlatView params, grads;
  flattenNpa(params, w);
  flattenTensor(params, x);
  flattenNpa(grads, gw);
  flattenTensor(grads, gx);
  return checkAgainstFd("npa", params, grads, loss, 16, rng, 1e-6);
}

void flattenFormer(FlatView& view, NpaformerWeights<D>& w) {
  flattenNpa(view, w.npa);
  flattenTensor(view, w.norm1.scale);
  flattenTensor(view, w.norm1.shift);
  flattenTensor(view, w.norm2.scale);
  flattenTensor(view, w.norm2.shift);
  flattenTensor(view, w.ffn1.weight);
  flattenTensor(view, w.ffn1.bias);
  flattenTensor(view, w.ffn2.weight);
  flattenTensor(view, w.ffn2.bias);
}

GradCheckReport checkNpaformer(Rng& rng) {
  const CoordMatrix coords = smallCloud(rng, 20, 8);
  const Neighborhood nbh = knnSearch(coords, 4);
  const Eigen::Index d = 6;
  FeatureMatrix<D> x = randomMatrix(coords.rows(), d, rng);
  NpaformerWeights<D> w = makeNpaformer<D>(d, 2, 3, rng);
  const FeatureMatrix<D> r = randomMatrix(coords.rows(), d, rng);
  const auto loss = [&] { return (npaformerForward(x, nbh, w).array() * r.array()).sum(); };

  NpaformerCache<D> cache;
  npaformerForward(x, nbh, w, &cache);
  NpaformerWeights<D> gw = w;
  FlatView gview;
  flattenFormer(gview, gw);
  for (auto& span : gview.spans)
    for (Eigen::Index i = 0; i < span.second; ++i) span.first[i] = 0;
  FeatureMatrix<D> gx = npaformerBackward(x, nbh, w, cache, r, gw);
  FlatView params, grads;
  flattenFormer(params, w);
  flattenTensor(params, x);
  flattenFormer(grads, gw);
  flattenTensor(grads, gx);
  return checkAgainstFd("npaformer", params, grads, loss, 16, rng, 1e-6);
}

GradCheckReport checkBce(Rng& rng) {
  const Eigen::Index n = 24;
  Vector<D> probs(n);
  std::vector<int> bits(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    probs(i) = rng.uniform(0.05, 0.95);
    bits[size_t(i)] = rng.below(2) ? 1 : 0;
  }
  const auto loss = [&] { return bceLoss<D>(probs, bits).first; };
  Vector<D> grad = bceLoss<D>(probs, bits).second;
  FlatView params, grads;
  flattenTensor(params, probs);
  flattenTensor(grads, grad);
  return checkAgainstFd("bce", params, grads, loss, 10, rng, 1e-6);
}

GradCheckReport checkMopaEndToEnd(Rng& rng) {
  MopaWeights<D> w = makeMopaWeights<D>(2, 4, 6, rng);
  const CoordMatrix cloud = synthesizeCloud(rng, CloudFamily::Mixed, 90, 24);
  const std::vector<TrainPair> pairs = makePairs(cloud, 1, 2);
  const auto loss = [&] { return mopaBatchLoss<D>(w, pairs, nullptr); };

  MopaWeights<D> gw = zeroLike(w);
  mopaBatchLoss<D>(w, pairs, &gw);
  FlatView params = gradcheck_detail::flatten(w);
  FlatView grads = gradcheck_detail::flatten(gw);
  return checkAgainstFd("mopa-end-to-end", params, grads, loss, 20, rng, 1e-3, 1e-5);
}

}  // namespace

std::vector<GradCheckReport> runGradChecks(uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCheckReport> reports;
  reports.push_back(checkLinear(rng));
  reports.push_back(checkRelu(rng));
  reports.push_back(checkSigmoid(rng));
  reports.push_back(checkSoftmax(rng));
  reports.push_back(checkLayerNorm(rng));
  reports.push_back(checkSconv(rng));
  reports.push_back(checkTsconv(rng));
  reports.push_back(checkNpa(rng));
  reports.push_back(checkNpaformer(rng));
  reports.push_back(checkBce(rng));
  reports.push_back(checkMopaEndToEnd(rng));
  return reports;
}

}  // namespace npcc
