#pragma once

#include <cmath>

#include "npcc/errors.hpp"
#include "npcc/rng.hpp"
#include "npcc/types.hpp"

namespace npcc {

template <typename S>
struct LinearWeights {
  FeatureMatrix<S> weight;  // out x in
  Vector<S> bias;           // out

  Eigen::Index inDim() const { return weight.cols(); }
  Eigen::Index outDim() const { return weight.rows(); }

  void setZero() {
    weight.setZero();
    bias.setZero();
  }
};

/// Glorot-uniform initialization: +-sqrt(6 / (fan_in + fan_out)).
template <typename S>
LinearWeights<S> makeLinear(Eigen::Index out, Eigen::Index in, Rng& rng) {
  LinearWeights<S> w;
  w.weight.resize(out, in);
  const double bound = std::sqrt(6.0 / double(in + out));
  for (Eigen::Index r = 0; r < out; ++r)
    for (Eigen::Index c = 0; c < in; ++c) w.weight(r, c) = S(rng.uniform(-bound, bound));
  w.bias = Vector<S>::Zero(out);
  return w;
}

template <typename S>
FeatureMatrix<S> linearForward(const FeatureMatrix<S>& x, const LinearWeights<S>& w) {
  if (x.cols() != w.inDim()) throw ShapeError("linear: input dimension mismatch");
  FeatureMatrix<S> y = x * w.weight.transpose();
  y.rowwise() += w.bias.transpose();
  return y;
}

/// Accumulates parameter gradients into gw and returns the input gradient.
template <typename S>
FeatureMatrix<S> linearBackward(const FeatureMatrix<S>& x, const LinearWeights<S>& w,
                                const FeatureMatrix<S>& gy, LinearWeights<S>& gw) {
  gw.weight.noalias() += gy.transpose() * x;
  gw.bias.noalias() += gy.colwise().sum().transpose();
  return gy * w.weight;
}

template <typename S>
FeatureMatrix<S> reluForward(const FeatureMatrix<S>& x) {
  return x.cwiseMax(S(0));
}

template <typename S>
FeatureMatrix<S> reluBackward(const FeatureMatrix<S>& x, const FeatureMatrix<S>& gy) {
  return (x.array() > S(0)).template cast<S>() * gy.array();
}

template <typename S>
FeatureMatrix<S> sigmoidForward(const FeatureMatrix<S>& x) {
  return ((-x.array()).exp() + S(1)).inverse();
}

template <typename S>
FeatureMatrix<S> sigmoidBackward(const FeatureMatrix<S>& y, const FeatureMatrix<S>& gy) {
  return gy.array() * y.array() * (S(1) - y.array());
}

/// Row-wise softmax with max subtraction.
template <typename S>
FeatureMatrix<S> softmaxForward(const FeatureMatrix<S>& logits) {
  FeatureMatrix<S> y(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const S m = logits.row(i).maxCoeff();
    y.row(i) = (logits.row(i).array() - m).exp();
    y.row(i) /= y.row(i).sum();
  }
  return y;
}

template <typename S>
FeatureMatrix<S> softmaxBackward(const FeatureMatrix<S>& y, const FeatureMatrix<S>& gy) {
  FeatureMatrix<S> gx(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const S dot = y.row(i).dot(gy.row(i));
    gx.row(i) = y.row(i).array() * (gy.row(i).array() - dot);
  }
  return gx;
}

constexpr double kLayerNormEps = 1e-5;

template <typename S>
struct LayerNormParams {
  Vector<S> scale;
  Vector<S> shift;
};

template <typename S>
LayerNormParams<S> makeLayerNorm(Eigen::Index dim) {
  return {Vector<S>::Ones(dim), Vector<S>::Zero(dim)};
}

template <typename S>
struct LayerNormCache {
  FeatureMatrix<S> normalized;  // x_hat, before scale/shift
  Vector<S> inv_std;
};

template <typename S>
FeatureMatrix<S> layerNormForward(const FeatureMatrix<S>& x, const LayerNormParams<S>& p,
                                  LayerNormCache<S>* cache = nullptr) {
  if (x.cols() != p.scale.size()) throw ShapeError("layernorm: dimension mismatch");
  const Eigen::Index n = x.rows(), d = x.cols();
  FeatureMatrix<S> y(n, d);
  Vector<S> inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const S mean = x.row(i).mean();
    const S var = (x.row(i).array() - mean).square().sum() / S(d);
    const S is = S(1) / std::sqrt(var + S(kLayerNormEps));
    inv_std(i) = is;
    y.row(i) = (x.row(i).array() - mean) * is;
  }
  if (cache) {
    cache->normalized = y;
    cache->inv_std = std::move(inv_std);
  }
  for (Eigen::Index i = 0; i < n; ++i)
    y.row(i) = y.row(i).array() * p.scale.transpose().array() + p.shift.transpose().array();
  return y;
}

template <typename S>
FeatureMatrix<S> layerNormBackward(const LayerNormCache<S>& cache, const LayerNormParams<S>& p,
                                   const FeatureMatrix<S>& gy, LayerNormParams<S>& gp) {
  const Eigen::Index n = gy.rows(), d = gy.cols();
  FeatureMatrix<S> gx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    gp.shift += gy.row(i).transpose();
    gp.scale.array() += gy.row(i).transpose().array() * cache.normalized.row(i).transpose().array();
    // d/dx of (x - mean) * inv_std with inv_std depending on x
    Eigen::Array<S, 1, Eigen::Dynamic> gh = gy.row(i).array() * p.scale.transpose().array();
    const S gh_mean = gh.mean();
    const S ghx_mean = (gh * cache.normalized.row(i).array()).mean();
    gx.row(i) = (gh - gh_mean - cache.normalized.row(i).array() * ghx_mean) * cache.inv_std(i);
  }
  return gx;
}

}  // namespace npcc
