#pragma once

#include <array>
#include <vector>

#include "npcc/knn.hpp"
#include "npcc/nn/layers.hpp"
#include "npcc/types.hpp"

namespace npcc {

/// Sparse 3x3x3 convolution kernel: one d_out x d_in slice per offset,
/// ordered lexicographically over (dz, dy, dx). The transposed stride-2
/// upscaling convolution uses a single slice.
template <typename S>
struct SconvWeights {
  std::vector<FeatureMatrix<S>> kernel;  // 27 slices (or 1 for TSConv)
  Vector<S> bias;                        // d_out

  Eigen::Index inDim() const { return kernel.empty() ? 0 : kernel.front().cols(); }
  Eigen::Index outDim() const { return kernel.empty() ? 0 : kernel.front().rows(); }

  void setZero() {
    for (auto& k : kernel) k.setZero();
    bias.setZero();
  }
};

template <typename S>
SconvWeights<S> makeSconv(Eigen::Index out, Eigen::Index in, int slices, Rng& rng) {
  SconvWeights<S> w;
  w.kernel.reserve(size_t(slices));
  const double bound = std::sqrt(6.0 / double(in * slices + out));
  for (int s = 0; s < slices; ++s) {
    FeatureMatrix<S> k(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) k(r, c) = S(rng.uniform(-bound, bound));
    w.kernel.push_back(std::move(k));
  }
  w.bias = Vector<S>::Zero(out);
  return w;
}

/// Slice-major schedule for a fixed geometry: for every kernel slice, the
/// (destination, source) row pairs it touches. Built once per coordinate
/// set and shared by every convolution evaluated on it.
struct SconvPlan {
  std::array<std::vector<int32_t>, 27> dst;
  std::array<std::vector<int32_t>, 27> src;
  Eigen::Index rows = 0;
};

inline SconvPlan buildSconvPlan(const OffsetMap& map, Eigen::Index rows) {
  SconvPlan plan;
  plan.rows = rows;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (int32_t e = map.begin[size_t(i)]; e < map.begin[size_t(i) + 1]; ++e) {
      const int s = map.slice[size_t(e)];
      plan.dst[size_t(s)].push_back(int32_t(i));
      plan.src[size_t(s)].push_back(map.neighbor[size_t(e)]);
    }
  }
  return plan;
}

/// f_out(u) = sum over occupied offsets i of W_i * f_in(u + i), plus bias.
template <typename S>
FeatureMatrix<S> sconvForward(const FeatureMatrix<S>& x, const SconvPlan& plan,
                              const SconvWeights<S>& w) {
  if (w.kernel.size() != 27) throw ShapeError("sconv: expected a 3x3x3 kernel");
  if (x.cols() != w.inDim()) throw ShapeError("sconv: input dimension mismatch");
  if (x.rows() != plan.rows) throw ShapeError("sconv: plan built for different geometry");
  FeatureMatrix<S> y(x.rows(), w.outDim());
  y.rowwise() = w.bias.transpose();
  FeatureMatrix<S> gathered, contrib;
  for (int s = 0; s < 27; ++s) {
    const auto& src = plan.src[size_t(s)];
    const auto& dst = plan.dst[size_t(s)];
    if (src.empty()) continue;
    gathered.resize(Eigen::Index(src.size()), x.cols());
    for (size_t e = 0; e < src.size(); ++e) gathered.row(Eigen::Index(e)) = x.row(src[e]);
    contrib.noalias() = gathered * w.kernel[size_t(s)].transpose();
    for (size_t e = 0; e < dst.size(); ++e) y.row(dst[e]) += contrib.row(Eigen::Index(e));
  }
  return y;
}

template <typename S>
FeatureMatrix<S> sconvBackward(const FeatureMatrix<S>& x, const SconvPlan& plan,
                               const SconvWeights<S>& w, const FeatureMatrix<S>& gy,
                               SconvWeights<S>& gw) {
  FeatureMatrix<S> gx = FeatureMatrix<S>::Zero(x.rows(), x.cols());
  gw.bias.noalias() += gy.colwise().sum().transpose();
  FeatureMatrix<S> gy_rows, x_rows, back;
  for (int s = 0; s < 27; ++s) {
    const auto& src = plan.src[size_t(s)];
    const auto& dst = plan.dst[size_t(s)];
    if (src.empty()) continue;
    gy_rows.resize(Eigen::Index(dst.size()), gy.cols());
    x_rows.resize(Eigen::Index(src.size()), x.cols());
    for (size_t e = 0; e < dst.size(); ++e) {
      gy_rows.row(Eigen::Index(e)) = gy.row(dst[e]);
      x_rows.row(Eigen::Index(e)) = x.row(src[e]);
    }
    gw.kernel[size_t(s)].noalias() += gy_rows.transpose() * x_rows;
    back.noalias() = gy_rows * w.kernel[size_t(s)];
    for (size_t e = 0; e < src.size(); ++e) gx.row(src[e]) += back.row(Eigen::Index(e));
  }
  return gx;
}

/// Transposed stride-2 convolution with a 1x1x1 kernel: every child of
/// parent u receives W * f(u) + bias. `parent` maps child row -> parent row.
template <typename S>
FeatureMatrix<S> tsconvUpscale(const FeatureMatrix<S>& parent_feats, const IndexVector& parent,
                               const SconvWeights<S>& w) {
  if (w.kernel.size() != 1) throw ShapeError("tsconv: expected a single kernel slice");
  if (parent_feats.cols() != w.inDim()) throw ShapeError("tsconv: input dimension mismatch");
  FeatureMatrix<S> projected = parent_feats * w.kernel[0].transpose();
  projected.rowwise() += w.bias.transpose();
  FeatureMatrix<S> y(parent.size(), w.outDim());
  for (Eigen::Index c = 0; c < parent.size(); ++c) y.row(c) = projected.row(parent(c));
  return y;
}

template <typename S>
FeatureMatrix<S> tsconvBackward(const FeatureMatrix<S>& parent_feats, const IndexVector& parent,
                                const SconvWeights<S>& w, const FeatureMatrix<S>& gy,
                                SconvWeights<S>& gw) {
  FeatureMatrix<S> gprojected = FeatureMatrix<S>::Zero(parent_feats.rows(), w.outDim());
  for (Eigen::Index c = 0; c < parent.size(); ++c) gprojected.row(parent(c)) += gy.row(c);
  gw.kernel[0].noalias() += gprojected.transpose() * parent_feats;
  gw.bias.noalias() += gprojected.colwise().sum().transpose();
  return gprojected * w.kernel[0];
}

}  // namespace npcc
