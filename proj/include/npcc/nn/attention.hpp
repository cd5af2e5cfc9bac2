#pragma once

#include <vector>

#include "npcc/knn.hpp"
#include "npcc/nn/layers.hpp"

namespace npcc {

/// Neighborhood point attention. Queries are projected from the input
/// features; keys and values are projected from the neighbor features
/// concatenated with the relative integer offset (the position embedding),
/// so W_K and W_V act on d_in + 3 columns. Heads keep separate projections;
/// logits are scaled by 1/sqrt(cph) per head.
template <typename S>
struct NpaLayerWeights {
  std::vector<LinearWeights<S>> wq;  // per head: cph x d_in
  std::vector<LinearWeights<S>> wk;  // per head: cph x (d_in + 3)
  std::vector<LinearWeights<S>> wv;  // per head: cph x (d_in + 3)
  LinearWeights<S> out_proj;         // d_out x (heads * cph)
  int heads = 1;
  int cph = 32;

  int embedDim() const { return heads * cph; }
};

template <typename S>
NpaLayerWeights<S> makeNpaLayer(Eigen::Index d_in, Eigen::Index d_out, int heads, int cph,
                                Rng& rng) {
  NpaLayerWeights<S> w;
  w.heads = heads;
  w.cph = cph;
  for (int h = 0; h < heads; ++h) {
    w.wq.push_back(makeLinear<S>(cph, d_in, rng));
    w.wk.push_back(makeLinear<S>(cph, d_in + 3, rng));
    w.wv.push_back(makeLinear<S>(cph, d_in + 3, rng));
  }
  w.out_proj = makeLinear<S>(d_out, heads * cph, rng);
  return w;
}

template <typename S>
struct NpaCache {
  std::vector<FeatureMatrix<S>> q, kf, vf;  // per head, N x cph
  std::vector<FeatureMatrix<S>> attn;       // per head, N x k (masked entries 0)
  std::vector<FeatureMatrix<S>> abar3;      // per head, attention-weighted offsets
  FeatureMatrix<S> concat;                  // N x heads*cph
};

/// Gathers the neighbor features and appends the relative offsets:
/// F_e = concat(F_kNN, C_kNN - C_in), rows flattened as (i * k + j).
/// Masked entries are zero. Mostly useful for tests and the reference
/// path; the production forward folds the gather into the projections.
template <typename S>
FeatureMatrix<S> positionEmbed(const Neighborhood& nbh, const FeatureMatrix<S>& feats) {
  const Eigen::Index n = nbh.query_count, k = nbh.k, d = feats.cols();
  FeatureMatrix<S> fe = FeatureMatrix<S>::Zero(n * k, d + 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < nbh.valid_per_row; ++j) {
      auto row = fe.row(i * k + j);
      row.head(d) = feats.row(nbh.indices(i, j));
      const int32_t* r = nbh.rel(i, int(j));
      row(d) = S(r[0]);
      row(d + 1) = S(r[1]);
      row(d + 2) = S(r[2]);
    }
  }
  return fe;
}

/// NPA forward: softmax(Q K^T / sqrt(cph)) V per query over its valid
/// neighbors, heads concatenated, then the output projection. The key and
/// value of neighbor j split into a per-point part (projected once for all
/// queries) and an offset part folded into the logits, which keeps the
/// cost at O(N k cph) per head.
template <typename S>
FeatureMatrix<S> npaForward(const FeatureMatrix<S>& x, const Neighborhood& nbh,
                            const NpaLayerWeights<S>& w, NpaCache<S>* cache = nullptr) {
  const Eigen::Index n = x.rows(), d_in = x.cols();
  const int k = nbh.k, vp = nbh.valid_per_row;
  if (n != nbh.query_count) throw ShapeError("npa: neighborhood size mismatch");
  if (!w.wq.empty() && w.wq[0].inDim() != d_in) throw ShapeError("npa: input dim mismatch");

  FeatureMatrix<S> concat(n, w.embedDim());
  const S inv_scale = S(1.0 / std::sqrt(double(w.cph)));
  if (cache) {
    cache->q.resize(size_t(w.heads));
    cache->kf.resize(size_t(w.heads));
    cache->vf.resize(size_t(w.heads));
    cache->attn.resize(size_t(w.heads));
    cache->abar3.resize(size_t(w.heads));
  }

  Vector<S> logits(k), weights(k);
  for (int h = 0; h < w.heads; ++h) {
    const auto& wk = w.wk[size_t(h)];
    const auto& wv = w.wv[size_t(h)];
    const auto wkF = wk.weight.leftCols(d_in);
    const auto wkR = wk.weight.template rightCols<3>();
    const auto wvF = wv.weight.leftCols(d_in);
    const auto wvR = wv.weight.template rightCols<3>();

    FeatureMatrix<S> q = linearForward(x, w.wq[size_t(h)]);
    FeatureMatrix<S> kf = x * wkF.transpose();
    kf.rowwise() += wk.bias.transpose();
    FeatureMatrix<S> vf = x * wvF.transpose();
    vf.rowwise() += wv.bias.transpose();
    FeatureMatrix<S> qk3 = q * wkR;  // N x 3: offset contribution to logits

    FeatureMatrix<S> attn;
    FeatureMatrix<S> abar3(n, 3);
    if (cache) attn.setZero(n, k);
    auto out = concat.middleCols(Eigen::Index(h) * w.cph, w.cph);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < vp; ++j) {
        const int32_t idx = nbh.indices(i, j);
        const int32_t* r = nbh.rel(i, j);
        logits(j) = (q.row(i).dot(kf.row(idx)) +
                     qk3(i, 0) * S(r[0]) + qk3(i, 1) * S(r[1]) + qk3(i, 2) * S(r[2])) *
                    inv_scale;
      }
      const S m = logits.head(vp).maxCoeff();
      weights.head(vp) = (logits.head(vp).array() - m).exp();
      weights.head(vp) /= weights.head(vp).sum();

      Eigen::Matrix<S, 1, Eigen::Dynamic> acc = Eigen::Matrix<S, 1, Eigen::Dynamic>::Zero(w.cph);
      S rbar[3] = {S(0), S(0), S(0)};
      for (int j = 0; j < vp; ++j) {
        const S a = weights(j);
        acc += a * vf.row(nbh.indices(i, j));
        const int32_t* r = nbh.rel(i, j);
        rbar[0] += a * S(r[0]);
        rbar[1] += a * S(r[1]);
        rbar[2] += a * S(r[2]);
      }
      abar3(i, 0) = rbar[0];
      abar3(i, 1) = rbar[1];
      abar3(i, 2) = rbar[2];
      out.row(i) = acc + (wvR * Eigen::Matrix<S, 3, 1>(rbar[0], rbar[1], rbar[2])).transpose();
      if (cache) attn.row(i).head(vp) = weights.head(vp);
    }
    if (cache) {
      cache->q[size_t(h)] = std::move(q);
      cache->kf[size_t(h)] = std::move(kf);
      cache->vf[size_t(h)] = std::move(vf);
      cache->attn[size_t(h)] = std::move(attn);
      cache->abar3[size_t(h)] = std::move(abar3);
    }
  }
  FeatureMatrix<S> y = concat * w.out_proj.weight.transpose();
  y.rowwise() += w.out_proj.bias.transpose();
  if (cache) cache->concat = std::move(concat);
  return y;
}

template <typename S>
FeatureMatrix<S> npaBackward(const FeatureMatrix<S>& x, const Neighborhood& nbh,
                             const NpaLayerWeights<S>& w, const NpaCache<S>& cache,
                             const FeatureMatrix<S>& gy, NpaLayerWeights<S>& gw) {
  const Eigen::Index n = x.rows(), d_in = x.cols();
  const int vp = nbh.valid_per_row;
  const S inv_scale = S(1.0 / std::sqrt(double(w.cph)));

  gw.out_proj.weight.noalias() += gy.transpose() * cache.concat;
  gw.out_proj.bias.noalias() += gy.colwise().sum().transpose();
  FeatureMatrix<S> gconcat = gy * w.out_proj.weight;

  FeatureMatrix<S> gx = FeatureMatrix<S>::Zero(n, d_in);
  Vector<S> ga(nbh.k), glogit(nbh.k);
  for (int h = 0; h < w.heads; ++h) {
    const auto& q = cache.q[size_t(h)];
    const auto& kf = cache.kf[size_t(h)];
    const auto& vf = cache.vf[size_t(h)];
    const auto& attn = cache.attn[size_t(h)];
    const auto wkR = w.wk[size_t(h)].weight.template rightCols<3>();
    const auto wvR = w.wv[size_t(h)].weight.template rightCols<3>();
    const auto gO = gconcat.middleCols(Eigen::Index(h) * w.cph, w.cph);

    FeatureMatrix<S> gq = FeatureMatrix<S>::Zero(n, w.cph);
    FeatureMatrix<S> gkf = FeatureMatrix<S>::Zero(n, w.cph);
    FeatureMatrix<S> gvf = FeatureMatrix<S>::Zero(n, w.cph);
    FeatureMatrix<S> gr3 = FeatureMatrix<S>::Zero(n, 3);  // sum_j glogit * rel
    Eigen::Matrix<S, Eigen::Dynamic, 3> gwkR = Eigen::Matrix<S, Eigen::Dynamic, 3>::Zero(w.cph, 3);
    Eigen::Matrix<S, Eigen::Dynamic, 3> gwvR = Eigen::Matrix<S, Eigen::Dynamic, 3>::Zero(w.cph, 3);

    for (Eigen::Index i = 0; i < n; ++i) {
      // value path: o_i = sum_j a_ij (vf_idx + wvR rel_ij)
      for (int j = 0; j < vp; ++j) {
        const int32_t idx = nbh.indices(i, j);
        const int32_t* r = nbh.rel(i, j);
        Eigen::Matrix<S, 3, 1> rel;
        rel << S(r[0]), S(r[1]), S(r[2]);
        ga(j) = gO.row(i).dot(vf.row(idx)) + gO.row(i) * (wvR * rel);
        gvf.row(idx) += attn(i, j) * gO.row(i);
      }
      gwvR.noalias() += gO.row(i).transpose() * cache.abar3[size_t(h)].row(i);

      // softmax backward over the valid entries
      const S dot = attn.row(i).head(vp).dot(ga.head(vp).transpose());
      glogit.head(vp) =
          attn.row(i).head(vp).transpose().array() * (ga.head(vp).array() - dot) * inv_scale;

      // logit path: logit = q_i . (kf_idx + wkR rel)
      for (int j = 0; j < vp; ++j) {
        const int32_t idx = nbh.indices(i, j);
        const int32_t* r = nbh.rel(i, j);
        Eigen::Matrix<S, 3, 1> rel;
        rel << S(r[0]), S(r[1]), S(r[2]);
        const S gl = glogit(j);
        gq.row(i) += gl * (kf.row(idx) + (wkR * rel).transpose());
        gkf.row(idx) += gl * q.row(i);
        gr3.row(i) += gl * rel.transpose();
      }
    }
    gwkR.noalias() += q.transpose() * gr3;

    // fold the projection gradients back to parameters and the input
    auto& gwq = gw.wq[size_t(h)];
    auto& gwk = gw.wk[size_t(h)];
    auto& gwv = gw.wv[size_t(h)];
    gwq.weight.noalias() += gq.transpose() * x;
    gwq.bias.noalias() += gq.colwise().sum().transpose();
    gwk.weight.leftCols(d_in).noalias() += gkf.transpose() * x;
    gwk.weight.template rightCols<3>().noalias() += gwkR;
    gwk.bias.noalias() += gkf.colwise().sum().transpose();
    gwv.weight.leftCols(d_in).noalias() += gvf.transpose() * x;
    gwv.weight.template rightCols<3>().noalias() += gwvR;
    gwv.bias.noalias() += gvf.colwise().sum().transpose();
    gx.noalias() += gq * w.wq[size_t(h)].weight;
    gx.noalias() += gkf * w.wk[size_t(h)].weight.leftCols(d_in);
    gx.noalias() += gvf * w.wv[size_t(h)].weight.leftCols(d_in);
  }
  return gx;
}

/// Transformer block around the NPA layer, pre-norm ordering:
/// x1 = x + NPA(Norm(x)); y = x1 + FFN(Norm(x1)).
template <typename S>
struct NpaformerWeights {
  NpaLayerWeights<S> npa;
  LayerNormParams<S> norm1, norm2;
  LinearWeights<S> ffn1, ffn2;  // d -> 2d -> d
};

template <typename S>
NpaformerWeights<S> makeNpaformer(Eigen::Index d, int heads, int cph, Rng& rng) {
  NpaformerWeights<S> w;
  w.npa = makeNpaLayer<S>(d, d, heads, cph, rng);
  w.norm1 = makeLayerNorm<S>(d);
  w.norm2 = makeLayerNorm<S>(d);
  w.ffn1 = makeLinear<S>(2 * d, d, rng);
  w.ffn2 = makeLinear<S>(d, 2 * d, rng);
  return w;
}

template <typename S>
struct NpaformerCache {
  LayerNormCache<S> ln1, ln2;
  FeatureMatrix<S> normed1;
  NpaCache<S> npa;
  FeatureMatrix<S> x1;
  FeatureMatrix<S> normed2;
  FeatureMatrix<S> ffn_pre;     // ffn1 output before relu
  FeatureMatrix<S> ffn_hidden;  // after relu
};

template <typename S>
FeatureMatrix<S> npaformerForward(const FeatureMatrix<S>& x, const Neighborhood& nbh,
                                  const NpaformerWeights<S>& w,
                                  NpaformerCache<S>* cache = nullptr) {
  LayerNormCache<S> ln1_local;
  FeatureMatrix<S> normed1 = layerNormForward(x, w.norm1, cache ? &cache->ln1 : &ln1_local);
  FeatureMatrix<S> x1 = x + npaForward(normed1, nbh, w.npa, cache ? &cache->npa : nullptr);
  LayerNormCache<S> ln2_local;
  FeatureMatrix<S> normed2 = layerNormForward(x1, w.norm2, cache ? &cache->ln2 : &ln2_local);
  FeatureMatrix<S> pre = linearForward(normed2, w.ffn1);
  FeatureMatrix<S> hidden = reluForward(pre);
  FeatureMatrix<S> y = x1 + linearForward(hidden, w.ffn2);
  if (cache) {
    cache->normed1 = std::move(normed1);
    cache->x1 = std::move(x1);
    cache->normed2 = std::move(normed2);
    cache->ffn_pre = std::move(pre);
    cache->ffn_hidden = std::move(hidden);
  }
  return y;
}

template <typename S>
FeatureMatrix<S> npaformerBackward(const FeatureMatrix<S>& x, const Neighborhood& nbh,
                                   const NpaformerWeights<S>& w, const NpaformerCache<S>& cache,
                                   const FeatureMatrix<S>& gy, NpaformerWeights<S>& gw) {
  FeatureMatrix<S> g_hidden = linearBackward(cache.ffn_hidden, w.ffn2, gy, gw.ffn2);
  FeatureMatrix<S> g_pre = reluBackward(cache.ffn_pre, g_hidden);
  FeatureMatrix<S> g_normed2 = linearBackward(cache.normed2, w.ffn1, g_pre, gw.ffn1);
  FeatureMatrix<S> g_x1 = gy + layerNormBackward(cache.ln2, w.norm2, g_normed2, gw.norm2);
  FeatureMatrix<S> g_normed1 = npaBackward(cache.normed1, nbh, w.npa, cache.npa, g_x1, gw.npa);
  return g_x1 + layerNormBackward(cache.ln1, w.norm1, g_normed1, gw.norm1);
}

}  // namespace npcc
