#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "blobvid/blob.hpp"
#include "blobvid/mask_builder.hpp"
#include "blobvid/parallel.hpp"
#include "blobvid/tensor.hpp"

namespace blobvid {

// Per-blob key/value projections (d x d_g) and a shared query projection (d_g x d_g).
template <class T>
struct CrossAttnWeights {
  Tensor<T> wq;
  std::vector<Tensor<T>> wk;
  std::vector<Tensor<T>> wv;
};

// Shared d x d projections for 3D self-attention.
template <class T>
struct SelfAttnWeights {
  Tensor<T> wq, wk, wv;
};

struct AttnStats {
  double max_row_sum_error = 0.0;  // |sum(p) - 1| over rows with at least one key
  std::size_t empty_rows = 0;      // rows with no admissible key (zero output)
};

namespace detail {

// Numerically stable softmax over `logits` in place; returns the sum before normalization.
template <class T>
void softmax_inplace(std::vector<T>& logits) {
  if (logits.empty()) return;
  const T mx = *std::max_element(logits.begin(), logits.end());
  T sum = 0;
  for (auto& x : logits) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (auto& x : logits) x /= sum;
}

template <class T>
void check_cross_inputs(const Tensor<T>& g, const std::vector<Tensor<T>>& blobs,
                        const std::vector<BinaryMask>& masks, const CrossAttnWeights<T>& w) {
  if (g.rank() != 2) throw Error(Errc::shape, "visual features must be hw x d_g");
  const std::size_t dg = g.cols();
  require_shape(w.wq, dg, dg, "Wq");
  if (blobs.size() != masks.size() || blobs.size() != w.wk.size() || blobs.size() != w.wv.size())
    throw Error(Errc::shape, "blob embeddings, masks and per-blob weights must have equal counts");
  for (std::size_t n = 0; n < blobs.size(); ++n) {
    if (blobs[n].rank() != 2) throw Error(Errc::shape, "blob embedding must be L x d");
    require_shape(w.wk[n], blobs[n].cols(), dg, "Wk");
    require_shape(w.wv[n], blobs[n].cols(), dg, "Wv");
    if (masks[n].size() != g.rows())
      throw Error(Errc::shape, "mask " + std::to_string(n) + " has " +
                                   std::to_string(masks[n].size()) + " cells, features have " +
                                   std::to_string(g.rows()) + " rows");
  }
}

// Keys/values stacked over blobs, with the owning blob of every stacked row.
template <class T>
struct StackedKV {
  Tensor<T> q, k, v;
  std::vector<std::size_t> owner;
  std::vector<std::size_t> offset;  // first stacked row of blob n
};

template <class T>
StackedKV<T> cross_projections(const Tensor<T>& g, const std::vector<Tensor<T>>& blobs,
                               const CrossAttnWeights<T>& w) {
  StackedKV<T> s;
  const std::size_t dg = g.cols();
  s.q = matmul(g, w.wq);
  std::size_t total = 0;
  for (const auto& b : blobs) total += b.rows();
  s.k = Tensor<T>::matrix(total, dg);
  s.v = Tensor<T>::matrix(total, dg);
  std::size_t row = 0;
  for (std::size_t n = 0; n < blobs.size(); ++n) {
    s.offset.push_back(row);
    const Tensor<T> kn = matmul(blobs[n], w.wk[n]);
    const Tensor<T> vn = matmul(blobs[n], w.wv[n]);
    for (std::size_t l = 0; l < blobs[n].rows(); ++l, ++row) {
      std::copy(kn.row(l), kn.row(l) + dg, s.k.row(row));
      std::copy(vn.row(l), vn.row(l) + dg, s.v.row(row));
      s.owner.push_back(n);
    }
  }
  return s;
}

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

// Masked cross-attention: location j attends to the stacked keys of every blob whose
// mask covers j, with logits scaled by 1/sqrt(d_g). Locations covered by no blob get 0.
template <class T>
Tensor<T> masked_cross_attention(const Tensor<T>& g, const std::vector<Tensor<T>>& blobs,
                                 const std::vector<BinaryMask>& masks,
                                 const CrossAttnWeights<T>& w, AttnStats* stats = nullptr,
                                 int threads = 1) {
  detail::check_cross_inputs(g, blobs, masks, w);
  const std::size_t hw = g.rows();
  const std::size_t dg = g.cols();
  const auto s = detail::cross_projections(g, blobs, w);
  const T scale = T(1) / std::sqrt(static_cast<T>(dg));
  Tensor<T> out = Tensor<T>::matrix(hw, dg);
  std::vector<double> row_err(hw, 0.0);
  std::vector<char> empty(hw, 0);

  parallel_for(hw, threads, [&](std::size_t j) {
    std::vector<std::size_t> keys;
    for (std::size_t r = 0; r < s.owner.size(); ++r)
      if (masks[s.owner[r]][j]) keys.push_back(r);
    if (keys.empty()) {
      empty[j] = 1;
      return;
    }
    std::vector<T> p(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i)
      p[i] = detail::dot(s.q.row(j), s.k.row(keys[i]), dg) * scale;
    detail::softmax_inplace(p);
    T sum = 0;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      sum += p[i];
      const T* vr = s.v.row(keys[i]);
      for (std::size_t c = 0; c < dg; ++c) out(j, c) += p[i] * vr[c];
    }
    row_err[j] = std::abs(static_cast<double>(sum) - 1.0);
  });

  if (stats) {
    for (std::size_t j = 0; j < hw; ++j) {
      stats->max_row_sum_error = std::max(stats->max_row_sum_error, row_err[j]);
      stats->empty_rows += empty[j] ? 1 : 0;
    }
  }
  return out;
}

template <class T>
struct CrossAttnGrads {
  Tensor<T> g;
  std::vector<Tensor<T>> blobs;
  CrossAttnWeights<T> weights;
};

// Gradients of <upstream, masked_cross_attention(...)> with respect to every input.
template <class T>
CrossAttnGrads<T> masked_cross_attention_backward(const Tensor<T>& g,
                                                  const std::vector<Tensor<T>>& blobs,
                                                  const std::vector<BinaryMask>& masks,
                                                  const CrossAttnWeights<T>& w,
                                                  const Tensor<T>& upstream) {
  detail::check_cross_inputs(g, blobs, masks, w);
  require_same_shape(g, upstream, "upstream gradient");
  const std::size_t hw = g.rows();
  const std::size_t dg = g.cols();
  const auto s = detail::cross_projections(g, blobs, w);
  const T scale = T(1) / std::sqrt(static_cast<T>(dg));

  Tensor<T> dq = Tensor<T>::matrix(hw, dg);
  Tensor<T> dk = Tensor<T>::matrix(s.k.rows(), dg);
  Tensor<T> dv = Tensor<T>::matrix(s.v.rows(), dg);

  for (std::size_t j = 0; j < hw; ++j) {
    std::vector<std::size_t> keys;
    for (std::size_t r = 0; r < s.owner.size(); ++r)
      if (masks[s.owner[r]][j]) keys.push_back(r);
    if (keys.empty()) continue;
    std::vector<T> p(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i)
      p[i] = detail::dot(s.q.row(j), s.k.row(keys[i]), dg) * scale;
    detail::softmax_inplace(p);

    const T* dout = upstream.row(j);
    std::vector<T> dp(keys.size());
    T weighted = 0;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      dp[i] = detail::dot(dout, s.v.row(keys[i]), dg);
      weighted += p[i] * dp[i];
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const T dlogit = p[i] * (dp[i] - weighted) * scale;
      const T* kr = s.k.row(keys[i]);
      T* dkr = dk.row(keys[i]);
      T* dvr = dv.row(keys[i]);
      for (std::size_t c = 0; c < dg; ++c) {
        dq(j, c) += dlogit * kr[c];
        dkr[c] += dlogit * s.q(j, c);
        dvr[c] += p[i] * dout[c];
      }
    }
  }

  CrossAttnGrads<T> out;
  out.g = matmul_nt(dq, w.wq);
  out.weights.wq = matmul_tn(g, dq);
  for (std::size_t n = 0; n < blobs.size(); ++n) {
    const std::size_t L = blobs[n].rows();
    Tensor<T> dkn = Tensor<T>::matrix(L, dg);
    Tensor<T> dvn = Tensor<T>::matrix(L, dg);
    for (std::size_t l = 0; l < L; ++l) {
      std::copy(dk.row(s.offset[n] + l), dk.row(s.offset[n] + l) + dg, dkn.row(l));
      std::copy(dv.row(s.offset[n] + l), dv.row(s.offset[n] + l) + dg, dvn.row(l));
    }
    out.weights.wk.push_back(matmul_tn(blobs[n], dkn));
    out.weights.wv.push_back(matmul_tn(blobs[n], dvn));
    Tensor<T> de = matmul_nt(dkn, w.wk[n]);
    add_inplace(de, matmul_nt(dvn, w.wv[n]));
    out.blobs.push_back(std::move(de));
  }
  return out;
}

// ---- masked 3D self-attention ------------------------------------------------

namespace detail {

template <class T>
void check_self_inputs(const Tensor<T>& g, const AttnMask3D& m, const SelfAttnWeights<T>& w) {
  if (g.rank() != 2) throw Error(Errc::shape, "features must be Thw x d");
  if (g.rows() != m.size())
    throw Error(Errc::shape, "features have " + std::to_string(g.rows()) +
                                 " rows but the mask covers " + std::to_string(m.size()) +
                                 " positions");
  require_shape(w.wq, g.cols(), g.cols(), "Wq");
  require_shape(w.wk, g.cols(), g.cols(), "Wk");
  require_shape(w.wv, g.cols(), g.cols(), "Wv");
}

}  // namespace detail

// softmax(q k^T / sqrt(d) + M) v with M taken from the label-field intersection query.
// Masked entries get exactly zero weight; the diagonal is always admissible.
template <class T>
Tensor<T> masked_3d_self_attention(const Tensor<T>& g, const AttnMask3D& m,
                                   const SelfAttnWeights<T>& w, AttnStats* stats = nullptr,
                                   int threads = 1) {
  detail::check_self_inputs(g, m, w);
  const std::size_t n = g.rows();
  const std::size_t d = g.cols();
  const Tensor<T> q = matmul(g, w.wq);
  const Tensor<T> k = matmul(g, w.wk);
  const Tensor<T> v = matmul(g, w.wv);
  const T scale = T(1) / std::sqrt(static_cast<T>(d));
  Tensor<T> out = Tensor<T>::matrix(n, d);
  std::vector<double> row_err(n, 0.0);

  parallel_for(n, threads, [&](std::size_t i) {
    std::vector<std::size_t> keys;
    for (std::size_t j = 0; j < n; ++j)
      if (m.field().shares_label(i, j)) keys.push_back(j);
    std::vector<T> p(keys.size());
    for (std::size_t a = 0; a < keys.size(); ++a)
      p[a] = detail::dot(q.row(i), k.row(keys[a]), d) * scale;
    detail::softmax_inplace(p);
    T sum = 0;
    for (std::size_t a = 0; a < keys.size(); ++a) {
      sum += p[a];
      const T* vr = v.row(keys[a]);
      for (std::size_t c = 0; c < d; ++c) out(i, c) += p[a] * vr[c];
    }
    row_err[i] = std::abs(static_cast<double>(sum) - 1.0);
  });

  if (stats)
    for (double e : row_err) stats->max_row_sum_error = std::max(stats->max_row_sum_error, e);
  return out;
}

template <class T>
struct SelfAttnGrads {
  Tensor<T> g;
  SelfAttnWeights<T> weights;
};

template <class T>
SelfAttnGrads<T> masked_3d_self_attention_backward(const Tensor<T>& g, const AttnMask3D& m,
                                                   const SelfAttnWeights<T>& w,
                                                   const Tensor<T>& upstream) {
  detail::check_self_inputs(g, m, w);
  require_same_shape(g, upstream, "upstream gradient");
  const std::size_t n = g.rows();
  const std::size_t d = g.cols();
  const Tensor<T> q = matmul(g, w.wq);
  const Tensor<T> k = matmul(g, w.wk);
  const Tensor<T> v = matmul(g, w.wv);
  const T scale = T(1) / std::sqrt(static_cast<T>(d));

  Tensor<T> dq = Tensor<T>::matrix(n, d);
  Tensor<T> dk = Tensor<T>::matrix(n, d);
  Tensor<T> dv = Tensor<T>::matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> keys;
    for (std::size_t j = 0; j < n; ++j)
      if (m.field().shares_label(i, j)) keys.push_back(j);
    std::vector<T> p(keys.size());
    for (std::size_t a = 0; a < keys.size(); ++a)
      p[a] = detail::dot(q.row(i), k.row(keys[a]), d) * scale;
    detail::softmax_inplace(p);

    const T* dout = upstream.row(i);
    std::vector<T> dp(keys.size());
    T weighted = 0;
    for (std::size_t a = 0; a < keys.size(); ++a) {
      dp[a] = detail::dot(dout, v.row(keys[a]), d);
      weighted += p[a] * dp[a];
    }
    for (std::size_t a = 0; a < keys.size(); ++a) {
      const std::size_t j = keys[a];
      const T dlogit = p[a] * (dp[a] - weighted) * scale;
      for (std::size_t c = 0; c < d; ++c) {
        dq(i, c) += dlogit * k(j, c);
        dk(j, c) += dlogit * q(i, c);
        dv(j, c) += p[a] * dout[c];
      }
    }
  }

  SelfAttnGrads<T> out;
  out.g = matmul_nt(dq, w.wq);
  add_inplace(out.g, matmul_nt(dk, w.wk));
  add_inplace(out.g, matmul_nt(dv, w.wv));
  out.weights.wq = matmul_tn(g, dq);
  out.weights.wk = matmul_tn(g, dk);
  out.weights.wv = matmul_tn(g, dv);
  return out;
}

// ---- gated residual ----------------------------------------------------------

// x + tanh(gamma) * attn_out; gamma = 0 leaves x untouched.
template <class T>
Tensor<T> gated_fuse(const Tensor<T>& x, const Tensor<T>& attn_out, T gamma) {
  require_same_shape(x, attn_out, "gated_fuse");
  const T gate = std::tanh(gamma);
  Tensor<T> out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += gate * attn_out[i];
  return out;
}

template <class T>
struct GatedFuseGrads {
  Tensor<T> x, attn_out;
  T gamma = 0;
};

template <class T>
GatedFuseGrads<T> gated_fuse_backward(const Tensor<T>& x, const Tensor<T>& attn_out, T gamma,
                                      const Tensor<T>& upstream) {
  require_same_shape(x, attn_out, "gated_fuse");
  require_same_shape(x, upstream, "upstream gradient");
  const T gate = std::tanh(gamma);
  GatedFuseGrads<T> g;
  g.x = upstream;
  g.attn_out = upstream;
  T acc = 0;
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    g.attn_out[i] *= gate;
    acc += upstream[i] * attn_out[i];
  }
  g.gamma = (T(1) - gate * gate) * acc;
  return g;
}

}  // namespace blobvid
