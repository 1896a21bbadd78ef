#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "blobvid/attention.hpp"
#include "blobvid/blob_video.hpp"
#include "blobvid/embedding.hpp"
#include "blobvid/mask_builder.hpp"

namespace blobvid {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor for the relative error, so entries that are zero up to
  // finite-difference noise are compared absolutely.
  double denom_floor = 1e-5;
};

struct GradCheckEntry {
  std::string op;
  int instance = 0;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed = true;
};

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Compares analytic gradients against central differences of `loss` for every scalar
// in `params`. `params[i]` points at a live input; `analytic[i]` is its gradient.
inline double compare_gradients(const std::function<double()>& loss, std::vector<double*> params,
                                const std::vector<double>& analytic, const GradCheckOptions& opt) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& x = *params[i];
    const double orig = x;
    x = orig + opt.step;
    const double up = loss();
    x = orig - opt.step;
    const double down = loss();
    x = orig;
    const double numeric = (up - down) / (2.0 * opt.step);
    worst = std::max(worst, relative_error(analytic[i], numeric, opt.denom_floor));
  }
  return worst;
}

inline double inner(const TensorD& a, const TensorD& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace detail {

inline void collect(TensorD& x, const TensorD& gx, std::vector<double*>& ptrs,
                    std::vector<double>& grads) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    ptrs.push_back(&x[i]);
    grads.push_back(gx[i]);
  }
}

inline BinaryMask random_mask(Rng& rng, int h, int w, double p_on) {
  BinaryMask m(h, w);
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i, rng.uniform() < p_on);
  return m;
}

}  // namespace detail

// Random blob video with N tracks on a W x H frame, dense over T frames.
inline BlobVideo random_blob_video(Rng& rng, int frames, int tracks, FrameGeometry geom = {64, 64}) {
  BlobVideo v;
  v.num_frames = frames;
  v.geom = geom;
  for (int n = 0; n < tracks; ++n) {
    BlobTrack tr;
    tr.id = std::to_string(n);
    for (int t = 0; t < frames; ++t) {
      BlobParams p{rng.uniform(0, geom.width), rng.uniform(0, geom.height),
                   rng.uniform(0.1, 0.5) * geom.width, rng.uniform(0.1, 0.4) * geom.height,
                   rng.uniform(-kPi, kPi)};
      tr.params[t] = canonicalize(p);
    }
    v.tracks.push_back(std::move(tr));
  }
  return v;
}

inline GradCheckEntry check_cross_attention(std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const int n_blobs = rng.uniform_int(1, 3);
  const int hw_side = rng.uniform_int(2, 4);
  const std::size_t dg = static_cast<std::size_t>(rng.uniform_int(2, 8));
  const std::size_t d = static_cast<std::size_t>(rng.uniform_int(2, 8));
  TensorD g = rng.normal_matrix(static_cast<std::size_t>(hw_side * hw_side), dg);
  CrossAttnWeights<double> w;
  w.wq = rng.normal_matrix(dg, dg, 0.5);
  std::vector<TensorD> blobs;
  std::vector<BinaryMask> masks;
  for (int n = 0; n < n_blobs; ++n) {
    blobs.push_back(rng.normal_matrix(static_cast<std::size_t>(rng.uniform_int(1, 4)), d));
    w.wk.push_back(rng.normal_matrix(d, dg, 0.5));
    w.wv.push_back(rng.normal_matrix(d, dg, 0.5));
    masks.push_back(detail::random_mask(rng, hw_side, hw_side, 0.6));
  }
  const TensorD up = rng.normal_matrix(g.rows(), dg);

  const auto grads = masked_cross_attention_backward(g, blobs, masks, w, up);
  std::vector<double*> ptrs;
  std::vector<double> an;
  detail::collect(g, grads.g, ptrs, an);
  detail::collect(w.wq, grads.weights.wq, ptrs, an);
  for (int n = 0; n < n_blobs; ++n) {
    detail::collect(blobs[n], grads.blobs[n], ptrs, an);
    detail::collect(w.wk[n], grads.weights.wk[n], ptrs, an);
    detail::collect(w.wv[n], grads.weights.wv[n], ptrs, an);
  }
  auto loss = [&] { return inner(up, masked_cross_attention(g, blobs, masks, w)); };
  GradCheckEntry e{"masked_cross_attention", 0, ptrs.size(), 0.0, true};
  e.max_rel_error = compare_gradients(loss, ptrs, an, opt);
  e.passed = e.max_rel_error < opt.tolerance;
  return e;
}

inline GradCheckEntry check_self_attention(std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const int frames = rng.uniform_int(1, 3);
  const int side = rng.uniform_int(2, 3);
  const std::size_t d = static_cast<std::size_t>(rng.uniform_int(2, 6));
  const BlobVideo v = random_blob_video(rng, frames, rng.uniform_int(1, 3));
  const AttnMask3D mask(build_label_field(v, side, side));
  TensorD g = rng.normal_matrix(mask.size(), d);
  SelfAttnWeights<double> w{rng.normal_matrix(d, d, 0.5), rng.normal_matrix(d, d, 0.5),
                            rng.normal_matrix(d, d, 0.5)};
  const TensorD up = rng.normal_matrix(g.rows(), d);

  const auto grads = masked_3d_self_attention_backward(g, mask, w, up);
  std::vector<double*> ptrs;
  std::vector<double> an;
  detail::collect(g, grads.g, ptrs, an);
  detail::collect(w.wq, grads.weights.wq, ptrs, an);
  detail::collect(w.wk, grads.weights.wk, ptrs, an);
  detail::collect(w.wv, grads.weights.wv, ptrs, an);
  auto loss = [&] { return inner(up, masked_3d_self_attention(g, mask, w)); };
  GradCheckEntry e{"masked_3d_self_attention", 0, ptrs.size(), 0.0, true};
  e.max_rel_error = compare_gradients(loss, ptrs, an, opt);
  e.passed = e.max_rel_error < opt.tolerance;
  return e;
}

inline GradCheckEntry check_gated_fuse(std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const std::size_t rows = static_cast<std::size_t>(rng.uniform_int(1, 6));
  const std::size_t cols = static_cast<std::size_t>(rng.uniform_int(1, 6));
  TensorD x = rng.normal_matrix(rows, cols);
  TensorD a = rng.normal_matrix(rows, cols);
  double gamma = rng.uniform(-2.0, 2.0);
  const TensorD up = rng.normal_matrix(rows, cols);

  const auto grads = gated_fuse_backward(x, a, gamma, up);
  std::vector<double*> ptrs;
  std::vector<double> an;
  detail::collect(x, grads.x, ptrs, an);
  detail::collect(a, grads.attn_out, ptrs, an);
  ptrs.push_back(&gamma);
  an.push_back(grads.gamma);
  auto loss = [&] { return inner(up, gated_fuse(x, a, gamma)); };
  GradCheckEntry e{"gated_fuse", 0, ptrs.size(), 0.0, true};
  e.max_rel_error = compare_gradients(loss, ptrs, an, opt);
  e.passed = e.max_rel_error < opt.tolerance;
  return e;
}

inline GradCheckEntry check_blob_embed(std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const std::size_t half = static_cast<std::size_t>(rng.uniform_int(2, 5));
  const std::size_t tokens = static_cast<std::size_t>(rng.uniform_int(1, 4));
  TensorD tau = rng.normal_matrix(1, half);
  std::vector<double> e_tau(tau.data());
  TensorD e_s = rng.normal_matrix(tokens, half);
  MlpWeights mlp = MlpWeights::seeded(2 * half, seed ^ 0x5eedull);
  const TensorD up = rng.normal_matrix(tokens, 2 * half);

  const auto grads = blob_embed_backward(e_tau, e_s, mlp, up);
  std::vector<double*> ptrs;
  std::vector<double> an;
  for (std::size_t i = 0; i < half; ++i) {
    ptrs.push_back(&e_tau[i]);
    an.push_back(grads.e_tau[i]);
  }
  detail::collect(e_s, grads.e_s, ptrs, an);
  detail::collect(mlp.w1, grads.mlp.w1, ptrs, an);
  detail::collect(mlp.b1, grads.mlp.b1, ptrs, an);
  detail::collect(mlp.w2, grads.mlp.w2, ptrs, an);
  detail::collect(mlp.b2, grads.mlp.b2, ptrs, an);
  auto loss = [&] { return inner(up, blob_embed(e_tau, e_s, mlp)); };
  GradCheckEntry e{"blob_embed", 0, ptrs.size(), 0.0, true};
  e.max_rel_error = compare_gradients(loss, ptrs, an, opt);
  e.passed = e.max_rel_error < opt.tolerance;
  return e;
}

// Runs every check on `instances` seeded instances derived from `seed`.
inline GradCheckReport run_gradcheck(std::uint64_t seed, int instances,
                                     const GradCheckOptions& opt = {}) {
  GradCheckReport rep;
  using Check = GradCheckEntry (*)(std::uint64_t, const GradCheckOptions&);
  const Check checks[] = {check_cross_attention, check_self_attention, check_gated_fuse,
                          check_blob_embed};
  for (int i = 0; i < instances; ++i) {
    for (std::size_t c = 0; c < std::size(checks); ++c) {
      GradCheckEntry e = checks[c](seed * 1000003ull + static_cast<std::uint64_t>(i) * 17 + c, opt);
      e.instance = i;
      rep.max_rel_error = std::max(rep.max_rel_error, e.max_rel_error);
      rep.passed = rep.passed && e.passed;
      rep.entries.push_back(std::move(e));
    }
  }
  return rep;
}

}  // namespace blobvid
