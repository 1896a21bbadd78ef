#pragma once

// Independent reference implementations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <unistd.h>

#include "blobvid/attention.hpp"
#include "blobvid/blob.hpp"
#include "blobvid/blob_video.hpp"
#include "blobvid/metrics.hpp"
#include "blobvid/tensor.hpp"

namespace oracle {

using blobvid::BinaryMask;
using blobvid::BlobParams;
using blobvid::FrameGeometry;
using blobvid::TensorD;

// Quadratic-form containment: d^T R diag(1/a^2, 1/b^2) R^T d <= 1.
inline bool inside(const BlobParams& p, double x, double y, double rho = 1.0) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  const double ia = 1.0 / (rho * rho * p.a * p.a), ib = 1.0 / (rho * rho * p.b * p.b);
  const double m00 = c * c * ia + s * s * ib;
  const double m11 = s * s * ia + c * c * ib;
  const double m01 = c * s * (ia - ib);
  const double dx = x - p.cx, dy = y - p.cy;
  return m00 * dx * dx + 2 * m01 * dx * dy + m11 * dy * dy <= 1.0;
}

inline BinaryMask rasterize(const BlobParams& p, const FrameGeometry& g, int h, int w, double rho = 1.0) {
  BinaryMask m(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (inside(p, (c + 0.5) * g.width / w, (r + 0.5) * g.height / h, rho)) m.set(r, c);
  return m;
}

// Cells whose centers sit within 1e-9 (in normalized radius) of the boundary, where
// the two containment formulas may legitimately disagree.
inline bool near_boundary(const BlobParams& p, double x, double y, double rho = 1.0) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  const double dx = x - p.cx, dy = y - p.cy;
  const double u = (dx * c + dy * s) / (rho * p.a), v = (-dx * s + dy * c) / (rho * p.b);
  return std::abs(u * u + v * v - 1.0) < 1e-9;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> e(z.size());
  double s = 0;
  for (std::size_t i = 0; i < z.size(); ++i) s += e[i] = std::exp(z[i] - mx);
  for (auto& x : e) x /= s;
  return e;
}

inline TensorD matmul(const TensorD& a, const TensorD& b) {
  TensorD out = TensorD::matrix(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

constexpr double kMasked = std::numeric_limits<double>::lowest();

// Dense attention with an explicit additive mask matrix (0 or lowest). Rows whose
// mask is entirely `lowest` produce zero.
inline TensorD dense_attention(const TensorD& q, const TensorD& k, const TensorD& v,
                               const std::vector<std::vector<double>>& mask, double scale) {
  TensorD out = TensorD::matrix(q.rows(), v.cols());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    bool any = false;
    std::vector<double> z(k.rows());
    for (std::size_t j = 0; j < k.rows(); ++j) {
      double s = 0;
      for (std::size_t c = 0; c < q.cols(); ++c) s += q(i, c) * k(j, c);
      z[j] = s * scale + mask[i][j];
      any = any || mask[i][j] == 0.0;
    }
    if (!any) continue;
    const auto p = softmax(z);
    for (std::size_t j = 0; j < k.rows(); ++j)
      for (std::size_t c = 0; c < v.cols(); ++c) out(i, c) += p[j] * v(j, c);
  }
  return out;
}

inline TensorD cross_attention(const TensorD& g, const std::vector<TensorD>& blobs,
                               const std::vector<BinaryMask>& masks,
                               const blobvid::CrossAttnWeights<double>& w) {
  std::vector<TensorD> ks, vs;
  std::size_t total = 0;
  for (std::size_t n = 0; n < blobs.size(); ++n) {
    ks.push_back(matmul(blobs[n], w.wk[n]));
    vs.push_back(matmul(blobs[n], w.wv[n]));
    total += blobs[n].rows();
  }
  const std::size_t dg = g.cols();
  TensorD k = TensorD::matrix(total, dg), v = TensorD::matrix(total, dg);
  std::vector<std::vector<double>> mask(g.rows(), std::vector<double>(total, kMasked));
  std::size_t row = 0;
  for (std::size_t n = 0; n < blobs.size(); ++n)
    for (std::size_t l = 0; l < blobs[n].rows(); ++l, ++row) {
      for (std::size_t c = 0; c < dg; ++c) {
        k(row, c) = ks[n](l, c);
        v(row, c) = vs[n](l, c);
      }
      for (std::size_t j = 0; j < g.rows(); ++j)
        if (masks[n][j]) mask[j][row] = 0.0;
    }
  return dense_attention(matmul(g, w.wq), k, v, mask, 1.0 / std::sqrt(static_cast<double>(dg)));
}

// Per-position label sets from scratch: object n if inside its ellipse at that frame,
// background (label N) if inside none.
inline std::vector<std::vector<int>> label_sets(const blobvid::BlobVideo& v, int h, int w, double rho = 1.0) {
  const int n_obj = static_cast<int>(v.tracks.size());
  std::vector<std::vector<int>> sets;
  for (int t = 0; t < v.num_frames; ++t)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        std::vector<int> s;
        const double x = (c + 0.5) * v.geom.width / w, y = (r + 0.5) * v.geom.height / h;
        for (int n = 0; n < n_obj; ++n)
          if (inside(v.tracks[n].params.at(t), x, y, rho)) s.push_back(n);
        if (s.empty()) s.push_back(n_obj);
        sets.push_back(s);
      }
  return sets;
}

// Additive mask: 0 iff some label is shared.
inline std::vector<std::vector<double>> dense_mask(const std::vector<std::vector<int>>& sets) {
  const std::size_t n = sets.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n, kMasked));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (int a : sets[i])
        if (std::find(sets[j].begin(), sets[j].end(), a) != sets[j].end()) m[i][j] = 0.0;
  return m;
}

inline TensorD self_attention(const TensorD& g, const std::vector<std::vector<double>>& mask,
                              const blobvid::SelfAttnWeights<double>& w) {
  return dense_attention(matmul(g, w.wq), matmul(g, w.wk), matmul(g, w.wv), mask,
                         1.0 / std::sqrt(static_cast<double>(g.cols())));
}

inline double max_abs_diff(const TensorD& a, const TensorD& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Best total IOU over every injective det->gt map, by permutation search.
inline double best_total_iou(const std::vector<blobvid::BBox>& dets, const std::vector<blobvid::BBox>& gts) {
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int l, int r) { return dets[l].confidence > dets[r].confidence; });
  if (order.size() > gts.size()) order.resize(gts.size());
  std::vector<int> cols(gts.size());
  std::iota(cols.begin(), cols.end(), 0);
  double best = 0;
  do {
    double s = 0;
    for (std::size_t r = 0; r < order.size(); ++r) s += blobvid::bbox_iou(dets[order[r]], gts[cols[r]]);
    best = std::max(best, s);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

// Straight-line blend of centers and axes; angle along the shorter way round a half turn.
inline BlobParams blend_blob(const BlobParams& p, const BlobParams& q, double alpha) {
  const double d = std::remainder(q.theta - p.theta, M_PI);
  return {p.cx * (1 - alpha) + q.cx * alpha, p.cy * (1 - alpha) + q.cy * alpha, p.a * (1 - alpha) + q.a * alpha,
          p.b * (1 - alpha) + q.b * alpha, p.theta + alpha * d};
}

inline bool same_blob(const BlobParams& p, const BlobParams& q, double tol) {
  return std::abs(p.cx - q.cx) < tol && std::abs(p.cy - q.cy) < tol && std::abs(p.a - q.a) < tol &&
         std::abs(p.b - q.b) < tol && std::abs(std::remainder(p.theta - q.theta, M_PI)) < tol;
}

struct CrossInstance {
  TensorD g;
  std::vector<TensorD> blobs;
  std::vector<BinaryMask> masks;
  blobvid::CrossAttnWeights<double> w;
};

inline CrossInstance random_cross(blobvid::Rng& rng, int n, int l, int h, int w, int dg, int d,
                                  double p_on = 0.5) {
  CrossInstance c;
  c.g = rng.normal_matrix(static_cast<std::size_t>(h * w), dg);
  c.w.wq = rng.normal_matrix(dg, dg, 0.5);
  for (int k = 0; k < n; ++k) {
    c.blobs.push_back(rng.normal_matrix(l, d));
    c.w.wk.push_back(rng.normal_matrix(d, dg, 0.5));
    c.w.wv.push_back(rng.normal_matrix(d, dg));
    BinaryMask m(h, w);
    for (std::size_t i = 0; i < m.size(); ++i) m.set(i, rng.uniform() < p_on);
    c.masks.push_back(m);
  }
  return c;
}

inline blobvid::SelfAttnWeights<double> random_self_weights(blobvid::Rng& rng, int d) {
  return {rng.normal_matrix(d, d, 0.5), rng.normal_matrix(d, d, 0.5), rng.normal_matrix(d, d)};
}

inline std::string temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("blobvid_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace oracle
