#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "blobvid/blob.hpp"
#include "blobvid/nelder_mead.hpp"

namespace blobvid {

struct FitResult {
  BlobParams params;
  double iou = 0.0;
  int iterations = 0;
};

struct FitOptions {
  int max_iterations = 200;
  double tolerance = 1e-4;
};

// Smallest admissible radius: half a grid cell, in source pixels.
inline double radius_floor(const BinaryMask& mask, const FrameGeometry& geom) {
  const double cw = static_cast<double>(geom.width) / mask.width();
  const double ch = static_cast<double>(geom.height) / mask.height();
  return 0.5 * std::max(cw, ch);
}

// Second-moment ellipse of the set cells: centroid, a/b = 2*sqrt(eigenvalues).
inline BlobParams moments_init(const BinaryMask& mask, const FrameGeometry& geom) {
  const double sx = static_cast<double>(geom.width) / mask.width();
  const double sy = static_cast<double>(geom.height) / mask.height();
  double n = 0, sum_x = 0, sum_y = 0, sum_xx = 0, sum_yy = 0, sum_xy = 0;
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask(r, c)) continue;
      const double x = (c + 0.5) * sx;
      const double y = (r + 0.5) * sy;
      n += 1;
      sum_x += x;
      sum_y += y;
      sum_xx += x * x;
      sum_yy += y * y;
      sum_xy += x * y;
    }
  }
  if (n == 0) throw Error(Errc::empty_mask, "cannot fit an ellipse to an empty mask");

  const double mx = sum_x / n;
  const double my = sum_y / n;
  const double vxx = std::max(0.0, sum_xx / n - mx * mx);
  const double vyy = std::max(0.0, sum_yy / n - my * my);
  const double vxy = sum_xy / n - mx * my;

  const double tr = 0.5 * (vxx + vyy);
  const double disc = std::sqrt(std::max(0.0, 0.25 * (vxx - vyy) * (vxx - vyy) + vxy * vxy));
  const double l1 = tr + disc;
  const double l2 = std::max(0.0, tr - disc);

  const double floor = radius_floor(mask, geom);
  BlobParams p;
  p.cx = mx;
  p.cy = my;
  p.a = std::max(floor, 2.0 * std::sqrt(l1));
  p.b = std::max(floor, 2.0 * std::sqrt(l2));
  p.theta = 0.5 * std::atan2(2.0 * vxy, vxx - vyy);
  // near-isotropic spread: treat as a circle
  if (disc <= 1e-12 * l1) {
    p.b = p.a;
    p.theta = 0.0;
  }
  return canonicalize(p);
}

// Maximizes IOU between the rasterized ellipse and the mask at the mask's resolution,
// starting from the moment ellipse. Deterministic.
inline FitResult fit_ellipse(const BinaryMask& mask, const FrameGeometry& geom,
                             const FitOptions& opt = {}) {
  const BlobParams init = moments_init(mask, geom);
  const double floor = radius_floor(mask, geom);
  const int h = mask.height();
  const int w = mask.width();

  auto to_params = [floor](const std::array<double, 5>& x) {
    return BlobParams{x[0], x[1], std::max(floor, std::abs(x[2])), std::max(floor, std::abs(x[3])),
                      x[4]};
  };
  auto objective = [&](const std::array<double, 5>& x) {
    return -mask_iou(rasterize(to_params(x), geom, h, w), mask);
  };

  const double cw = static_cast<double>(geom.width) / w;
  const double ch = static_cast<double>(geom.height) / h;
  const std::array<double, 5> start{init.cx, init.cy, init.a, init.b, init.theta};
  const std::array<double, 5> steps{std::max(cw, 0.1 * init.a), std::max(ch, 0.1 * init.a),
                                    std::max(std::max(cw, ch), 0.1 * init.a),
                                    std::max(std::max(cw, ch), 0.1 * init.b), 0.1};

  NelderMeadOptions nm;
  nm.max_iterations = opt.max_iterations;
  nm.tolerance = opt.tolerance;
  const auto res = nelder_mead<5>(objective, start, steps, nm);

  const double init_iou = mask_iou(rasterize(init, geom, h, w), mask);
  FitResult out{canonicalize(to_params(res.x)), 0.0, res.iterations};
  out.iou = mask_iou(rasterize(out.params, geom, h, w), mask);
  if (out.iou < init_iou) {
    out.params = init;
    out.iou = init_iou;
  }
  return out;
}

// Componentwise lerp of center and radii; theta follows the shortest arc modulo pi.
inline BlobParams interpolate_blob_params(const BlobParams& p1, const BlobParams& p2, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw Error(Errc::range, "interpolation weight must lie in [0, 1]");
  if (alpha == 0.0) return p1;
  if (alpha == 1.0) return p2;
  BlobParams out;
  out.cx = p1.cx + alpha * (p2.cx - p1.cx);
  out.cy = p1.cy + alpha * (p2.cy - p1.cy);
  out.a = p1.a + alpha * (p2.a - p1.a);
  out.b = p1.b + alpha * (p2.b - p1.b);
  const double d = wrap_half_turn(p2.theta - p1.theta);
  out.theta = wrap_half_turn(p1.theta + alpha * d);
  if (out.a == out.b) out.theta = 0.0;
  return out;
}

}  // namespace blobvid
