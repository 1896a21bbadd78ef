#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <numeric>

namespace blobvid {

struct NelderMeadOptions {
  int max_iterations = 200;
  double tolerance = 1e-4;  // spread of objective values across the simplex
  double reflect = 1.0;
  double expand = 2.0;
  double contract = 0.5;
  double shrink = 0.5;
};

template <std::size_t N>
struct NelderMeadResult {
  std::array<double, N> x{};
  double value = 0.0;
  int iterations = 0;
};

// Deterministic Nelder-Mead minimizer. Vertex 0 is the start point, vertex i+1
// offsets coordinate i by steps[i]. The returned point is never worse than the start.
template <std::size_t N, class F>
NelderMeadResult<N> nelder_mead(F&& f, const std::array<double, N>& start,
                                const std::array<double, N>& steps,
                                const NelderMeadOptions& opt = {}) {
  using Point = std::array<double, N>;
  std::array<Point, N + 1> simplex;
  std::array<double, N + 1> fx;
  simplex[0] = start;
  for (std::size_t i = 0; i < N; ++i) {
    simplex[i + 1] = start;
    simplex[i + 1][i] += steps[i];
  }
  for (std::size_t i = 0; i <= N; ++i) fx[i] = f(simplex[i]);

  std::array<std::size_t, N + 1> order;
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // stable: ties keep the older vertex first
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t l, std::size_t r) { return fx[l] < fx[r]; });
    std::array<Point, N + 1> s2;
    std::array<double, N + 1> f2;
    for (std::size_t i = 0; i <= N; ++i) {
      s2[i] = simplex[order[i]];
      f2[i] = fx[order[i]];
    }
    simplex = s2;
    fx = f2;
  };
  auto along = [](const Point& from, const Point& to, double t) {
    Point p;
    for (std::size_t i = 0; i < N; ++i) p[i] = from[i] + t * (to[i] - from[i]);
    return p;
  };

  int it = 0;
  sort_simplex();
  for (; it < opt.max_iterations; ++it) {
    if (fx[N] - fx[0] < opt.tolerance) break;

    Point centroid{};
    for (std::size_t v = 0; v < N; ++v)
      for (std::size_t i = 0; i < N; ++i) centroid[i] += simplex[v][i] / static_cast<double>(N);

    const Point xr = along(centroid, simplex[N], -opt.reflect);
    const double fr = f(xr);
    if (fr < fx[0]) {
      const Point xe = along(centroid, simplex[N], -opt.reflect * opt.expand);
      const double fe = f(xe);
      if (fe < fr) {
        simplex[N] = xe;
        fx[N] = fe;
      } else {
        simplex[N] = xr;
        fx[N] = fr;
      }
    } else if (fr < fx[N - 1]) {
      simplex[N] = xr;
      fx[N] = fr;
    } else {
      const bool outside = fr < fx[N];
      const Point xc = outside ? along(centroid, xr, opt.contract)
                               : along(centroid, simplex[N], opt.contract);
      const double fc = f(xc);
      if (fc < (outside ? fr : fx[N])) {
        simplex[N] = xc;
        fx[N] = fc;
      } else {
        for (std::size_t v = 1; v <= N; ++v) {
          simplex[v] = along(simplex[0], simplex[v], opt.shrink);
          fx[v] = f(simplex[v]);
        }
      }
    }
    sort_simplex();
  }
  return {simplex[0], fx[0], it};
}

}  // namespace blobvid
