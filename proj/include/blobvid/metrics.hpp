#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "blobvid/error.hpp"

namespace blobvid {

struct BBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double confidence = 1.0;

  double area() const { return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0); }
  bool valid() const { return x0 < x1 && y0 < y1; }
};

inline double bbox_iou(const BBox& a, const BBox& b) {
  const double iw = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double ih = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

// Minimum-cost assignment of every row to a distinct column; requires rows <= cols.
// Kuhn-Munkres with potentials, O(rows^2 * cols). Returns the column of each row.
inline std::vector<int> hungarian_min_cost(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  if (n == 0) return {};
  const int m = static_cast<int>(cost[0].size());
  if (n > m) throw Error(Errc::shape, "hungarian: more rows than columns");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is the virtual start
  std::vector<double> u(n + 1, 0), v(m + 1, 0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

enum class MatchMethod { optimal, greedy };

struct Assignment {
  std::vector<int> kept;         // detection indices kept after confidence truncation
  std::vector<int> gt_to_det;    // per ground truth: matched detection index or -1
  std::vector<double> gt_iou;    // per ground truth: matched IOU (0 if unmatched)
  double total_iou = 0.0;
};

// Keeps the |gts| most confident detections (ties by input order), then matches them
// one-to-one to ground truths maximizing the summed IOU.
inline Assignment match_detections(const std::vector<BBox>& dets, const std::vector<BBox>& gts,
                                   MatchMethod method = MatchMethod::optimal) {
  Assignment a;
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int l, int r) { return dets[l].confidence > dets[r].confidence; });
  if (order.size() > gts.size()) order.resize(gts.size());
  a.kept = order;
  a.gt_to_det.assign(gts.size(), -1);
  a.gt_iou.assign(gts.size(), 0.0);
  if (order.empty()) return a;

  std::vector<std::vector<double>> iou(order.size(), std::vector<double>(gts.size()));
  for (std::size_t r = 0; r < order.size(); ++r)
    for (std::size_t c = 0; c < gts.size(); ++c) iou[r][c] = bbox_iou(dets[order[r]], gts[c]);

  if (method == MatchMethod::optimal) {
    std::vector<std::vector<double>> cost = iou;
    for (auto& row : cost)
      for (auto& x : row) x = -x;
    const auto r2c = hungarian_min_cost(cost);
    for (std::size_t r = 0; r < r2c.size(); ++r) a.gt_to_det[r2c[r]] = order[r];
  } else {
    std::vector<char> row_used(order.size(), 0), col_used(gts.size(), 0);
    for (std::size_t step = 0; step < order.size(); ++step) {
      int br = -1, bc = -1;
      double best = -1.0;
      for (std::size_t r = 0; r < order.size(); ++r) {
        if (row_used[r]) continue;
        for (std::size_t c = 0; c < gts.size(); ++c)
          if (!col_used[c] && iou[r][c] > best) {
            best = iou[r][c];
            br = static_cast<int>(r);
            bc = static_cast<int>(c);
          }
      }
      if (br < 0) break;
      row_used[br] = col_used[bc] = 1;
      a.gt_to_det[bc] = order[br];
    }
  }
  for (std::size_t c = 0; c < gts.size(); ++c) {
    if (a.gt_to_det[c] < 0) continue;
    a.gt_iou[c] = bbox_iou(dets[a.gt_to_det[c]], gts[c]);
    a.total_iou += a.gt_iou[c];
  }
  return a;
}

struct FrameEval {
  std::string video;
  int frame = 0;
  std::vector<BBox> detections;
  std::vector<std::pair<std::string, BBox>> ground_truth;  // (object id, box)
};

struct MeanIouResult {
  double value = 0.0;
  std::size_t num_objects = 0;  // pooled object-frame pairs
};

// Pooled average of matched IOUs over every ground-truth object on the evaluated frames.
inline MeanIouResult mean_iou(const std::vector<FrameEval>& evals, const std::set<int>& eval_frames,
                              MatchMethod method = MatchMethod::optimal) {
  if (eval_frames.empty()) throw Error(Errc::range, "eval_frames must be nonempty");
  MeanIouResult r;
  double sum = 0.0;
  for (const auto& e : evals) {
    if (!eval_frames.count(e.frame)) continue;
    std::vector<BBox> gts;
    for (const auto& [id, box] : e.ground_truth) gts.push_back(box);
    const Assignment a = match_detections(e.detections, gts, method);
    for (double x : a.gt_iou) sum += x;
    r.num_objects += gts.size();
  }
  if (r.num_objects == 0) throw Error(Errc::undefined, "no ground-truth objects on the evaluated frames");
  r.value = sum / static_cast<double>(r.num_objects);
  return r;
}

// ---- region cosine metrics ------------------------------------------------------

enum class RegionKind { generated, ground_truth, caption };
enum class CosineMode { rclip_t, rclip_i, rcfc };

struct RegionEmbedding {
  std::string object;
  int frame = 0;
  std::vector<double> vec;
  RegionKind kind = RegionKind::generated;
};

struct CosineReport {
  double value = 0.0;
  std::size_t num_pairs = 0;
  std::size_t skipped = 0;
};

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(Errc::shape, "embedding dimensions differ");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(Errc::degenerate_vector, "zero-norm region embedding");
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

// rclip_t: caption vs generated region at captioned frames.
// rclip_i: generated vs ground-truth region.
// rcfc:    generated regions of one object on consecutive frames (T-1 values per object).
// Pairs whose counterpart is missing are counted in `skipped`.
inline CosineReport region_cosine_metrics(const std::vector<RegionEmbedding>& embs, CosineMode mode) {
  using Key = std::pair<std::string, int>;
  std::map<Key, const RegionEmbedding*> gen, gt, cap;
  for (const auto& e : embs) {
    auto& table = e.kind == RegionKind::generated ? gen : e.kind == RegionKind::ground_truth ? gt : cap;
    table[{e.object, e.frame}] = &e;
  }
  CosineReport rep;
  double sum = 0.0;
  auto add_pair = [&](const RegionEmbedding& a, const RegionEmbedding& b) {
    sum += cosine(a.vec, b.vec);
    ++rep.num_pairs;
  };

  if (mode == CosineMode::rclip_t || mode == CosineMode::rclip_i) {
    const auto& anchors = mode == CosineMode::rclip_t ? cap : gen;
    const auto& partner = mode == CosineMode::rclip_t ? gen : gt;
    for (const auto& [key, e] : anchors) {
      auto it = partner.find(key);
      if (it == partner.end())
        ++rep.skipped;
      else
        add_pair(*e, *it->second);
    }
  } else {
    std::map<std::string, std::vector<std::pair<int, const RegionEmbedding*>>> per_object;
    for (const auto& [key, e] : gen) per_object[key.first].push_back({key.second, e});
    for (const auto& [obj, seq] : per_object) {
      for (std::size_t i = 1; i < seq.size(); ++i) {
        if (seq[i].first == seq[i - 1].first + 1)
          add_pair(*seq[i - 1].second, *seq[i].second);
        else
          rep.skipped += static_cast<std::size_t>(seq[i].first - seq[i - 1].first);
      }
    }
  }
  if (rep.num_pairs == 0) throw Error(Errc::undefined, "no embedding pairs for the requested metric");
  rep.value = sum / static_cast<double>(rep.num_pairs);
  return rep;
}

}  // namespace blobvid
