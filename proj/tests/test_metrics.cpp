#include <gtest/gtest.h>

#include "blobvid/gradcheck.hpp"
#include "blobvid/metrics.hpp"
#include "oracles.hpp"

using namespace blobvid;

namespace {

BBox random_box(Rng& rng, double conf) {
  const double x = rng.uniform(0, 80), y = rng.uniform(0, 80);
  return {x, y, x + rng.uniform(2, 30), y + rng.uniform(2, 30), conf};
}

// brute-force minimum over all row->column injections
double brute_min_cost(const std::vector<std::vector<double>>& c) {
  std::vector<int> cols(c[0].size());
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (std::size_t r = 0; r < c.size(); ++r) s += c[r][cols[r]];
    best = std::min(best, s);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace

TEST(BBoxIou, Examples) {
  const BBox a{0, 0, 10, 10}, b{5, 0, 15, 10}, far{20, 20, 30, 30};
  EXPECT_DOUBLE_EQ(bbox_iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(bbox_iou(a, b), 50.0 / 150.0);
  EXPECT_EQ(bbox_iou(a, far), 0.0);
  EXPECT_EQ(bbox_iou(a, BBox{10, 0, 20, 10}), 0.0);
  EXPECT_EQ(bbox_iou(BBox{1, 1, 1, 1}, BBox{1, 1, 1, 1}), 0.0);
}

TEST(Hungarian, MatchesBruteForce) {
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    const int n = rng.uniform_int(1, 5), m = rng.uniform_int(n, 6);
    std::vector<std::vector<double>> c(n, std::vector<double>(m));
    for (auto& row : c)
      for (auto& x : row) x = rng.uniform() < 0.2 ? 0.0 : rng.uniform(-1, 1);
    const auto r2c = hungarian_min_cost(c);
    std::set<int> used(r2c.begin(), r2c.end());
    ASSERT_EQ(used.size(), static_cast<std::size_t>(n));
    double s = 0;
    for (int r = 0; r < n; ++r) s += c[r][r2c[r]];
    ASSERT_NEAR(s, brute_min_cost(c), 1e-12);
  }
  EXPECT_THROW(hungarian_min_cost({{1.0}, {2.0}}), Error);
  EXPECT_TRUE(hungarian_min_cost({}).empty());
}

TEST(MatchDetections, OptimalAgainstPermutationOracle) {
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    std::vector<BBox> gts, dets;
    for (int k = rng.uniform_int(1, 5); k > 0; --k) gts.push_back(random_box(rng, 1));
    for (int k = rng.uniform_int(0, 7); k > 0; --k) {
      BBox d = gts[rng.uniform_int(0, static_cast<int>(gts.size()) - 1)];
      d.x0 += rng.uniform(-6, 6);
      d.x1 += rng.uniform(-6, 6);
      d.confidence = std::round(rng.uniform() * 4) / 4;
      dets.push_back(d.valid() ? d : random_box(rng, d.confidence));
    }
    const Assignment a = match_detections(dets, gts);
    ASSERT_NEAR(a.total_iou, oracle::best_total_iou(dets, gts), 1e-12);
    ASSERT_LE(a.kept.size(), gts.size());
    const Assignment g = match_detections(dets, gts, MatchMethod::greedy);
    ASSERT_LE(g.total_iou, a.total_iou + 1e-12);
  }
}

TEST(MatchDetections, TruncatesByConfidence) {
  const std::vector<BBox> gts{{0, 0, 10, 10}};
  // the perfect box has low confidence and is dropped
  const std::vector<BBox> dets{{0, 0, 10, 10, 0.1}, {0, 0, 10, 5, 0.9}};
  const Assignment a = match_detections(dets, gts);
  EXPECT_EQ(a.kept, std::vector<int>{1});
  EXPECT_EQ(a.gt_to_det[0], 1);
  EXPECT_DOUBLE_EQ(a.total_iou, 0.5);
}

TEST(MatchDetections, GreedyCanBeSuboptimal) {
  const std::vector<BBox> gts{{0, 0, 10, 10}, {2, 0, 12, 10}};
  const std::vector<BBox> dets{{0.5, 0, 10.5, 10, 0.9}, {-3, 0, 7, 10, 0.8}};
  const Assignment opt = match_detections(dets, gts);
  const Assignment gr = match_detections(dets, gts, MatchMethod::greedy);
  EXPECT_GT(opt.total_iou, gr.total_iou);
  EXPECT_NEAR(opt.total_iou, oracle::best_total_iou(dets, gts), 1e-12);
}

TEST(MeanIou, PooledOverObjects) {
  std::vector<FrameEval> ev(3);
  ev[0] = {"v", 0, {{0, 0, 10, 10, 1}}, {{"a", {0, 0, 10, 10}}}};
  ev[1] = {"v", 1, {}, {{"a", {0, 0, 10, 10}}, {"b", {20, 20, 30, 30}}, {"c", {40, 40, 50, 50}}}};
  ev[2] = {"v", 2, {{0, 0, 10, 5, 1}}, {{"a", {0, 0, 10, 10}}}};
  // pooled: (1 + 0 + 0 + 0) / 4, not the per-frame mean (1 + 0) / 2
  const auto r = mean_iou(ev, {0, 1});
  EXPECT_EQ(r.num_objects, 4u);
  EXPECT_DOUBLE_EQ(r.value, 0.25);
  EXPECT_DOUBLE_EQ(mean_iou(ev, {0, 1, 2}).value, 1.5 / 5);
  EXPECT_THROW(mean_iou(ev, {}), Error);
  try {
    mean_iou(ev, {9});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::undefined);
  }
}

TEST(MeanIou, BoundedAndPerfectDetectorScoresOne) {
  Rng rng(9);
  std::vector<FrameEval> perfect, noisy;
  for (int f = 0; f < 20; ++f) {
    FrameEval e{"v", f, {}, {}};
    for (int k = rng.uniform_int(1, 4); k > 0; --k) e.ground_truth.push_back({std::to_string(k), random_box(rng, 1)});
    FrameEval n = e;
    for (const auto& [id, b] : e.ground_truth) {
      e.detections.push_back(b);
      n.detections.push_back(random_box(rng, rng.uniform()));
    }
    perfect.push_back(e);
    noisy.push_back(n);
  }
  std::set<int> all;
  for (int f = 0; f < 20; ++f) all.insert(f);
  EXPECT_DOUBLE_EQ(mean_iou(perfect, all).value, 1.0);
  const double v = mean_iou(noisy, all).value;
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, 1.0);
}

TEST(RegionCosine, ClipText) {
  std::vector<RegionEmbedding> e{
      {"1", 0, {1, 0}, RegionKind::caption},   {"1", 0, {1, 1}, RegionKind::generated},
      {"1", 8, {0, 1}, RegionKind::caption},   {"1", 8, {0, 2}, RegionKind::generated},
      {"2", 0, {1, 0}, RegionKind::caption},
  };
  const auto r = region_cosine_metrics(e, CosineMode::rclip_t);
  EXPECT_EQ(r.num_pairs, 2u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_NEAR(r.value, (1 / std::sqrt(2.0) + 1) / 2, 1e-12);
}

TEST(RegionCosine, ClipImageAndConsistency) {
  std::vector<RegionEmbedding> e;
  for (int t = 0; t < 5; ++t) {
    if (t == 3) continue;
    e.push_back({"x", t, {1, double(t)}, RegionKind::generated});
    e.push_back({"x", t, {1, double(t)}, RegionKind::ground_truth});
  }
  const auto i = region_cosine_metrics(e, CosineMode::rclip_i);
  EXPECT_EQ(i.num_pairs, 4u);
  EXPECT_NEAR(i.value, 1.0, 1e-12);
  const auto c = region_cosine_metrics(e, CosineMode::rcfc);
  EXPECT_EQ(c.num_pairs, 2u);  // 0-1, 1-2
  EXPECT_EQ(c.skipped, 2u);    // 2-3, 3-4
  double want = 0;
  for (int t : {0, 1}) want += (1 + t * (t + 1.0)) / std::sqrt((1 + t * t) * (1 + (t + 1.0) * (t + 1)));
  EXPECT_NEAR(c.value, want / 2, 1e-12);
}

TEST(RegionCosine, Errors) {
  try {
    region_cosine_metrics({{"a", 0, {1}, RegionKind::generated}}, CosineMode::rcfc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::undefined);
  }
  std::vector<RegionEmbedding> zero{{"a", 0, {0, 0}, RegionKind::generated}, {"a", 0, {1, 0}, RegionKind::ground_truth}};
  EXPECT_THROW(region_cosine_metrics(zero, CosineMode::rclip_i), Error);
  std::vector<RegionEmbedding> dims{{"a", 0, {1}, RegionKind::generated}, {"a", 0, {1, 0}, RegionKind::ground_truth}};
  EXPECT_THROW(region_cosine_metrics(dims, CosineMode::rclip_i), Error);
}
