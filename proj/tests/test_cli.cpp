#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "blobvid/blob_video.hpp"
#include "blobvid/embedding.hpp"
#include "blobvid/mask_builder.hpp"
#include "cli_support.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace blobvid;
using clitest::data;
using clitest::run;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = oracle::temp_dir(std::string("cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
  }
  void TearDown() override { fs::remove_all(dir); }

  // owl layout densified to 13 frames at 720x480
  std::string owl_video() {
    const std::string out = dir + "/owl.json";
    const auto r = run("interp " + data("owl_layout.json") + " --frames 13 -o " + out);
    EXPECT_EQ(r.code, 0);
    return out;
  }

  std::string dir;
};

}  // namespace

TEST_F(Cli, ValidateAcceptsExampleLayout) {
  const auto r = run("validate " + data("owl_layout.json") + " --json");
  EXPECT_EQ(r.code, 0);
  const json j = json::parse(r.out);
  EXPECT_EQ(j["kind"], "layout");
  EXPECT_TRUE(j["valid"].get<bool>());
}

TEST_F(Cli, ValidateReportsBadLayout) {
  const auto r = run("validate " + data("bad_layout.json"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("Object1"), std::string::npos);
}

TEST_F(Cli, ValidateVideoViolations) {
  BlobVideo v;
  v.num_frames = 4;
  v.geom = FrameGeometry(64, 64);
  v.tracks.push_back({"1", {{0, BlobParams{10, 10, 5, 3, 0}}}, {{99, "ghost"}}});
  write_file(dir + "/v.json", serialize_video(v));
  const auto r = run("validate " + dir + "/v.json --json");
  EXPECT_EQ(r.code, 1);
  const json j = json::parse(r.out);
  EXPECT_EQ(j["kind"], "video");
  ASSERT_EQ(j["violations"].size(), 1u);
  EXPECT_NE(j["violations"][0]["where"].get<std::string>().find("99"), std::string::npos);
}

TEST_F(Cli, GradcheckPasses) {
  const auto r = run("gradcheck --seed 7 --instances 3");
  EXPECT_EQ(r.code, 0);
  const json j = json::parse(r.out);
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_LT(j["max_rel_error"].get<double>(), 1e-4);
  EXPECT_EQ(j["seed"], 7);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("interp " + data("owl_layout.json")).code, 2);
  EXPECT_EQ(run("gradcheck --threads 0").code, 2);
  EXPECT_EQ(run("gradcheck --interp cubic").code, 2);
  EXPECT_EQ(run("metrics --mode nope").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, InterpFromFileAndStdin) {
  const std::string out = owl_video();
  const BlobVideo v = parse_video(read_file(out));
  EXPECT_EQ(v.num_frames, 13);
  EXPECT_TRUE(v.is_dense());
  EXPECT_TRUE(validate(v).empty());
  EXPECT_EQ(v.tracks.at(0).id, "2");
  const auto piped = run("interp - --frames 13 < " + data("owl_layout.json"));
  EXPECT_EQ(piped.code, 0);
  EXPECT_EQ(piped.out, read_file(out));
  EXPECT_EQ(run("interp " + data("owl_layout.json") + " --frames 5").code, 1);
  EXPECT_EQ(run("interp " + data("bad_layout.json") + " --frames 13").code, 1);
}

TEST_F(Cli, InterpThroughReplayedPlanner) {
  const std::string saved = dir + "/resp.txt";
  const auto r = run("interp --prompt 'a kite over trees' --replay " + data("replay_response.json") +
                     " --frames 9 --save-response " + saved);
  ASSERT_EQ(r.code, 0);
  const BlobVideo v = parse_video(r.out);
  EXPECT_EQ(v.num_frames, 9);
  EXPECT_EQ(v.tracks.at(0).captions.size(), 2u);
  EXPECT_NE(read_file(saved).find("Frame4"), std::string::npos);
}

TEST_F(Cli, MaskWritesFramesAndLabelField) {
  const std::string video = owl_video();
  ASSERT_EQ(run("mask " + video + " --out " + dir + "/m --h 6 --w 9").code, 0);
  for (const char* f : {"f0000_o2.pgm", "f0012_o2.pgm", "f0000_bg.pgm", "label_field.bin", "dense_mask.pgm"})
    EXPECT_TRUE(fs::exists(dir + "/m/" + f)) << f;
  const BinaryMask obj = decode_pgm_mask(read_file(dir + "/m/f0005_o2.pgm"));
  EXPECT_EQ(obj.height(), 6);
  EXPECT_EQ(obj.width(), 9);
  const BlobVideo v = parse_video(read_file(video));
  EXPECT_EQ(obj, rasterize(v.tracks[0].params.at(5), v.geom, 6, 9));
  const LabelField f = decode_label_field(read_file(dir + "/m/label_field.bin"));
  EXPECT_EQ(f, build_label_field(v, 6, 9));
  const PnmImage dense = decode_pnm(read_file(dir + "/m/dense_mask.pgm"));
  EXPECT_EQ(dense.width, 13 * 54);
}

TEST_F(Cli, MaskSkipsDenseAboveCap) {
  const std::string video = owl_video();
  ASSERT_EQ(run("mask " + video + " --out " + dir + "/m --dense-cap 100").code, 0);
  EXPECT_TRUE(fs::exists(dir + "/m/label_field.bin"));
  EXPECT_FALSE(fs::exists(dir + "/m/dense_mask.pgm"));
}

TEST_F(Cli, FitRecoversMaskVideo) {
  const std::string video = owl_video();
  ASSERT_EQ(run("mask " + video + " --out " + dir + "/m --h 48 --w 72").code, 0);
  const auto r = run("fit " + dir + "/m --width 720 --height 480 -o " + dir + "/fit.json");
  ASSERT_EQ(r.code, 0);
  const BlobVideo orig = parse_video(read_file(video));
  const BlobVideo fit = parse_video(read_file(dir + "/fit.json"));
  ASSERT_EQ(fit.num_frames, 13);
  ASSERT_EQ(fit.tracks.size(), 1u);
  EXPECT_EQ(fit.tracks[0].id, "2");
  for (int t = 0; t < 13; ++t) {
    const BinaryMask a = rasterize(orig.tracks[0].params.at(t), orig.geom, 48, 72);
    const BinaryMask b = rasterize(fit.tracks[0].params.at(t), fit.geom, 48, 72);
    EXPECT_GE(mask_iou(a, b), 0.9) << t;
  }
  EXPECT_EQ(run("fit " + dir + "/nothing").code, 1);
}

TEST_F(Cli, RenderWritesPpmFrames) {
  const std::string video = owl_video();
  ASSERT_EQ(run("render " + video + " --out " + dir + "/r").code, 0);
  const PnmImage img = decode_pnm(read_file(dir + "/r/frame_0012.ppm"));
  EXPECT_EQ(img.width, 720);
  EXPECT_EQ(img.height, 480);
  EXPECT_EQ(run("render " + video + " --out " + dir + "/r2 --background " + dir + "/none").code, 1);
}

TEST_F(Cli, AttendWritesTensorAndStats) {
  const std::string video = owl_video();
  ASSERT_EQ(run("attend " + video + " --out " + dir + "/a --h 4 --w 4").code, 0);
  const json st = json::parse(read_file(dir + "/a.stats.json"));
  EXPECT_TRUE(st["finite"].get<bool>());
  EXPECT_LT(st["cross_max_row_sum_error"].get<double>(), 1e-6);
  EXPECT_LT(st["self_max_row_sum_error"].get<double>(), 1e-6);
  const TensorD x = read_embedding(dir + "/a.f32");
  EXPECT_EQ(x.shape()[0], 13u * 16u);
}

TEST_F(Cli, AttendWithEmbeddingManifest) {
  const std::string video = owl_video();
  const BlobVideo v = parse_video(read_file(video));
  json manifest = json::object();
  Rng rng(2);
  int k = 0;
  for (const auto& [t, cap] : v.tracks[0].captions) {
    const std::string name = "e" + std::to_string(k++) + ".f32";
    write_embedding(dir + "/" + name, rng.normal_matrix(4, 8));
    manifest[caption_hash(cap)] = name;
  }
  write_embedding(dir + "/empty.f32", rng.normal_matrix(4, 8));
  manifest[caption_hash("")] = "empty.f32";
  write_file(dir + "/manifest.json", manifest.dump());
  const auto r = run("attend " + video + " --out " + dir + "/a --h 4 --w 4 --embeddings " + dir + "/manifest.json");
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(dir + "/a.f32"));
  write_file(dir + "/manifest.json", "{}");
  EXPECT_EQ(run("attend " + video + " --out " + dir + "/b --embeddings " + dir + "/manifest.json").code, 1);
}

TEST_F(Cli, MetricsMiou) {
  const auto r = run("metrics --detections " + data("detections.json") + " --ground-truth " + data("ground_truth.json") +
                     " --json");
  ASSERT_EQ(r.code, 0);
  const json j = json::parse(r.out);
  EXPECT_EQ(j["metric"], "miou");
  EXPECT_EQ(j["averaging"], "pooled");
  EXPECT_EQ(j["num_pairs"], 4);
  const double want = (1444.0 / 1676 + 0.8 + 1520.0 / 1680 + 1824.0 / 2176) / 4;
  EXPECT_NEAR(j["value"].get<double>(), want, 1e-12);
  const auto f0 = run("metrics --detections " + data("detections.json") + " --ground-truth " +
                      data("ground_truth.json") + " --eval-frames 0 --json");
  EXPECT_NEAR(json::parse(f0.out)["value"].get<double>(), (1444.0 / 1676 + 0.8) / 2, 1e-12);
  EXPECT_EQ(run("metrics --detections " + data("detections.json") + " --ground-truth " + data("ground_truth.json") +
                " --eval-frames 7")
                .code,
            1);
}

TEST_F(Cli, MetricsRegionCosine) {
  json manifest = json::array();
  const std::vector<std::vector<float>> vecs{{1, 0}, {1, 1}, {0, 1}};
  for (int t = 0; t < 3; ++t) {
    const std::string name = "g" + std::to_string(t) + ".f32";
    TensorD x = TensorD::matrix(1, 2);
    x(0, 0) = vecs[t][0];
    x(0, 1) = vecs[t][1];
    write_embedding(dir + "/" + name, x);
    manifest.push_back({{"object", "1"}, {"frame", t}, {"kind", "generated"}, {"path", name}});
  }
  write_file(dir + "/regions.json", manifest.dump());
  const auto r = run("metrics --mode rcfc --embeddings " + dir + "/regions.json --json");
  ASSERT_EQ(r.code, 0);
  const json j = json::parse(r.out);
  EXPECT_EQ(j["num_pairs"], 2);
  EXPECT_NEAR(j["value"].get<double>(), 1 / std::sqrt(2.0), 1e-6);
  EXPECT_EQ(run("metrics --mode rclip_i --embeddings " + dir + "/regions.json").code, 1);
}

TEST_F(Cli, ConfigPrecedence) {
  const std::string video = owl_video();
  auto grid = [&](const std::string& extra) {
    const std::string out = dir + "/p";
    fs::remove_all(out);
    EXPECT_EQ(run("mask " + video + " --out " + out + " " + extra).code, 0);
    const BinaryMask m = decode_pgm_mask(read_file(out + "/f0000_bg.pgm"));
    return std::pair<int, int>{m.height(), m.width()};
  };
  EXPECT_EQ(grid(""), (std::pair<int, int>{16, 16}));
  EXPECT_EQ(grid("--config " + data("config.json")), (std::pair<int, int>{8, 8}));
  ::setenv("BLOBVID_H", "4", 1);
  EXPECT_EQ(grid("--config " + data("config.json")), (std::pair<int, int>{4, 8}));
  EXPECT_EQ(grid("--config " + data("config.json") + " --h 2"), (std::pair<int, int>{2, 8}));
  ::setenv("BLOBVID_H", "zero", 1);
  EXPECT_EQ(run("mask " + video + " --out " + dir + "/q").code, 2);
  ::unsetenv("BLOBVID_H");
}
