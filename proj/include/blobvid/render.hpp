#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "blobvid/blob.hpp"
#include "blobvid/blob_video.hpp"
#include "blobvid/parallel.hpp"
#include "blobvid/tensor.hpp"

namespace blobvid {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  RgbImage(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  void put(int x, int y, const std::array<std::uint8_t, 3>& c) {
    std::uint8_t* px = &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
    px[0] = c[0];
    px[1] = c[1];
    px[2] = c[2];
  }
  std::array<std::uint8_t, 3> at(int x, int y) const {
    const std::uint8_t* px = &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
    return {px[0], px[1], px[2]};
  }

  std::string encode_ppm() const {
    std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
    return out;
  }
};

// Bright, id-derived color; never black.
inline std::array<std::uint8_t, 3> track_color(const std::string& id) {
  const std::uint64_t h = fnv1a(id);
  return {static_cast<std::uint8_t>(64 + (h & 0xbf)), static_cast<std::uint8_t>(64 + ((h >> 8) & 0xbf)),
          static_cast<std::uint8_t>(64 + ((h >> 16) & 0xbf))};
}

// Inner boundary of the rasterized ellipse: inside pixels with a 4-neighbor outside.
inline BinaryMask ellipse_outline(const BlobParams& p, const FrameGeometry& geom) {
  const BinaryMask fill = rasterize(p, geom, geom.height, geom.width);
  BinaryMask edge(geom.height, geom.width);
  for (int y = 0; y < geom.height; ++y)
    for (int x = 0; x < geom.width; ++x) {
      if (!fill(y, x)) continue;
      const bool boundary = (y > 0 && !fill(y - 1, x)) || (y + 1 < geom.height && !fill(y + 1, x)) ||
                            (x > 0 && !fill(y, x - 1)) || (x + 1 < geom.width && !fill(y, x + 1));
      if (boundary) edge.set(y, x);
    }
  return edge;
}

inline RgbImage render_frame(const BlobVideo& v, int t, const RgbImage* background = nullptr) {
  RgbImage img(v.geom.width, v.geom.height);
  if (background) {
    if (background->width != img.width || background->height != img.height)
      throw Error(Errc::shape, "background frame size differs from the video geometry");
    img = *background;
  }
  for (const auto& tr : v.tracks) {
    auto it = tr.params.find(t);
    if (it == tr.params.end()) continue;
    const auto color = track_color(tr.id);
    const BinaryMask edge = ellipse_outline(it->second, v.geom);
    for (int y = 0; y < v.geom.height; ++y)
      for (int x = 0; x < v.geom.width; ++x)
        if (edge(y, x)) img.put(x, y, color);
  }
  return img;
}

inline std::string frame_filename(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d.ppm", t);
  return buf;
}

// Writes frame_<t>.ppm for every frame into `out_dir`, optionally over
// same-named P6 frames from `background_dir`.
inline void render(const BlobVideo& v, const std::string& out_dir,
                   const std::optional<std::string>& background_dir = std::nullopt, int threads = 1) {
  if (!std::filesystem::is_directory(out_dir))
    throw Error(Errc::io, "output directory does not exist: " + out_dir);
  if (background_dir && !std::filesystem::is_directory(*background_dir))
    throw Error(Errc::io, "background directory does not exist: " + *background_dir);
  parallel_for(static_cast<std::size_t>(v.num_frames), threads, [&](std::size_t ti) {
    const int t = static_cast<int>(ti);
    std::optional<RgbImage> bg;
    if (background_dir) {
      const PnmImage src = decode_pnm(read_file(*background_dir + "/" + frame_filename(t)));
      if (src.channels != 3) throw Error(Errc::io, "background frames must be P6");
      bg.emplace(src.width, src.height);
      bg->rgb = src.pixels;
    }
    write_file(out_dir + "/" + frame_filename(t), render_frame(v, t, bg ? &*bg : nullptr).encode_ppm());
  });
}

}  // namespace blobvid
