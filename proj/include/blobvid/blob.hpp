#pragma once

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "blobvid/error.hpp"

namespace blobvid {

inline constexpr double kPi = std::numbers::pi;

// Tilted ellipse [cx, cy, a, b, theta] in source-pixel coordinates.
// The major axis points along (cos theta, sin theta) with y growing downward.
struct BlobParams {
  double cx = 0.0;
  double cy = 0.0;
  double a = 1.0;
  double b = 1.0;
  double theta = 0.0;

  friend bool operator==(const BlobParams&, const BlobParams&) = default;
};

struct FrameGeometry {
  int width = 720;
  int height = 480;

  FrameGeometry() = default;
  FrameGeometry(int w, int h) : width(w), height(h) {
    if (w < 1 || h < 1)
      throw Error(Errc::range, "frame geometry must be at least 1x1, got " + std::to_string(w) +
                                   "x" + std::to_string(h));
  }

  friend bool operator==(const FrameGeometry&, const FrameGeometry&) = default;
};

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int h, int w, bool fill = false) : h_(h), w_(w) {
    if (h < 1 || w < 1) throw Error(Errc::shape, "mask extents must be >= 1");
    bits_.assign(static_cast<std::size_t>(h) * w, fill ? 1 : 0);
  }

  int height() const noexcept { return h_; }
  int width() const noexcept { return w_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool operator()(int r, int c) const { return bits_[index(r, c)] != 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(int r, int c, bool v = true) { bits_[index(r, c)] = v ? 1 : 0; }
  void set(std::size_t i, bool v = true) { bits_[i] = v ? 1 : 0; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool empty() const { return count() == 0; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * w_ + c; }

  int h_ = 0;
  int w_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Maps an angle into (-pi/2, pi/2]; values already in range are returned untouched.
inline double wrap_half_turn(double theta) {
  if (theta > -kPi / 2 && theta <= kPi / 2) return theta;
  double r = std::fmod(theta + kPi / 2, kPi);
  if (r <= 0.0) r += kPi;
  double out = r - kPi / 2;
  if (out <= -kPi / 2) out = kPi / 2;
  return out;
}

// Maps an angle into (-pi, pi].
inline double wrap_full_turn(double theta) {
  if (theta > -kPi && theta <= kPi) return theta;
  double r = std::fmod(theta + kPi, 2 * kPi);
  if (r <= 0.0) r += 2 * kPi;
  double out = r - kPi;
  if (out <= -kPi) out = kPi;
  return out;
}

inline void require_valid(const BlobParams& p) {
  if (!std::isfinite(p.cx) || !std::isfinite(p.cy) || !std::isfinite(p.theta))
    throw Error(Errc::invalid_blob, "non-finite blob parameter");
  if (!(p.a > 0.0) || !(p.b > 0.0) || !std::isfinite(p.a) || !std::isfinite(p.b))
    throw Error(Errc::invalid_blob, "blob radii must be positive and finite");
}

// Unique representative: a >= b, theta in (-pi/2, pi/2], theta = 0 for circles.
inline BlobParams canonicalize(const BlobParams& p) {
  require_valid(p);
  BlobParams out = p;
  if (out.a < out.b) {
    std::swap(out.a, out.b);
    out.theta += kPi / 2;
  }
  if (out.a == out.b) {
    out.theta = 0.0;
  } else {
    out.theta = wrap_half_turn(out.theta);
  }
  return out;
}

inline bool is_canonical(const BlobParams& p) {
  return p.a >= p.b && p.theta > -kPi / 2 && p.theta <= kPi / 2 && (p.a != p.b || p.theta == 0.0);
}

// Containment of a source-pixel point in the ellipse scaled by rho.
inline bool ellipse_contains(const BlobParams& p, double x, double y, double rho = 1.0) {
  const double dx = x - p.cx;
  const double dy = y - p.cy;
  const double c = std::cos(p.theta);
  const double s = std::sin(p.theta);
  const double u = (dx * c + dy * s) / (rho * p.a);
  const double v = (-dx * s + dy * c) / (rho * p.b);
  return u * u + v * v <= 1.0;
}

// Cell (r, c) is set iff its center, mapped to source pixels, lies in the ellipse.
inline BinaryMask rasterize(const BlobParams& p, const FrameGeometry& geom, int h, int w,
                            double rho = 1.0) {
  require_valid(p);
  if (h < 1 || w < 1) throw Error(Errc::shape, "raster grid must be at least 1x1");
  if (!(rho > 0.0) || !std::isfinite(rho)) throw Error(Errc::range, "rescale factor must be > 0");

  BinaryMask mask(h, w);
  const double sx = static_cast<double>(geom.width) / w;
  const double sy = static_cast<double>(geom.height) / h;
  const double c = std::cos(p.theta);
  const double s = std::sin(p.theta);
  const double ra = rho * p.a;
  const double rb = rho * p.b;
  for (int r = 0; r < h; ++r) {
    const double dy = (r + 0.5) * sy - p.cy;
    for (int col = 0; col < w; ++col) {
      const double dx = (col + 0.5) * sx - p.cx;
      const double u = (dx * c + dy * s) / ra;
      const double v = (-dx * s + dy * c) / rb;
      if (u * u + v * v <= 1.0) mask.set(r, col);
    }
  }
  return mask;
}

inline void require_same_shape(const BinaryMask& m1, const BinaryMask& m2) {
  if (m1.height() != m2.height() || m1.width() != m2.width())
    throw Error(Errc::shape, "mask shapes differ: " + std::to_string(m1.height()) + "x" +
                                 std::to_string(m1.width()) + " vs " +
                                 std::to_string(m2.height()) + "x" + std::to_string(m2.width()));
}

// Intersection over union; two empty masks compare as identical (1.0).
inline double mask_iou(const BinaryMask& m1, const BinaryMask& m2) {
  require_same_shape(m1, m2);
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < m1.size(); ++i) {
    const bool x = m1[i];
    const bool y = m2[i];
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// ---- PGM (P5) ---------------------------------------------------------------

inline std::string encode_pgm(int h, int w, const std::vector<std::uint8_t>& pixels) {
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
  return out;
}

inline std::string encode_pgm(const BinaryMask& m) {
  std::vector<std::uint8_t> px(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) px[i] = m[i] ? 255 : 0;
  return encode_pgm(m.height(), m.width(), px);
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io, "cannot open for writing: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::io, "write failed: " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io, "cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

namespace detail {

// Reads the next whitespace-delimited header token, skipping '#' comments.
inline std::string pnm_token(const std::string& data, std::size_t& pos) {
  for (;;) {
    while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    if (pos < data.size() && data[pos] == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::size_t start = pos;
  while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
  return data.substr(start, pos - start);
}

}  // namespace detail

struct PnmImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;
};

inline PnmImage decode_pnm(const std::string& data) {
  std::size_t pos = 0;
  const std::string magic = detail::pnm_token(data, pos);
  PnmImage img;
  if (magic == "P5") {
    img.channels = 1;
  } else if (magic == "P6") {
    img.channels = 3;
  } else {
    throw Error(Errc::io, "unsupported image magic '" + magic + "'");
  }
  try {
    img.width = std::stoi(detail::pnm_token(data, pos));
    img.height = std::stoi(detail::pnm_token(data, pos));
    const int maxval = std::stoi(detail::pnm_token(data, pos));
    if (maxval != 255) throw Error(Errc::io, "only 8-bit images are supported");
  } catch (const std::invalid_argument&) {
    throw Error(Errc::io, "malformed image header");
  }
  if (img.width < 1 || img.height < 1) throw Error(Errc::io, "image extents must be >= 1");
  ++pos;  // single whitespace byte after maxval
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
  if (data.size() < pos + n) throw Error(Errc::io, "truncated image data");
  img.pixels.assign(data.begin() + static_cast<std::ptrdiff_t>(pos),
                    data.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

// Any nonzero gray level counts as inside.
inline BinaryMask decode_pgm_mask(const std::string& data) {
  PnmImage img = decode_pnm(data);
  if (img.channels != 1) throw Error(Errc::io, "mask must be a grayscale (P5) image");
  BinaryMask m(img.height, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) m.set(i, img.pixels[i] != 0);
  return m;
}

inline std::string mask_filename(int frame, const std::string& object) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "f%04d_o", frame);
  return std::string(buf) + object + ".pgm";
}

}  // namespace blobvid
