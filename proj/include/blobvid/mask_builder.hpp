#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "blobvid/blob.hpp"
#include "blobvid/blob_video.hpp"
#include "blobvid/parallel.hpp"

namespace blobvid {

// Additive mask value standing in for -inf: finite so shifted softmax never sees inf - inf.
template <class T = double>
inline constexpr T neg_inf_v = std::numeric_limits<T>::lowest();

// Per-position label sets over {0..N-1} plus background (label N), stored as
// ceil((N+1)/8) bytes per position. Positions are ordered (t, r, c) row-major.
class LabelField {
 public:
  LabelField() = default;
  LabelField(int frames, int h, int w, int num_objects)
      : frames_(frames), h_(h), w_(w), num_objects_(num_objects) {
    if (frames < 1 || h < 1 || w < 1) throw Error(Errc::shape, "label field extents must be >= 1");
    if (num_objects < 0) throw Error(Errc::range, "object count must be >= 0");
    stride_ = static_cast<std::size_t>((num_objects + 1 + 7) / 8);
    bits_.assign(positions() * stride_, 0);
  }

  int frames() const noexcept { return frames_; }
  int height() const noexcept { return h_; }
  int width() const noexcept { return w_; }
  int num_objects() const noexcept { return num_objects_; }
  int num_labels() const noexcept { return num_objects_ + 1; }
  int background() const noexcept { return num_objects_; }
  std::size_t positions() const noexcept { return static_cast<std::size_t>(frames_) * h_ * w_; }
  std::size_t bytes_per_position() const noexcept { return stride_; }
  std::size_t memory_bytes() const noexcept { return bits_.size(); }
  const std::vector<std::uint8_t>& raw() const noexcept { return bits_; }

  std::size_t position(int t, int r, int c) const {
    return (static_cast<std::size_t>(t) * h_ + r) * w_ + c;
  }

  bool has(std::size_t pos, int label) const {
    return (bits_[pos * stride_ + label / 8] >> (label % 8)) & 1u;
  }
  void add(std::size_t pos, int label) {
    bits_[pos * stride_ + label / 8] |= static_cast<std::uint8_t>(1u << (label % 8));
  }

  std::vector<int> labels(std::size_t pos) const {
    std::vector<int> out;
    for (int l = 0; l < num_labels(); ++l)
      if (has(pos, l)) out.push_back(l);
    return out;
  }

  bool shares_label(std::size_t i, std::size_t j) const {
    const std::uint8_t* a = &bits_[i * stride_];
    const std::uint8_t* b = &bits_[j * stride_];
    for (std::size_t k = 0; k < stride_; ++k)
      if (a[k] & b[k]) return true;
    return false;
  }

  // Sets background wherever no object label is present.
  void fill_background() {
    const int bg = background();
    for (std::size_t p = 0; p < positions(); ++p) {
      bool any = false;
      for (int l = 0; l < num_objects_ && !any; ++l) any = has(p, l);
      if (!any) add(p, bg);
    }
  }

  friend bool operator==(const LabelField&, const LabelField&) = default;

 private:
  int frames_ = 0, h_ = 0, w_ = 0, num_objects_ = 0;
  std::size_t stride_ = 1;
  std::vector<std::uint8_t> bits_;
};

// Implicit Thw x Thw blob mask: entry (i, j) is 0 iff positions i and j share a label.
class AttnMask3D {
 public:
  explicit AttnMask3D(LabelField field) : field_(std::move(field)) {}

  const LabelField& field() const noexcept { return field_; }
  std::size_t size() const noexcept { return field_.positions(); }

  bool allowed(std::size_t i, std::size_t j) const {
    if (i >= size() || j >= size())
      throw Error(Errc::range, "mask index out of range: (" + std::to_string(i) + ", " +
                                   std::to_string(j) + ") for size " + std::to_string(size()));
    return field_.shares_label(i, j);
  }

  template <class T = double>
  T query(std::size_t i, std::size_t j) const {
    return allowed(i, j) ? T(0) : neg_inf_v<T>;
  }

 private:
  LabelField field_;
};

inline LabelField build_label_field(const BlobVideo& v, int h, int w, double rho = 1.0,
                                    int threads = 1) {
  if (!v.is_dense()) throw Error(Errc::range, "label field needs a densified video");
  LabelField field(v.num_frames, h, w, static_cast<int>(v.tracks.size()));
  // each frame writes a disjoint slice of the bitset
  parallel_for(static_cast<std::size_t>(v.num_frames), threads, [&](std::size_t ti) {
    const int t = static_cast<int>(ti);
    for (std::size_t n = 0; n < v.tracks.size(); ++n) {
      const BinaryMask m = rasterize(v.tracks[n].params.at(t), v.geom, h, w, rho);
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
          if (m(r, c)) field.add(field.position(t, r, c), static_cast<int>(n));
    }
  });
  field.fill_background();
  return field;
}

inline constexpr std::size_t kDefaultDenseCap = 8192;

// Row-major Thw x Thw matrix over {0, neg_inf_v<T>}.
template <class T = float>
std::vector<T> materialize_dense(const AttnMask3D& m, std::size_t cap = kDefaultDenseCap) {
  const std::size_t n = m.size();
  if (n > cap)
    throw Error(Errc::too_large, "Thw = " + std::to_string(n) + " exceeds dense cap " +
                                     std::to_string(cap) + "; use the implicit form");
  std::vector<T> out(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = m.query<T>(i, j);
  return out;
}

struct FrameMasks {
  std::vector<BinaryMask> objects;
  BinaryMask background;
};

inline FrameMasks per_frame_masks(const BlobVideo& v, int t, int h, int w, double rho = 1.0) {
  if (t < 0 || t >= v.num_frames) throw Error(Errc::range, "frame index out of range");
  FrameMasks out;
  out.background = BinaryMask(h, w, true);
  for (const auto& tr : v.tracks) {
    auto it = tr.params.find(t);
    if (it == tr.params.end())
      throw Error(Errc::range, "track " + tr.id + " has no params at frame " + std::to_string(t));
    BinaryMask m = rasterize(it->second, v.geom, h, w, rho);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i]) out.background.set(i, false);
    out.objects.push_back(std::move(m));
  }
  return out;
}

// Header line {"T":..,"h":..,"w":..,"n_labels":..} then the raw bitsets.
// Within a position, label l is bit (l % 8) of byte (l / 8).
inline std::string encode_label_field(const LabelField& f) {
  nlohmann::ordered_json hdr;
  hdr["T"] = f.frames();
  hdr["h"] = f.height();
  hdr["w"] = f.width();
  hdr["n_labels"] = f.num_labels();
  std::string out = hdr.dump() + "\n";
  out.append(reinterpret_cast<const char*>(f.raw().data()), f.raw().size());
  return out;
}

inline LabelField decode_label_field(const std::string& data) {
  const auto nl = data.find('\n');
  if (nl == std::string::npos) throw Error(Errc::io, "label field file has no header line");
  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(data.substr(0, nl));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.byte > 0 ? e.byte - 1 : 0, e.what());
  }
  LabelField f(hdr.at("T").get<int>(), hdr.at("h").get<int>(), hdr.at("w").get<int>(),
               hdr.at("n_labels").get<int>() - 1);
  if (data.size() - nl - 1 != f.memory_bytes())
    throw Error(Errc::io, "label field payload size mismatch");
  for (std::size_t p = 0; p < f.positions(); ++p)
    for (int l = 0; l < f.num_labels(); ++l) {
      const auto byte = static_cast<std::uint8_t>(data[nl + 1 + p * f.bytes_per_position() + l / 8]);
      if ((byte >> (l % 8)) & 1u) f.add(p, l);
    }
  return f;
}

}  // namespace blobvid
