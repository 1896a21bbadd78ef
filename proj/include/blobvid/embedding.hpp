#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "blobvid/blob.hpp"
#include "blobvid/tensor.hpp"

namespace blobvid {

// L x (d/2) text-token embeddings for one caption.
using EmbeddingSeq = TensorD;
// L x d fused blob embeddings.
using BlobEmbedding = TensorD;

inline constexpr int kDefaultFrequencies = 8;

// ---- Fourier features -------------------------------------------------------

// (cx/W, cy/H, a/D, b/D, (theta + pi/2)/pi) with D = sqrt(W*H), after canonicalization.
inline std::array<double, 5> normalized_params(const BlobParams& p, const FrameGeometry& geom) {
  const BlobParams c = canonicalize(p);
  const double d = std::sqrt(static_cast<double>(geom.width) * geom.height);
  return {c.cx / geom.width, c.cy / geom.height, c.a / d, c.b / d, (c.theta + kPi / 2) / kPi};
}

// Entry ((f * 5 + i) * 2 + {0, 1}) holds {sin, cos}(2^f * pi * u_i); length 10F.
inline std::vector<double> fourier_features(const std::array<double, 5>& u, int frequencies) {
  if (frequencies < 1) throw Error(Errc::range, "frequency count must be >= 1");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(10 * frequencies));
  for (int f = 0; f < frequencies; ++f) {
    const double scale = std::ldexp(kPi, f);
    for (double ui : u) {
      out.push_back(std::sin(scale * ui));
      out.push_back(std::cos(scale * ui));
    }
  }
  return out;
}

// Seeded matrix with orthonormal rows (rows <= cols) or orthonormal columns otherwise.
inline TensorD orthonormal_projection(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  const bool transpose = rows > cols;
  const std::size_t n = transpose ? cols : rows;  // vectors to orthonormalize
  const std::size_t len = transpose ? rows : cols;
  Rng rng(seed);
  std::vector<std::vector<double>> vecs;
  while (vecs.size() < n) {
    std::vector<double> v(len);
    for (auto& x : v) x = rng.normal();
    // modified Gram-Schmidt, twice for stability
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : vecs) {
        double dot = 0;
        for (std::size_t k = 0; k < len; ++k) dot += u[k] * v[k];
        for (std::size_t k = 0; k < len; ++k) v[k] -= dot * u[k];
      }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (auto& x : v) x /= norm;
    vecs.push_back(std::move(v));
  }
  TensorD out = TensorD::matrix(rows, cols);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < len; ++k) {
      if (transpose)
        out(k, i) = vecs[i][k];
      else
        out(i, k) = vecs[i][k];
    }
  return out;
}

class FourierEncoder {
 public:
  FourierEncoder(int frequencies, int out_dim, std::uint64_t seed = 0)
      : frequencies_(frequencies), out_dim_(out_dim) {
    if (frequencies < 1) throw Error(Errc::range, "frequency count must be >= 1");
    if (out_dim < 1) throw Error(Errc::range, "output dimension must be >= 1");
    projection_ = orthonormal_projection(static_cast<std::size_t>(out_dim),
                                         static_cast<std::size_t>(10 * frequencies), seed);
  }

  int frequencies() const noexcept { return frequencies_; }
  int out_dim() const noexcept { return out_dim_; }
  const TensorD& projection() const noexcept { return projection_; }

  std::vector<double> encode(const BlobParams& p, const FrameGeometry& geom) const {
    const auto feats = fourier_features(normalized_params(p, geom), frequencies_);
    std::vector<double> out(static_cast<std::size_t>(out_dim_), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
      double s = 0;
      for (std::size_t k = 0; k < feats.size(); ++k) s += projection_(i, k) * feats[k];
      out[i] = s;
    }
    return out;
  }

 private:
  int frequencies_;
  int out_dim_;
  TensorD projection_;
};

inline std::vector<double> fourier_encode(const BlobParams& p, const FrameGeometry& geom,
                                          int frequencies, int out_dim, std::uint64_t seed = 0) {
  return FourierEncoder(frequencies, out_dim, seed).encode(p, geom);
}

// ---- blob embedding MLP -----------------------------------------------------

enum class Activation { gelu, linear };

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }
inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
  return cdf + x * pdf;
}

// Shared per-token two-layer MLP, y = act(x W1 + b1) W2 + b2, all d x d.
struct MlpWeights {
  TensorD w1, b1, w2, b2;  // b* are 1 x d
  Activation activation = Activation::gelu;

  std::size_t dim() const { return w1.rows(); }

  static MlpWeights seeded(std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    MlpWeights m;
    m.w1 = rng.normal_matrix(d, d, s);
    m.b1 = rng.normal_matrix(1, d, 0.1);
    m.w2 = rng.normal_matrix(d, d, s);
    m.b2 = rng.normal_matrix(1, d, 0.1);
    return m;
  }

  static MlpWeights identity(std::size_t d) {
    MlpWeights m;
    m.w1 = TensorD::matrix(d, d);
    m.w2 = TensorD::matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) m.w1(i, i) = m.w2(i, i) = 1.0;
    m.b1 = TensorD::matrix(1, d);
    m.b2 = TensorD::matrix(1, d);
    m.activation = Activation::linear;
    return m;
  }
};

namespace detail {

inline void check_blob_embed_shapes(const std::vector<double>& e_tau, const EmbeddingSeq& e_s,
                                    const MlpWeights& mlp) {
  if (e_s.rank() != 2 || e_s.rows() < 1) throw Error(Errc::shape, "text embedding must be L x d/2, L >= 1");
  const std::size_t d = e_tau.size() + e_s.cols();
  if (e_tau.size() != e_s.cols())
    throw Error(Errc::shape, "blob parameter embedding and text embedding widths differ");
  require_shape(mlp.w1, d, d, "mlp.w1");
  require_shape(mlp.w2, d, d, "mlp.w2");
  require_shape(mlp.b1, 1, d, "mlp.b1");
  require_shape(mlp.b2, 1, d, "mlp.b2");
}

// Rows [e_tau ; e_s_l].
inline TensorD concat_tokens(const std::vector<double>& e_tau, const EmbeddingSeq& e_s) {
  const std::size_t half = e_tau.size();
  TensorD x = TensorD::matrix(e_s.rows(), 2 * half);
  for (std::size_t l = 0; l < e_s.rows(); ++l)
    for (std::size_t k = 0; k < half; ++k) {
      x(l, k) = e_tau[k];
      x(l, half + k) = e_s(l, k);
    }
  return x;
}

}  // namespace detail

inline BlobEmbedding blob_embed(const std::vector<double>& e_tau, const EmbeddingSeq& e_s,
                                const MlpWeights& mlp) {
  detail::check_blob_embed_shapes(e_tau, e_s, mlp);
  TensorD hidden = matmul(detail::concat_tokens(e_tau, e_s), mlp.w1);
  for (std::size_t l = 0; l < hidden.rows(); ++l)
    for (std::size_t k = 0; k < hidden.cols(); ++k) {
      const double z = hidden(l, k) + mlp.b1(0, k);
      hidden(l, k) = mlp.activation == Activation::gelu ? gelu(z) : z;
    }
  TensorD out = matmul(hidden, mlp.w2);
  for (std::size_t l = 0; l < out.rows(); ++l)
    for (std::size_t k = 0; k < out.cols(); ++k) out(l, k) += mlp.b2(0, k);
  return out;
}

struct BlobEmbedGrads {
  std::vector<double> e_tau;
  EmbeddingSeq e_s;
  MlpWeights mlp;  // gradients, same layout as the weights
};

// Gradients of <upstream, blob_embed(e_tau, e_s, mlp)>.
inline BlobEmbedGrads blob_embed_backward(const std::vector<double>& e_tau, const EmbeddingSeq& e_s,
                                          const MlpWeights& mlp, const TensorD& upstream) {
  detail::check_blob_embed_shapes(e_tau, e_s, mlp);
  const std::size_t d = mlp.dim();
  const std::size_t half = e_tau.size();
  require_shape(upstream, e_s.rows(), d, "upstream gradient");

  const TensorD x = detail::concat_tokens(e_tau, e_s);
  TensorD pre = matmul(x, mlp.w1);
  TensorD hidden = pre;
  for (std::size_t l = 0; l < pre.rows(); ++l)
    for (std::size_t k = 0; k < d; ++k) {
      pre(l, k) += mlp.b1(0, k);
      hidden(l, k) = mlp.activation == Activation::gelu ? gelu(pre(l, k)) : pre(l, k);
    }

  BlobEmbedGrads g;
  g.mlp.activation = mlp.activation;
  g.mlp.w2 = matmul_tn(hidden, upstream);
  g.mlp.b2 = TensorD::matrix(1, d);
  for (std::size_t l = 0; l < upstream.rows(); ++l)
    for (std::size_t k = 0; k < d; ++k) g.mlp.b2(0, k) += upstream(l, k);

  TensorD dpre = matmul_nt(upstream, mlp.w2);
  for (std::size_t l = 0; l < dpre.rows(); ++l)
    for (std::size_t k = 0; k < d; ++k)
      if (mlp.activation == Activation::gelu) dpre(l, k) *= gelu_grad(pre(l, k));

  g.mlp.w1 = matmul_tn(x, dpre);
  g.mlp.b1 = TensorD::matrix(1, d);
  for (std::size_t l = 0; l < dpre.rows(); ++l)
    for (std::size_t k = 0; k < d; ++k) g.mlp.b1(0, k) += dpre(l, k);

  const TensorD dx = matmul_nt(dpre, mlp.w1);
  g.e_tau.assign(half, 0.0);
  g.e_s = TensorD::matrix(e_s.rows(), half);
  for (std::size_t l = 0; l < dx.rows(); ++l)
    for (std::size_t k = 0; k < half; ++k) {
      g.e_tau[k] += dx(l, k);
      g.e_s(l, k) = dx(l, half + k);
    }
  return g;
}

// ---- context interpolation --------------------------------------------------

enum class InterpOrientation { as_printed, standard };
enum class InterpMethod { linear, slerp };

struct InterpWeights {
  double on_earlier;  // weight of the anchor at t_k
  double on_later;    // weight of the anchor at t_k + k
};

// Weights for frame t in [t_k, t_k + k]. As printed, (t_k + k - t)/k multiplies the
// later anchor and (t - t_k)/k the earlier one; `standard` swaps them.
inline InterpWeights interp_weights(int t, int t_k, int k, InterpOrientation o) {
  if (k < 1) throw Error(Errc::range, "anchor interval must be >= 1");
  if (t < t_k || t > t_k + k) throw Error(Errc::range, "frame outside the anchor interval");
  const double to_later = static_cast<double>(t_k + k - t) / k;
  const double from_earlier = static_cast<double>(t - t_k) / k;
  if (o == InterpOrientation::as_printed) return {from_earlier, to_later};
  return {to_later, from_earlier};
}

inline EmbeddingSeq interp_linear(const EmbeddingSeq& earlier, const EmbeddingSeq& later, int t,
                                  int t_k, int k,
                                  InterpOrientation o = InterpOrientation::as_printed) {
  require_same_shape(earlier, later, "interp_linear");
  if (!(t > t_k && t < t_k + k))
    throw Error(Errc::range, "interpolated frame must lie strictly between the anchors");
  const InterpWeights w = interp_weights(t, t_k, k, o);
  EmbeddingSeq out(earlier.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = w.on_later * later[i] + w.on_earlier * earlier[i];
  return out;
}

// Per-token spherical interpolation; near-parallel tokens fall back to lerp.
inline EmbeddingSeq interp_slerp(const EmbeddingSeq& e1, const EmbeddingSeq& e2, double alpha) {
  require_same_shape(e1, e2, "interp_slerp");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::range, "slerp weight must lie in [0, 1]");
  EmbeddingSeq out(e1.shape());
  const std::size_t dim = e1.cols();
  for (std::size_t l = 0; l < e1.rows(); ++l) {
    const double* a = e1.row(l);
    const double* b = e2.row(l);
    double* o = out.row(l);
    double na = 0, nb = 0, dot = 0;
    for (std::size_t k = 0; k < dim; ++k) {
      na += a[k] * a[k];
      nb += b[k] * b[k];
      dot += a[k] * b[k];
    }
    if (na == 0.0 || nb == 0.0)
      throw Error(Errc::degenerate_vector, "zero-norm token vector at row " + std::to_string(l));
    const double cos_omega = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
    const double omega = std::acos(cos_omega);
    if (omega < 1e-6) {
      for (std::size_t k = 0; k < dim; ++k) o[k] = a[k] + alpha * (b[k] - a[k]);
      continue;
    }
    const double s = std::sin(omega);
    const double wa = std::sin((1.0 - alpha) * omega) / s;
    const double wb = std::sin(alpha * omega) / s;
    for (std::size_t k = 0; k < dim; ++k) o[k] = wa * a[k] + wb * b[k];
  }
  return out;
}

// Interface for producing non-anchor description embeddings from anchor embeddings.
// Learned interpolators (e.g. a Perceiver trained on anchor sequences) plug in here.
class ContextInterpolator {
 public:
  virtual ~ContextInterpolator() = default;
  // anchors: frame -> embedding, nonempty. Returns one embedding per frame in [0, num_frames).
  virtual std::vector<EmbeddingSeq> interpolate(const std::map<int, EmbeddingSeq>& anchors,
                                                int num_frames) const = 0;
};

// Anchor frames keep their own embedding; frames between anchors are blended pairwise;
// frames outside the anchor span copy the nearest anchor. Spacing may be ragged.
class PairwiseInterpolator : public ContextInterpolator {
 public:
  explicit PairwiseInterpolator(InterpMethod method = InterpMethod::linear,
                                InterpOrientation orientation = InterpOrientation::as_printed)
      : method_(method), orientation_(orientation) {}

  std::vector<EmbeddingSeq> interpolate(const std::map<int, EmbeddingSeq>& anchors,
                                        int num_frames) const override {
    if (anchors.empty()) throw Error(Errc::range, "context interpolation needs at least one anchor");
    std::vector<EmbeddingSeq> out(static_cast<std::size_t>(num_frames));
    for (int t = 0; t < num_frames; ++t) {
      auto next = anchors.lower_bound(t);
      if (next != anchors.end() && next->first == t) {
        out[t] = next->second;
      } else if (next == anchors.begin()) {
        out[t] = next->second;
      } else if (next == anchors.end()) {
        out[t] = std::prev(next)->second;
      } else {
        auto prev = std::prev(next);
        const int k = next->first - prev->first;
        if (method_ == InterpMethod::linear) {
          out[t] = interp_linear(prev->second, next->second, t, prev->first, k, orientation_);
        } else {
          const InterpWeights w = interp_weights(t, prev->first, k, orientation_);
          out[t] = interp_slerp(prev->second, next->second, w.on_later);
        }
      }
    }
    return out;
  }

 private:
  InterpMethod method_;
  InterpOrientation orientation_;
};

// ---- text embedding providers -----------------------------------------------

class TextEmbedProvider {
 public:
  virtual ~TextEmbedProvider() = default;
  virtual EmbeddingSeq embed(const std::string& caption) const = 0;
};

// Stand-in encoder: rows drawn from a generator seeded by (caption hash, seed), unit norm.
class DeterministicStub : public TextEmbedProvider {
 public:
  DeterministicStub(std::size_t tokens, std::size_t dim, std::uint64_t seed = 0)
      : tokens_(tokens), dim_(dim), seed_(seed) {
    if (tokens < 1 || dim < 1) throw Error(Errc::range, "stub embedding extents must be >= 1");
  }

  EmbeddingSeq embed(const std::string& caption) const override {
    Rng rng(fnv1a(caption) ^ (seed_ * 0x9e3779b97f4a7c15ull));
    EmbeddingSeq e = EmbeddingSeq::matrix(tokens_, dim_);
    for (std::size_t l = 0; l < tokens_; ++l) {
      double norm = 0;
      for (std::size_t k = 0; k < dim_; ++k) {
        e(l, k) = rng.normal();
        norm += e(l, k) * e(l, k);
      }
      norm = std::sqrt(norm);
      for (std::size_t k = 0; k < dim_; ++k) e(l, k) /= norm;
    }
    return e;
  }

 private:
  std::size_t tokens_, dim_;
  std::uint64_t seed_;
};

inline std::string caption_hash(const std::string& caption) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(caption)));
  return buf;
}

// Raw little-endian f32 payload; the sidecar is {"shape":[L,dim],"dtype":"f32le"}.
inline std::string encode_f32le(const TensorD& x) {
  std::string out;
  out.reserve(x.size() * 4);
  for (double v : x.data()) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
  }
  return out;
}

inline std::string encode_sidecar(const std::vector<std::size_t>& shape) {
  nlohmann::ordered_json j;
  j["shape"] = shape;
  j["dtype"] = "f32le";
  return j.dump() + "\n";
}

inline TensorD decode_f32le(const std::string& payload, const std::string& sidecar) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(sidecar);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.byte > 0 ? e.byte - 1 : 0, e.what());
  }
  if (meta.value("dtype", "") != "f32le") throw Error(Errc::schema, "embedding dtype must be f32le");
  const auto shape = meta.at("shape").get<std::vector<std::size_t>>();
  TensorD out(shape);
  if (payload.size() != out.size() * 4)
    throw Error(Errc::io, "embedding payload has " + std::to_string(payload.size()) +
                              " bytes, expected " + std::to_string(out.size() * 4));
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[4 * i + b])) << (8 * b);
    float f;
    std::memcpy(&f, &bits, 4);
    out[i] = f;
  }
  return out;
}

inline void write_embedding(const std::string& path, const TensorD& x) {
  write_file(path, encode_f32le(x));
  write_file(path + ".json", encode_sidecar(x.shape()));
}

inline TensorD read_embedding(const std::string& path) {
  return decode_f32le(read_file(path), read_file(path + ".json"));
}

// Precomputed embeddings; the manifest maps caption_hash(caption) -> payload path
// (relative paths resolve against the manifest's directory).
class FileProvider : public TextEmbedProvider {
 public:
  explicit FileProvider(const std::string& manifest_path) {
    const auto slash = manifest_path.find_last_of('/');
    base_ = slash == std::string::npos ? "" : manifest_path.substr(0, slash + 1);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(e.byte > 0 ? e.byte - 1 : 0, e.what());
    }
    for (const auto& [hash, path] : j.items()) paths_[hash] = path.get<std::string>();
  }

  EmbeddingSeq embed(const std::string& caption) const override {
    auto it = paths_.find(caption_hash(caption));
    if (it == paths_.end())
      throw Error(Errc::io, "no precomputed embedding for caption hash " + caption_hash(caption));
    const std::string& p = it->second;
    return read_embedding(!p.empty() && p[0] == '/' ? p : base_ + p);
  }

 private:
  std::string base_;
  std::map<std::string, std::string> paths_;
};

}  // namespace blobvid
