#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "blobvid/attention.hpp"
#include "blobvid/blob_video.hpp"
#include "blobvid/config.hpp"
#include "blobvid/embedding.hpp"
#include "blobvid/mask_builder.hpp"

namespace blobvid {

// Toy-scale grounding block: per-frame masked cross-attention into seeded visual
// features, gated residual, then masked 3D self-attention over all frames, gated again.
struct BlockShape {
  std::size_t feature_dim = 16;  // d_g, also the 3D self-attention width
  std::size_t embed_dim = 16;    // d, blob embedding width (d/2 per half)
  std::size_t tokens = 4;        // L
  double gamma_cross = 0.5;
  double gamma_self = 0.5;
};

struct BlockResult {
  TensorD output;  // Thw x d_g
  AttnStats cross_stats;
  AttnStats self_stats;
};

// Per-frame description embeddings for one track: captions embedded on their frames,
// other frames interpolated. Tracks with no caption use the empty-string embedding.
inline std::vector<EmbeddingSeq> track_context(const BlobTrack& tr, int num_frames,
                                               const TextEmbedProvider& provider,
                                               const ContextInterpolator& interp) {
  std::map<int, EmbeddingSeq> anchors;
  for (const auto& [t, cap] : tr.captions) anchors[t] = provider.embed(cap);
  if (anchors.empty()) return std::vector<EmbeddingSeq>(num_frames, provider.embed(""));
  return interp.interpolate(anchors, num_frames);
}

inline BlockResult run_grounding_block(const BlobVideo& v, const Config& cfg,
                                       const TextEmbedProvider& provider,
                                       const BlockShape& shape = {}) {
  if (!v.is_dense()) throw Error(Errc::range, "grounding block needs a densified video");
  const std::size_t half = shape.embed_dim / 2;
  const std::size_t dg = shape.feature_dim;
  const std::size_t hw = static_cast<std::size_t>(cfg.h) * cfg.w;
  const std::size_t n_tracks = v.tracks.size();

  Rng rng(cfg.seed);
  const FourierEncoder encoder(cfg.frequencies, static_cast<int>(half), cfg.seed);
  const MlpWeights mlp = MlpWeights::seeded(shape.embed_dim, cfg.seed + 1);
  CrossAttnWeights<double> cross;
  cross.wq = rng.normal_matrix(dg, dg, 1.0 / std::sqrt(static_cast<double>(dg)));
  for (std::size_t n = 0; n < n_tracks; ++n) {
    cross.wk.push_back(rng.normal_matrix(shape.embed_dim, dg, 1.0 / std::sqrt(static_cast<double>(shape.embed_dim))));
    cross.wv.push_back(rng.normal_matrix(shape.embed_dim, dg, 1.0 / std::sqrt(static_cast<double>(shape.embed_dim))));
  }
  const double s = 1.0 / std::sqrt(static_cast<double>(dg));
  SelfAttnWeights<double> self{rng.normal_matrix(dg, dg, s), rng.normal_matrix(dg, dg, s),
                               rng.normal_matrix(dg, dg, s)};
  const TensorD features = rng.normal_matrix(static_cast<std::size_t>(v.num_frames) * hw, dg);

  const PairwiseInterpolator interp(cfg.interp, cfg.orientation);
  std::vector<std::vector<EmbeddingSeq>> context;
  for (const auto& tr : v.tracks) context.push_back(track_context(tr, v.num_frames, provider, interp));

  BlockResult res;
  TensorD fused = TensorD::matrix(static_cast<std::size_t>(v.num_frames) * hw, dg);
  std::vector<AttnStats> frame_stats(static_cast<std::size_t>(v.num_frames));
  parallel_for(static_cast<std::size_t>(v.num_frames), cfg.threads, [&](std::size_t ti) {
    const int t = static_cast<int>(ti);
    FrameMasks masks = per_frame_masks(v, t, cfg.h, cfg.w, cfg.rho);
    std::vector<TensorD> blobs;
    for (std::size_t n = 0; n < n_tracks; ++n)
      blobs.push_back(blob_embed(encoder.encode(v.tracks[n].params.at(t), v.geom), context[n][ti], mlp));
    TensorD g = TensorD::matrix(hw, dg);
    std::copy(features.row(ti * hw), features.row(ti * hw) + hw * dg, g.row(0));
    const TensorD ca = masked_cross_attention(g, blobs, masks.objects, cross, &frame_stats[ti]);
    const TensorD x = gated_fuse(g, ca, shape.gamma_cross);
    std::copy(x.data().begin(), x.data().end(), fused.row(ti * hw));
  });
  for (const auto& fs : frame_stats) {
    res.cross_stats.max_row_sum_error = std::max(res.cross_stats.max_row_sum_error, fs.max_row_sum_error);
    res.cross_stats.empty_rows += fs.empty_rows;
  }

  const AttnMask3D mask(build_label_field(v, cfg.h, cfg.w, cfg.rho, cfg.threads));
  const TensorD sa = masked_3d_self_attention(fused, mask, self, &res.self_stats, cfg.threads);
  res.output = gated_fuse(fused, sa, shape.gamma_self);
  return res;
}

}  // namespace blobvid
