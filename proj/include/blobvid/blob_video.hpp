#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "blobvid/blob.hpp"
#include "blobvid/ellipse_fit.hpp"

namespace blobvid {

// One object over time. Params may be sparse until densify(); captions live on anchor frames.
struct BlobTrack {
  std::string id;
  std::map<int, BlobParams> params;
  std::map<int, std::string> captions;

  friend bool operator==(const BlobTrack&, const BlobTrack&) = default;
};

struct BlobVideo {
  int num_frames = 1;
  FrameGeometry geom;
  int anchor_interval = 1;
  std::vector<int> explicit_anchors;  // empty: anchors are multiples of anchor_interval
  std::vector<BlobTrack> tracks;

  std::vector<int> anchor_frames() const {
    if (!explicit_anchors.empty()) return explicit_anchors;
    std::vector<int> out;
    for (int t = 0; t < num_frames; t += std::max(1, anchor_interval)) out.push_back(t);
    return out;
  }

  bool is_dense() const {
    for (const auto& tr : tracks)
      if (static_cast<int>(tr.params.size()) != num_frames) return false;
    return true;
  }

  friend bool operator==(const BlobVideo&, const BlobVideo&) = default;
};

// Fills every frame of every track. Gaps between annotated frames are interpolated;
// frames outside the annotated span copy the nearest annotation.
inline BlobTrack densify_track(const BlobTrack& tr, int num_frames) {
  if (tr.params.empty())
    throw Error(Errc::empty_track, "track '" + tr.id + "' has no annotated frames");
  BlobTrack out = tr;
  for (int t = 0; t < num_frames; ++t) {
    if (tr.params.count(t)) continue;
    auto next = tr.params.lower_bound(t);
    if (next == tr.params.begin()) {
      out.params[t] = next->second;
    } else if (next == tr.params.end()) {
      out.params[t] = std::prev(next)->second;
    } else {
      auto prev = std::prev(next);
      const double alpha =
          static_cast<double>(t - prev->first) / static_cast<double>(next->first - prev->first);
      out.params[t] = interpolate_blob_params(canonicalize(prev->second),
                                              canonicalize(next->second), alpha);
    }
  }
  return out;
}

inline BlobVideo densify(const BlobVideo& v) {
  BlobVideo out = v;
  for (auto& tr : out.tracks) tr = densify_track(tr, v.num_frames);
  return out;
}

struct Violation {
  std::string track;  // empty for video-level issues
  std::optional<int> frame;
  std::string field;
  std::string message;

  std::string describe() const {
    std::string s;
    if (!track.empty()) s += "track " + track;
    if (frame) s += (s.empty() ? "" : ", ") + std::string("frame ") + std::to_string(*frame);
    if (!field.empty()) s += (s.empty() ? "" : ", ") + std::string("field ") + field;
    return s + ": " + message;
  }
};

inline std::vector<Violation> validate(const BlobVideo& v) {
  std::vector<Violation> out;
  if (v.num_frames < 1) out.push_back({"", std::nullopt, "num_frames", "must be >= 1"});
  if (v.geom.width < 1 || v.geom.height < 1)
    out.push_back({"", std::nullopt, "geometry", "width and height must be >= 1"});
  if (v.anchor_interval < 1) out.push_back({"", std::nullopt, "anchor_interval", "must be >= 1"});
  for (int t : v.explicit_anchors)
    if (t < 0 || t >= v.num_frames)
      out.push_back({"", t, "anchors", "anchor frame outside [0, num_frames)"});

  std::set<std::string> seen;
  for (const auto& tr : v.tracks) {
    if (!seen.insert(tr.id).second) out.push_back({tr.id, std::nullopt, "id", "duplicate track id"});
    if (tr.params.empty()) out.push_back({tr.id, std::nullopt, "params", "track has no frames"});
    for (const auto& [t, p] : tr.params) {
      if (t < 0 || t >= v.num_frames) {
        out.push_back({tr.id, t, "params", "frame outside [0, num_frames)"});
        continue;
      }
      bool ok = true;
      if (!std::isfinite(p.cx) || !std::isfinite(p.cy)) {
        out.push_back({tr.id, t, "center", "non-finite center"});
        ok = false;
      }
      if (!(p.a > 0.0) || !std::isfinite(p.a)) {
        out.push_back({tr.id, t, "a", "radius must be positive"});
        ok = false;
      }
      if (!(p.b > 0.0) || !std::isfinite(p.b)) {
        out.push_back({tr.id, t, "b", "radius must be positive"});
        ok = false;
      }
      if (!(p.theta > -kPi && p.theta <= kPi)) {
        out.push_back({tr.id, t, "theta", "angle outside (-pi, pi]"});
        ok = false;
      }
      if (ok && !is_canonical(p))
        out.push_back({tr.id, t, "canonical", "params not in canonical form (a >= b, theta in (-pi/2, pi/2])"});
    }
    for (const auto& [t, cap] : tr.captions) {
      if (t < 0 || t >= v.num_frames)
        out.push_back({tr.id, t, "captions", "caption frame outside [0, num_frames)"});
      else if (!tr.params.count(t))
        out.push_back({tr.id, t, "captions", "caption on a frame without blob params"});
    }
  }
  return out;
}

// ---- canonical JSON ---------------------------------------------------------

namespace detail {

inline bool all_digits(const std::string& s) {
  return !s.empty() && s.size() < 10 &&
         std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline int parse_frame_key(const std::string& key) {
  if (!all_digits(key)) throw Error(Errc::schema, "frame key '" + key + "' is not a non-negative integer");
  return std::stoi(key);
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const BlobVideo& v) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["version"] = 1;
  j["width"] = v.geom.width;
  j["height"] = v.geom.height;
  j["num_frames"] = v.num_frames;
  j["anchor_interval"] = v.anchor_interval;
  if (!v.explicit_anchors.empty()) j["anchors"] = v.explicit_anchors;
  ordered_json tracks = ordered_json::array();
  for (const auto& tr : v.tracks) {
    ordered_json jt;
    if (detail::all_digits(tr.id) && (tr.id.size() == 1 || tr.id[0] != '0'))
      jt["id"] = std::stoi(tr.id);
    else
      jt["id"] = tr.id;
    ordered_json params = ordered_json::object();
    for (const auto& [t, p] : tr.params)
      params[std::to_string(t)] = {p.cx, p.cy, p.a, p.b, p.theta};
    jt["params"] = std::move(params);
    ordered_json caps = ordered_json::object();
    for (const auto& [t, c] : tr.captions) caps[std::to_string(t)] = c;
    jt["captions"] = std::move(caps);
    tracks.push_back(std::move(jt));
  }
  j["tracks"] = std::move(tracks);
  return j;
}

inline std::string serialize_video(const BlobVideo& v) { return to_json(v).dump(1) + "\n"; }

inline BlobVideo video_from_json(const nlohmann::ordered_json& j) {
  auto need = [&](const char* key) -> const nlohmann::ordered_json& {
    if (!j.contains(key)) throw Error(Errc::schema, std::string("missing key '") + key + "'");
    return j.at(key);
  };
  try {
    if (need("version").get<int>() != 1) throw Error(Errc::schema, "unsupported version");
    BlobVideo v;
    v.geom = FrameGeometry(need("width").get<int>(), need("height").get<int>());
    v.num_frames = need("num_frames").get<int>();
    v.anchor_interval = need("anchor_interval").get<int>();
    if (j.contains("anchors")) v.explicit_anchors = j.at("anchors").get<std::vector<int>>();
    for (const auto& jt : need("tracks")) {
      BlobTrack tr;
      const auto& id = jt.at("id");
      tr.id = id.is_string() ? id.get<std::string>() : std::to_string(id.get<long long>());
      for (const auto& [key, arr] : jt.at("params").items()) {
        if (!arr.is_array() || arr.size() != 5)
          throw Error(Errc::schema, "track " + tr.id + " frame " + key + ": blob needs 5 numbers");
        tr.params[detail::parse_frame_key(key)] =
            BlobParams{arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>(),
                       arr[3].get<double>(), arr[4].get<double>()};
      }
      if (jt.contains("captions"))
        for (const auto& [key, cap] : jt.at("captions").items())
          tr.captions[detail::parse_frame_key(key)] = cap.get<std::string>();
      v.tracks.push_back(std::move(tr));
    }
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::schema, e.what());
  }
}

inline BlobVideo parse_video(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.byte > 0 ? e.byte - 1 : 0, e.what());
  }
  return video_from_json(j);
}

}  // namespace blobvid
