#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "blobvid/blob.hpp"
#include "blobvid/blob_video.hpp"

namespace blobvid {

// LLM-facing layout: {"Frame<t>": {"Object<id>": {"blob": [cx, cy, a, b, theta], "caption": "..."}}}
struct LayoutObject {
  std::string id;  // text after "Object", opaque
  std::array<double, 5> blob{};
  std::optional<std::string> caption;
};

struct LayoutFrame {
  int index = 0;
  std::vector<LayoutObject> objects;
};

struct LayoutDoc {
  std::vector<LayoutFrame> frames;  // strictly increasing indices

  bool empty() const { return frames.empty(); }
  std::vector<std::string> object_ids() const {
    std::vector<std::string> ids;
    for (const auto& f : frames)
      for (const auto& o : f.objects)
        if (std::find(ids.begin(), ids.end(), o.id) == ids.end()) ids.push_back(o.id);
    return ids;
  }
};

namespace detail {

// Returns the JSON body and its byte offset in `text`, stripping one ``` fence if present.
inline std::pair<std::string, std::size_t> strip_fence(const std::string& text) {
  const auto open = text.find("```");
  if (open == std::string::npos) return {text, 0};
  auto body = text.find('\n', open);
  if (body == std::string::npos) return {text, 0};
  ++body;
  const auto close = text.find("```", body);
  if (close == std::string::npos) return {text.substr(body), body};
  return {text.substr(body, close - body), body};
}

inline std::optional<std::string> strip_prefix(const std::string& key, const std::string& prefix) {
  if (key.size() <= prefix.size() || key.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  return key.substr(prefix.size());
}

}  // namespace detail

inline LayoutDoc parse_layout(const std::string& text) {
  const auto [body, base] = detail::strip_fence(text);
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(base + (e.byte > 0 ? e.byte - 1 : 0), e.what());
  }
  if (!j.is_object()) throw Error(Errc::schema, "layout must be a JSON object of frames");

  LayoutDoc doc;
  int last = -1;
  for (const auto& [fkey, fval] : j.items()) {
    const auto digits = detail::strip_prefix(fkey, "Frame");
    if (!digits || !detail::all_digits(*digits))
      throw Error(Errc::schema, "unknown top-level key '" + fkey + "' (expected Frame<index>)");
    LayoutFrame frame;
    frame.index = std::stoi(*digits);
    if (frame.index <= last)
      throw Error(Errc::schema, fkey + ": frame indices must be strictly increasing");
    last = frame.index;
    if (!fval.is_object()) throw Error(Errc::schema, fkey + ": expected an object of objects");

    for (const auto& [okey, oval] : fval.items()) {
      const std::string path = fkey + "/" + okey;
      const auto id = detail::strip_prefix(okey, "Object");
      if (!id) throw Error(Errc::schema, path + ": unknown key (expected Object<id>)");
      if (!oval.is_object()) throw Error(Errc::schema, path + ": expected {\"blob\", \"caption\"}");
      LayoutObject obj;
      obj.id = *id;
      for (const auto& [k, v] : oval.items()) {
        if (k == "blob") {
          if (!v.is_array() || v.size() != 5)
            throw Error(Errc::schema, path + ": blob must have exactly 5 numbers, got " +
                                          (v.is_array() ? std::to_string(v.size()) : "a non-array"));
          for (std::size_t i = 0; i < 5; ++i) {
            if (!v[i].is_number())
              throw Error(Errc::schema, path + ": blob entry " + std::to_string(i) + " is not a number");
            obj.blob[i] = v[i].get<double>();
          }
          if (!(obj.blob[2] > 0.0) || !(obj.blob[3] > 0.0))
            throw Error(Errc::schema, path + ": blob radii must be positive");
        } else if (k == "caption") {
          if (!v.is_string()) throw Error(Errc::schema, path + ": caption must be a string");
          obj.caption = v.get<std::string>();
        } else {
          throw Error(Errc::schema, path + ": unknown key '" + k + "'");
        }
      }
      if (!oval.contains("blob")) throw Error(Errc::schema, path + ": missing blob");
      frame.objects.push_back(std::move(obj));
    }
    doc.frames.push_back(std::move(frame));
  }
  return doc;
}

// Builds a dense BlobVideo. Centers outside the frame are clamped (reported in
// `warnings`); angles are wrapped and canonicalized.
inline BlobVideo densify_layout(const LayoutDoc& doc, int num_frames, const FrameGeometry& geom,
                                std::vector<std::string>* warnings = nullptr) {
  if (doc.empty()) throw Error(Errc::range, "layout has no frames");
  if (num_frames < doc.frames.back().index + 1)
    throw Error(Errc::range, "num_frames " + std::to_string(num_frames) +
                                 " is smaller than the last layout frame + 1 (" +
                                 std::to_string(doc.frames.back().index + 1) + ")");
  BlobVideo v;
  v.num_frames = num_frames;
  v.geom = geom;
  std::map<std::string, std::size_t> track_of;
  std::set<int> captioned;
  int min_gap = 0;
  for (std::size_t i = 0; i < doc.frames.size(); ++i) {
    const auto& f = doc.frames[i];
    if (i > 0) {
      const int gap = f.index - doc.frames[i - 1].index;
      min_gap = min_gap == 0 ? gap : std::min(min_gap, gap);
    }
    for (const auto& o : f.objects) {
      auto [it, fresh] = track_of.emplace(o.id, v.tracks.size());
      if (fresh) v.tracks.push_back(BlobTrack{o.id, {}, {}});
      BlobTrack& tr = v.tracks[it->second];
      BlobParams p{o.blob[0], o.blob[1], o.blob[2], o.blob[3], o.blob[4]};
      const double cx = std::clamp(p.cx, 0.0, static_cast<double>(geom.width));
      const double cy = std::clamp(p.cy, 0.0, static_cast<double>(geom.height));
      if ((cx != p.cx || cy != p.cy) && warnings)
        warnings->push_back("Frame" + std::to_string(f.index) + "/Object" + o.id +
                            ": center clamped into the frame");
      p.cx = cx;
      p.cy = cy;
      tr.params[f.index] = canonicalize(p);
      if (o.caption) {
        tr.captions[f.index] = *o.caption;
        captioned.insert(f.index);
      }
    }
  }
  v.anchor_interval = std::max(1, min_gap);
  v.explicit_anchors.assign(captioned.begin(), captioned.end());
  return densify(v);
}

// Emits frames 0, stride, 2*stride, ... with every track present there.
inline std::string serialize_layout(const BlobVideo& v, int frame_stride = 1) {
  if (frame_stride < 1) throw Error(Errc::range, "frame stride must be >= 1");
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (int t = 0; t < v.num_frames; t += frame_stride) {
    nlohmann::ordered_json frame = nlohmann::ordered_json::object();
    for (const auto& tr : v.tracks) {
      auto it = tr.params.find(t);
      if (it == tr.params.end()) continue;
      const BlobParams& p = it->second;
      nlohmann::ordered_json obj;
      obj["blob"] = {p.cx, p.cy, p.a, p.b, p.theta};
      if (auto c = tr.captions.find(t); c != tr.captions.end()) obj["caption"] = c->second;
      frame["Object" + tr.id] = std::move(obj);
    }
    if (!frame.empty()) j["Frame" + std::to_string(t)] = std::move(frame);
  }
  return j.dump(2);
}

// ---- in-context prompt ------------------------------------------------------

struct Exemplar {
  std::string prompt;
  std::string layout_json;
};

struct PromptBundle {
  std::string instruction;
  std::vector<Exemplar> exemplars;
};

inline const std::string& exemplar_owl_layout() {
  static const std::string s = R"({"Frame0": {"Object2": {"blob": [443, 252, 102, 72, -2.353],
   "caption": "The bird in the close-up image is a small, brown creature with a white belly. It appears to be in mid-flight, with its wings spread wide and its tail fanned out. The bird is perched on a tree branch, which is covered in green leaves. The bird's eyes are open, and it seems to be looking directly at the camera. "}},
 "Frame2": {"Object2": {"blob": [438, 253, 106, 68, -2.357],
   "caption": " The bird in the close-up image is a small, brown and white bird with a prominent beak, perched on a tree branch. The bird turns its head to the side."}},
 "Frame12": {"Object2": {"blob": [445, 249, 119, 57, -2.023],
   "caption": " The bird in the close-up image is a small owl perched on a tree branch. The bird is looking upwards, turning its face away from the camera. "}}})";
  return s;
}

inline const std::string& exemplar_horse_layout() {
  static const std::string s = R"({"Frame0": {"Object2": {"blob": [365, 277, 93, 64, 1.749],
   "caption": "The horse in the close-up image is a small, brown pony. It is wearing a saddle and a bridle, indicating it is prepared for riding. The pony appears to be walking on a street, with a red car visible in the background. "},
  "Object3": {"blob": [165, 247, 102, 75, -3.095],
   "caption": "The car in the close-up image is a black Volkswagen Beetle. It has a distinctive rounded shape and a yellow license plate. The car appears to be in motion on a road. "},
  "Object4": {"blob": [563, 276, 132, 44, 1.599],
   "caption": "The image is blurry, making it difficult to discern specific details about the person. The person appears to be walking, possibly in a parking lot or similar outdoor setting. The individual is holding onto a leash, suggesting they might be walking a dog. "}},
 "Frame12": {"Object2": {"blob": [387, 229, 136, 95, 2.685],
   "caption": " The horse in the close-up image is a large, brown horse with a white blaze on its face. It appears to be a healthy and well-groomed animal. "},
  "Object3": {"blob": [30, 188, 87, 70, -2.388],
   "caption": " The car in the close-up image is a black sedan with a yellow license plate. The vehicle appears to be parked or stationary, as indicated by the lack of motion blur. "},
  "Object4": {"blob": [670, 242, 151, 64, 1.598],
   "caption": " The image is a close-up of a person who appears to be a woman. She is holding a leash, which suggests she might be with a pet. The woman is wearing a white top and blue jeans. "}}})";
  return s;
}

// Instruction plus the two fixed exemplars (13 frames, 720x480).
inline PromptBundle default_prompt_bundle() {
  PromptBundle b;
  b.instruction =
      "Generate a video layout using ellipses for the given user prompt. Each ellipse should be "
      "represented with five parameters and a paired object caption. The parameters are [cx, cy, "
      "a, b, theta] where cx and cy are the center coordinates, a and b are the major and minor "
      "axes length, and theta is the rotation angle. Assume there are 13 frames in the video, and "
      "you should generate layouts for Frame0,2,4,...,12. The video resolution is 720 width and "
      "480 height. Try to cover all objects mentioned in the prompt. You should follow the format "
      "of the following examples:";
  b.exemplars.push_back(
      {"The video shows a small owl perched on a branch, looking around. It appears to be in a "
       "natural habitat, surrounded by greenery. The owl is alert and focused, possibly observing "
       "its surroundings or looking for prey. The camera angle is from below, giving a clear view "
       "of the owl's feathers and features.",
       exemplar_owl_layout()});
  b.exemplars.push_back(
      {"The video shows a woman leading a horse while a young girl rides on its back. The girl is "
       "wearing a helmet and a riding jacket, and the woman is holding the reins. They are in a "
       "stable or a similar outdoor area with several parked cars in the background.",
       exemplar_horse_layout()});
  return b;
}

inline std::string build_icl_prompt(const std::string& user_prompt,
                                    const PromptBundle& bundle = default_prompt_bundle()) {
  if (user_prompt.empty()) throw Error(Errc::empty_prompt, "user prompt must be nonempty");
  std::string out = bundle.instruction + "\n\n";
  for (std::size_t i = 0; i < bundle.exemplars.size(); ++i) {
    const auto& ex = bundle.exemplars[i];
    out += "Example " + std::to_string(i + 1) + ":\n";
    out += "Prompt: " + ex.prompt + "\n";
    out += "```json\n" + ex.layout_json + "\n```\n\n";
  }
  out += "Prompt: " + user_prompt;
  return out;
}

// ---- LLM seam ----------------------------------------------------------------

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

// First choice's text from a chat-completion response body.
inline std::string extract_completion_text(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.byte > 0 ? e.byte - 1 : 0, e.what());
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw Error(Errc::schema, "completion response has no choices");
  const auto& c = j["choices"][0];
  if (c.contains("message") && c["message"].contains("content"))
    return c["message"]["content"].get<std::string>();
  if (c.contains("text")) return c["text"].get<std::string>();
  throw Error(Errc::schema, "first choice carries no text");
}

// Replays a stored response: either a raw completion text or a chat-completion JSON body.
class FileReplayProvider : public LlmProvider {
 public:
  explicit FileReplayProvider(std::string path) : path_(std::move(path)) {}

  std::string complete(const std::string&) override {
    const std::string body = read_file(path_);
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("choices")) return extract_completion_text(body);
    return body;
  }

 private:
  std::string path_;
};

inline std::string chat_request_body(const std::string& model, const std::string& prompt) {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}});
  return j.dump();
}

}  // namespace blobvid
