#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "blobvid/block.hpp"
#include "blobvid/config.hpp"
#include "blobvid/ellipse_fit.hpp"
#include "blobvid/gradcheck.hpp"
#include "blobvid/layout.hpp"
#include "blobvid/llm_http.hpp"
#include "blobvid/mask_builder.hpp"
#include "blobvid/metrics.hpp"
#include "blobvid/render.hpp"

namespace fs = std::filesystem;
using namespace blobvid;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

// Config flags shared by every subcommand; only flags actually given override env/file.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    for (const char* key : kConfigKeys) {
      std::string flag = std::string("--") + key;
      for (auto& ch : flag)
        if (ch == '_') ch = '-';
      opts[key] = app->add_option(flag, values[key]);
    }
    opts["h"]->description("feature grid height");
    opts["w"]->description("feature grid width");
    opts["anchor_interval"]->description("anchor spacing k");
    opts["rho"]->description("ellipse rescale factor");
    opts["frequencies"]->description("Fourier frequency count");
    opts["seed"]->description("seed for all generated weights and features");
    opts["dense_cap"]->description("largest Thw for a dense mask");
    opts["interp"]->description("linear | slerp");
    opts["orientation"]->description("as_printed | standard");
    opts["threads"]->description("worker threads");
  }

  Config resolve() const {
    Config c;
    if (!config_path.empty()) {
      json j;
      try {
        j = json::parse(read_file(config_path));
      } catch (const json::parse_error& e) {
        throw ParseError(e.byte > 0 ? e.byte - 1 : 0, "config: " + std::string(e.what()));
      }
      apply_config_json(c, j);
    }
    apply_env(c);
    for (const auto& [key, opt] : opts)
      if (opt->count() > 0) apply_setting(c, key, values.at(key));
    c.validate();
    return c;
  }
};

void write_output(const std::string& path, const std::string& data) {
  if (path.empty() || path == "-")
    std::cout << data << std::flush;
  else
    write_file(path, data);
}

std::string read_input(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  return read_file(path);
}

bool id_less(const std::string& a, const std::string& b) {
  const bool da = detail::all_digits(a), db = detail::all_digits(b);
  if (da && db && a.size() != b.size()) return a.size() < b.size();
  if (da != db) return da;
  return a < b;
}

// ---- fit --------------------------------------------------------------------

struct FitArgs {
  std::string dir, output;
  int width = 0, height = 0, frames = 0, downsample = 1;
};

BinaryMask downsample_mask(const BinaryMask& m, int s) {
  if (s == 1) return m;
  const int h = std::max(1, m.height() / s), w = std::max(1, m.width() / s);
  BinaryMask out(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (m(std::min(m.height() - 1, r * s + s / 2), std::min(m.width() - 1, c * s + s / 2))) out.set(r, c);
  return out;
}

int run_fit(const FitArgs& a, const Config& cfg) {
  if (!fs::is_directory(a.dir)) throw Error(Errc::io, "mask directory does not exist: " + a.dir);
  static const std::regex pat(R"(^f(\d{4,})_o(.+)\.pgm$)");
  struct Item {
    std::string object;
    int frame;
    std::string path;
  };
  std::vector<Item> items;
  for (const auto& entry : fs::directory_iterator(a.dir)) {
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (std::regex_match(name, m, pat)) items.push_back({m[2], std::stoi(m[1]), entry.path().string()});
  }
  if (items.empty()) throw Error(Errc::io, "no f####_o<id>.pgm masks in " + a.dir);
  std::sort(items.begin(), items.end(), [](const Item& l, const Item& r) {
    if (l.object != r.object) return id_less(l.object, r.object);
    return l.frame < r.frame;
  });

  std::vector<BinaryMask> masks;
  for (const auto& it : items) masks.push_back(decode_pgm_mask(read_file(it.path)));
  const int mh = masks.front().height(), mw = masks.front().width();
  for (std::size_t i = 0; i < masks.size(); ++i)
    if (masks[i].height() != mh || masks[i].width() != mw)
      throw Error(Errc::shape, items[i].path + " differs in size from " + items.front().path);
  const FrameGeometry geom(a.width > 0 ? a.width : mw, a.height > 0 ? a.height : mh);

  std::vector<std::optional<FitResult>> fits(items.size());
  parallel_for(items.size(), cfg.threads, [&](std::size_t i) {
    const BinaryMask m = downsample_mask(masks[i], a.downsample);
    if (m.count() > 0) fits[i] = fit_ellipse(m, geom);
  });

  BlobVideo v;
  v.geom = geom;
  v.anchor_interval = cfg.anchor_interval;
  int last = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    last = std::max(last, items[i].frame);
    if (v.tracks.empty() || v.tracks.back().id != items[i].object) v.tracks.push_back({items[i].object, {}, {}});
    if (!fits[i]) {
      std::cerr << "warning: " << items[i].path << " is empty, frame filled by interpolation\n";
      continue;
    }
    v.tracks.back().params[items[i].frame] = fits[i]->params;
  }
  v.num_frames = a.frames > 0 ? a.frames : last + 1;
  std::erase_if(v.tracks, [](const BlobTrack& t) {
    if (t.params.empty()) std::cerr << "warning: track " << t.id << " has only empty masks, dropped\n";
    return t.params.empty();
  });
  write_output(a.output, serialize_video(densify(v)));
  return kExitOk;
}

// ---- interp -----------------------------------------------------------------

struct InterpArgs {
  std::string layout, output, prompt, replay, endpoint, model, token_env, save_response;
  int frames = 0, width = 720, height = 480;
};

std::string env_or(const std::string& flag, const char* name) {
  if (!flag.empty()) return flag;
  const char* v = std::getenv(name);
  return v ? v : "";
}

int run_interp(const InterpArgs& a, const Config&) {
  std::string text;
  if (!a.prompt.empty()) {
    std::unique_ptr<LlmProvider> llm;
    const std::string endpoint = env_or(a.endpoint, "BLOBVID_LLM_ENDPOINT");
    if (!a.replay.empty()) {
      llm = std::make_unique<FileReplayProvider>(a.replay);
    } else if (!endpoint.empty()) {
      const std::string model = env_or(a.model, "BLOBVID_LLM_MODEL");
      if (model.empty()) throw CLI::ValidationError("--model", "an HTTP endpoint needs a model name");
      llm = std::make_unique<HttpChatProvider>(endpoint, model, env_or(a.token_env, "BLOBVID_LLM_TOKEN_ENV"));
    } else {
      throw CLI::ValidationError("--prompt", "needs --replay or --endpoint");
    }
    text = llm->complete(build_icl_prompt(a.prompt));
    if (!a.save_response.empty()) write_file(a.save_response, text);
  } else {
    if (a.layout.empty()) throw CLI::ValidationError("layout", "give a layout file or --prompt");
    text = read_input(a.layout);
  }
  std::vector<std::string> warnings;
  const BlobVideo v = densify_layout(parse_layout(text), a.frames, FrameGeometry(a.width, a.height), &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  write_output(a.output, serialize_video(v));
  return kExitOk;
}

// ---- mask -------------------------------------------------------------------

struct MaskArgs {
  std::string video, out;
};

int run_mask(const MaskArgs& a, const Config& cfg) {
  const BlobVideo v = densify(parse_video(read_input(a.video)));
  fs::create_directories(a.out);
  parallel_for(static_cast<std::size_t>(v.num_frames), cfg.threads, [&](std::size_t ti) {
    const int t = static_cast<int>(ti);
    const FrameMasks fm = per_frame_masks(v, t, cfg.h, cfg.w, cfg.rho);
    for (std::size_t n = 0; n < fm.objects.size(); ++n)
      write_file(a.out + "/" + mask_filename(t, v.tracks[n].id), encode_pgm(fm.objects[n]));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "f%04d_bg.pgm", t);
    write_file(a.out + "/" + buf, encode_pgm(fm.background));
  });
  const AttnMask3D mask(build_label_field(v, cfg.h, cfg.w, cfg.rho, cfg.threads));
  write_file(a.out + "/label_field.bin", encode_label_field(mask.field()));
  const std::size_t n = mask.size();
  if (n <= cfg.dense_cap) {
    const auto dense = materialize_dense<float>(mask, cfg.dense_cap);
    std::vector<std::uint8_t> px(dense.size());
    for (std::size_t i = 0; i < dense.size(); ++i) px[i] = dense[i] == 0.0f ? 255 : 0;
    write_file(a.out + "/dense_mask.pgm", encode_pgm(static_cast<int>(n), static_cast<int>(n), px));
  } else {
    std::cerr << "note: Thw = " << n << " exceeds the dense cap " << cfg.dense_cap
              << ", dense_mask.pgm not written\n";
  }
  return kExitOk;
}

// ---- render -----------------------------------------------------------------

struct RenderArgs {
  std::string video, out, background;
};

int run_render(const RenderArgs& a, const Config& cfg) {
  const BlobVideo v = densify(parse_video(read_input(a.video)));
  fs::create_directories(a.out);
  render(v, a.out, a.background.empty() ? std::nullopt : std::optional<std::string>(a.background), cfg.threads);
  return kExitOk;
}

// ---- attend -----------------------------------------------------------------

struct AttendArgs {
  std::string video, out, embeddings;
  int tokens = 4;
};

int run_attend(const AttendArgs& a, const Config& cfg) {
  const BlobVideo v = densify(parse_video(read_input(a.video)));
  BlockShape shape;
  shape.tokens = static_cast<std::size_t>(a.tokens);
  std::unique_ptr<TextEmbedProvider> provider;
  if (!a.embeddings.empty())
    provider = std::make_unique<FileProvider>(a.embeddings);
  else
    provider = std::make_unique<DeterministicStub>(shape.tokens, shape.embed_dim / 2, cfg.seed);
  const BlockResult r = run_grounding_block(v, cfg, *provider, shape);
  write_embedding(a.out + ".f32", r.output);
  double max_abs = 0;
  for (double x : r.output.data()) max_abs = std::max(max_abs, std::abs(x));
  nlohmann::ordered_json s;
  s["shape"] = r.output.shape();
  s["cross_max_row_sum_error"] = r.cross_stats.max_row_sum_error;
  s["cross_empty_rows"] = r.cross_stats.empty_rows;
  s["self_max_row_sum_error"] = r.self_stats.max_row_sum_error;
  s["self_empty_rows"] = r.self_stats.empty_rows;
  s["max_abs_output"] = max_abs;
  s["finite"] = r.output.all_finite();
  write_file(a.out + ".stats.json", s.dump(1) + "\n");
  return r.output.all_finite() ? kExitOk : kExitFail;
}

// ---- validate ---------------------------------------------------------------

struct ValidateArgs {
  std::string input;
  bool as_json = false;
};

int run_validate(const ValidateArgs& a, const Config&) {
  const std::string text = read_input(a.input);
  std::vector<nlohmann::ordered_json> found;
  std::string kind = "layout";
  auto add = [&](const std::string& where, const std::string& msg) {
    nlohmann::ordered_json j;
    j["where"] = where;
    j["message"] = msg;
    found.push_back(std::move(j));
  };
  const json probe = json::parse(detail::strip_fence(text).first, nullptr, false);
  if (!probe.is_discarded() && probe.is_object() && probe.contains("version")) {
    kind = "video";
    try {
      for (const auto& viol : validate(parse_video(text)))
        add(viol.track + (viol.frame ? "@" + std::to_string(*viol.frame) : ""), viol.describe());
    } catch (const Error& e) {
      add("document", e.what());
    }
  } else {
    try {
      parse_layout(text);
    } catch (const ParseError& e) {
      add("offset " + std::to_string(e.offset()), e.what());
    } catch (const Error& e) {
      add("document", e.what());
    }
  }
  if (a.as_json) {
    nlohmann::ordered_json rep;
    rep["kind"] = kind;
    rep["valid"] = found.empty();
    rep["violations"] = found;
    std::cout << rep.dump(1) << "\n";
  } else {
    for (const auto& v : found)
      std::cout << v["where"].get<std::string>() << ": " << v["message"].get<std::string>() << "\n";
  }
  return found.empty() ? kExitOk : kExitFail;
}

// ---- metrics ----------------------------------------------------------------

struct MetricsArgs {
  std::string detections, ground_truth, eval_frames, mode = "miou", embeddings, matcher = "optimal";
  bool as_json = false;
};

json load_json(const std::string& path) {
  try {
    return json::parse(read_input(path));
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte > 0 ? e.byte - 1 : 0, path + ": " + e.what());
  }
}

BBox box_from(const json& j, bool with_conf) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 4 && !(with_conf && v.size() == 5))
    throw Error(Errc::schema, "box must be [x0,y0,x1,y1" + std::string(with_conf ? "(,conf)]" : "]"));
  return {v[0], v[1], v[2], v[3], v.size() == 5 ? v[4] : 1.0};
}

std::vector<FrameEval> load_frame_evals(const std::string& dets_path, const std::string& gt_path) {
  // dets: [{"video","frame","boxes":[[x0,y0,x1,y1,conf],..]}]
  // gt:   [{"video","frame","objects":{"<id>":[x0,y0,x1,y1],..}}]
  std::map<std::pair<std::string, int>, FrameEval> by_key;
  for (const auto& e : load_json(gt_path)) {
    FrameEval& fe = by_key[{e.value("video", ""), e.at("frame").get<int>()}];
    fe.video = e.value("video", "");
    fe.frame = e.at("frame").get<int>();
    for (const auto& [id, box] : e.at("objects").items()) fe.ground_truth.push_back({id, box_from(box, false)});
  }
  for (const auto& e : load_json(dets_path)) {
    auto it = by_key.find({e.value("video", ""), e.at("frame").get<int>()});
    if (it == by_key.end()) continue;
    for (const auto& box : e.at("boxes")) it->second.detections.push_back(box_from(box, true));
  }
  std::vector<FrameEval> out;
  for (auto& [k, fe] : by_key) out.push_back(std::move(fe));
  return out;
}

std::vector<RegionEmbedding> load_region_embeddings(const std::string& manifest) {
  // [{"object","frame","kind":"generated|ground_truth|caption","path"}]
  const auto slash = manifest.find_last_of('/');
  const std::string base = slash == std::string::npos ? "" : manifest.substr(0, slash + 1);
  std::vector<RegionEmbedding> out;
  for (const auto& e : load_json(manifest)) {
    RegionEmbedding r;
    r.object = e.at("object").is_string() ? e.at("object").get<std::string>() : e.at("object").dump();
    r.frame = e.at("frame").get<int>();
    const std::string kind = e.at("kind").get<std::string>();
    if (kind == "generated") r.kind = RegionKind::generated;
    else if (kind == "ground_truth") r.kind = RegionKind::ground_truth;
    else if (kind == "caption") r.kind = RegionKind::caption;
    else throw Error(Errc::schema, "unknown region kind '" + kind + "'");
    const std::string p = e.at("path").get<std::string>();
    const TensorD t = read_embedding(!p.empty() && p[0] == '/' ? p : base + p);
    r.vec = t.data();
    out.push_back(std::move(r));
  }
  return out;
}

std::set<int> parse_frame_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.insert(std::stoi(tok));
  return out;
}

int run_metrics(const MetricsArgs& a, const Config&) {
  nlohmann::ordered_json rep;
  rep["metric"] = a.mode;
  if (a.mode == "miou") {
    if (a.detections.empty() || a.ground_truth.empty())
      throw CLI::ValidationError("--mode miou", "needs --detections and --ground-truth");
    const auto evals = load_frame_evals(a.detections, a.ground_truth);
    std::set<int> frames = parse_frame_list(a.eval_frames);
    if (a.eval_frames.empty())
      for (const auto& e : evals) frames.insert(e.frame);
    const auto r = mean_iou(evals, frames, a.matcher == "greedy" ? MatchMethod::greedy : MatchMethod::optimal);
    rep["value"] = r.value;
    rep["num_pairs"] = r.num_objects;
    rep["skipped"] = 0;
    rep["averaging"] = "pooled";
    rep["matcher"] = a.matcher;
  } else {
    if (a.embeddings.empty()) throw CLI::ValidationError("--mode " + a.mode, "needs --embeddings");
    const CosineMode mode = a.mode == "rclip_t" ? CosineMode::rclip_t
                            : a.mode == "rclip_i" ? CosineMode::rclip_i
                                                  : CosineMode::rcfc;
    const auto r = region_cosine_metrics(load_region_embeddings(a.embeddings), mode);
    rep["value"] = r.value;
    rep["num_pairs"] = r.num_pairs;
    rep["skipped"] = r.skipped;
    rep["averaging"] = "pooled";
  }
  if (a.as_json)
    std::cout << rep.dump(1) << "\n";
  else
    std::cout << a.mode << " = " << rep["value"].get<double>() << " over " << rep["num_pairs"].get<std::size_t>()
              << " pairs (" << rep["skipped"].get<std::size_t>() << " skipped)\n";
  return kExitOk;
}

// ---- gradcheck --------------------------------------------------------------

struct GradcheckArgs {
  int instances = 20;
  double tolerance = 1e-4;
};

int run_gradcheck_cmd(const GradcheckArgs& a, const Config& cfg) {
  GradCheckOptions opt;
  opt.tolerance = a.tolerance;
  const GradCheckReport rep = run_gradcheck(cfg.seed, a.instances, opt);
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["instances"] = a.instances;
  j["step"] = opt.step;
  j["tolerance"] = opt.tolerance;
  j["max_rel_error"] = rep.max_rel_error;
  j["passed"] = rep.passed;
  std::map<std::string, double> per_op;
  for (const auto& e : rep.entries) per_op[e.op] = std::max(per_op[e.op], e.max_rel_error);
  j["per_op"] = per_op;
  nlohmann::ordered_json failures = nlohmann::ordered_json::array();
  for (const auto& e : rep.entries)
    if (!e.passed) failures.push_back({{"op", e.op}, {"instance", e.instance}, {"max_rel_error", e.max_rel_error}});
  j["failures"] = failures;
  std::cout << j.dump(1) << "\n";
  return rep.passed ? kExitOk : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blobvid: blob-grounded video layout toolkit"};
  app.require_subcommand(1);
  // -h would collide with the grid-height flag --h
  app.set_help_flag("--help", "Print this help message and exit");
  std::map<std::string, ConfigFlags> flags;

  auto sub = [&](const std::string& name, const std::string& desc) {
    CLI::App* s = app.add_subcommand(name, desc);
    flags[name].attach(s);
    return s;
  };

  FitArgs fit;
  auto* s_fit = sub("fit", "fit ellipses to f####_o<id>.pgm masks, emit a blob video");
  s_fit->add_option("masks", fit.dir, "mask directory")->required();
  s_fit->add_option("-o,--output", fit.output, "output JSON (default stdout)");
  s_fit->add_option("--width", fit.width, "frame width (default: mask width)");
  s_fit->add_option("--height", fit.height, "frame height (default: mask height)");
  s_fit->add_option("--frames", fit.frames, "number of frames (default: last mask frame + 1)");
  s_fit->add_option("--downsample", fit.downsample, "fit on masks subsampled by this factor")->check(CLI::PositiveNumber);

  InterpArgs interp;
  auto* s_interp = sub("interp", "densify a layout (file or LLM completion) into a blob video");
  s_interp->add_option("layout", interp.layout, "layout JSON ('-' for stdin)");
  s_interp->add_option("--frames", interp.frames, "number of output frames")->required()->check(CLI::PositiveNumber);
  s_interp->add_option("--width", interp.width, "frame width")->check(CLI::PositiveNumber);
  s_interp->add_option("--height", interp.height, "frame height")->check(CLI::PositiveNumber);
  s_interp->add_option("-o,--output", interp.output, "output JSON (default stdout)");
  s_interp->add_option("--prompt", interp.prompt, "text prompt sent to the layout planner");
  s_interp->add_option("--replay", interp.replay, "stored planner response to use instead of a live call");
  s_interp->add_option("--endpoint", interp.endpoint, "chat-completion URL (env BLOBVID_LLM_ENDPOINT)");
  s_interp->add_option("--model", interp.model, "model name (env BLOBVID_LLM_MODEL)");
  s_interp->add_option("--token-env", interp.token_env, "variable holding the bearer token (env BLOBVID_LLM_TOKEN_ENV)");
  s_interp->add_option("--save-response", interp.save_response, "write the raw planner response here");

  MaskArgs mask;
  auto* s_mask = sub("mask", "write per-frame masks, the label field and the dense 3D mask");
  s_mask->add_option("video", mask.video, "blob video JSON")->required();
  s_mask->add_option("--out", mask.out, "output directory")->required();

  RenderArgs rend;
  auto* s_render = sub("render", "draw ellipse outlines into frame_####.ppm");
  s_render->add_option("video", rend.video, "blob video JSON")->required();
  s_render->add_option("--out", rend.out, "output directory")->required();
  s_render->add_option("--background", rend.background, "directory of frame_####.ppm to draw over");

  AttendArgs attend;
  auto* s_attend = sub("attend", "run one masked grounding block on seeded features");
  s_attend->add_option("video", attend.video, "blob video JSON")->required();
  s_attend->add_option("--out", attend.out, "output prefix (<out>.f32, <out>.f32.json, <out>.stats.json)")->required();
  s_attend->add_option("--embeddings", attend.embeddings, "caption embedding manifest (default: seeded stub)");
  s_attend->add_option("--tokens", attend.tokens, "stub tokens per caption")->check(CLI::PositiveNumber);

  ValidateArgs val;
  auto* s_validate = sub("validate", "check a layout or blob video file");
  s_validate->add_option("input", val.input, "layout or blob video JSON ('-' for stdin)")->required();
  s_validate->add_flag("--json", val.as_json, "machine-readable report");

  MetricsArgs met;
  auto* s_metrics = sub("metrics", "layout mIOU or region cosine metrics");
  s_metrics->add_option("--detections", met.detections, "detections JSON");
  s_metrics->add_option("--ground-truth", met.ground_truth, "ground-truth JSON");
  s_metrics->add_option("--eval-frames", met.eval_frames, "comma-separated frames (default: all)");
  s_metrics->add_option("--mode", met.mode, "miou | rclip_t | rclip_i | rcfc")
      ->check(CLI::IsMember({"miou", "rclip_t", "rclip_i", "rcfc"}));
  s_metrics->add_option("--matcher", met.matcher, "optimal | greedy")->check(CLI::IsMember({"optimal", "greedy"}));
  s_metrics->add_option("--embeddings", met.embeddings, "region embedding manifest");
  s_metrics->add_flag("--json", met.as_json, "machine-readable report");

  GradcheckArgs gc;
  auto* s_gc = sub("gradcheck", "finite-difference check of every analytic backward");
  s_gc->add_option("--instances", gc.instances, "random instances per op")->check(CLI::PositiveNumber);
  s_gc->add_option("--tolerance", gc.tolerance, "max relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (auto* s : app.get_subcommands()) {
      const std::string name = s->get_name();
      Config cfg;
      try {
        cfg = flags.at(name).resolve();
      } catch (const std::exception& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
      }
      if (name == "fit") return run_fit(fit, cfg);
      if (name == "interp") return run_interp(interp, cfg);
      if (name == "mask") return run_mask(mask, cfg);
      if (name == "render") return run_render(rend, cfg);
      if (name == "attend") return run_attend(attend, cfg);
      if (name == "validate") return run_validate(val, cfg);
      if (name == "metrics") return run_metrics(met, cfg);
      if (name == "gradcheck") return run_gradcheck_cmd(gc, cfg);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << errc_name(e.code()) << ": " << e.what() << "\n";
    return kExitFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
  return kExitUsage;
}
