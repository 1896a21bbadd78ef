#pragma once

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>

#include "json.hpp"

#include "blobvid/embedding.hpp"
#include "blobvid/mask_builder.hpp"

namespace blobvid {

struct Config {
  int h = 16;  // feature grid
  int w = 16;
  int anchor_interval = 8;
  double rho = 1.0;
  int frequencies = kDefaultFrequencies;
  std::uint64_t seed = 0;
  std::size_t dense_cap = kDefaultDenseCap;
  InterpMethod interp = InterpMethod::linear;
  InterpOrientation orientation = InterpOrientation::as_printed;
  int threads = 1;

  void validate() const {
    if (h < 1 || w < 1) throw Error(Errc::range, "feature resolution must be positive");
    if (anchor_interval < 1) throw Error(Errc::range, "anchor interval must be positive");
    if (!(rho > 0.0)) throw Error(Errc::range, "rescale factor must be positive");
    if (frequencies < 1) throw Error(Errc::range, "frequency count must be positive");
    if (dense_cap < 1) throw Error(Errc::range, "dense cap must be positive");
    if (threads < 1) throw Error(Errc::range, "thread count must be positive");
  }
};

inline InterpMethod parse_interp_method(const std::string& s) {
  if (s == "linear") return InterpMethod::linear;
  if (s == "slerp") return InterpMethod::slerp;
  throw Error(Errc::range, "interp method must be linear or slerp, got '" + s + "'");
}

inline InterpOrientation parse_orientation(const std::string& s) {
  if (s == "as_printed") return InterpOrientation::as_printed;
  if (s == "standard") return InterpOrientation::standard;
  throw Error(Errc::range, "interp orientation must be as_printed or standard, got '" + s + "'");
}

// Keys a config file or the environment may set (env names are BLOBVID_<KEY upper-cased>).
inline void apply_setting(Config& c, const std::string& key, const std::string& value) {
  try {
    if (key == "h") c.h = std::stoi(value);
    else if (key == "w") c.w = std::stoi(value);
    else if (key == "anchor_interval") c.anchor_interval = std::stoi(value);
    else if (key == "rho") c.rho = std::stod(value);
    else if (key == "frequencies") c.frequencies = std::stoi(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "dense_cap") c.dense_cap = std::stoull(value);
    else if (key == "interp") c.interp = parse_interp_method(value);
    else if (key == "orientation") c.orientation = parse_orientation(value);
    else if (key == "threads") c.threads = std::stoi(value);
    else throw Error(Errc::schema, "unknown config key '" + key + "'");
  } catch (const std::logic_error&) {
    throw Error(Errc::schema, "bad value '" + value + "' for config key '" + key + "'");
  }
}

inline const char* const kConfigKeys[] = {"h",         "w",         "anchor_interval", "rho",
                                          "frequencies", "seed",    "dense_cap",       "interp",
                                          "orientation", "threads"};

inline void apply_config_json(Config& c, const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::schema, "config file must hold a JSON object");
  for (const auto& [key, val] : j.items())
    apply_setting(c, key, val.is_string() ? val.get<std::string>() : val.dump());
}

inline void apply_env(Config& c,
                      const std::function<const char*(const char*)>& getenv_fn = [](const char* n) {
                        return std::getenv(n);
                      }) {
  for (const char* key : kConfigKeys) {
    std::string name = "BLOBVID_";
    for (const char* p = key; *p; ++p) name.push_back(static_cast<char>(std::toupper(*p)));
    if (const char* v = getenv_fn(name.c_str())) apply_setting(c, key, v);
  }
}

}  // namespace blobvid
