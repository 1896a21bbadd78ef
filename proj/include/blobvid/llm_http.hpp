#pragma once

// Chat-completion client over cpp-httplib. Define CPPHTTPLIB_OPENSSL_SUPPORT (and link
// OpenSSL) before including to reach https endpoints.

#include <cstdlib>
#include <string>

#include "httplib.h"

#include "blobvid/layout.hpp"

namespace blobvid {

struct HttpEndpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // request path, defaults to /v1/chat/completions
};

inline HttpEndpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(Errc::range, "endpoint URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/v1/chat/completions"};
  return {url.substr(0, slash), url.substr(slash)};
}

// One blocking POST per call; not meant to be shared across threads.
class HttpChatProvider : public LlmProvider {
 public:
  HttpChatProvider(std::string endpoint_url, std::string model, std::string token_env = "")
      : endpoint_(split_endpoint(endpoint_url)), model_(std::move(model)),
        token_env_(std::move(token_env)) {}

  std::string complete(const std::string& prompt) override {
    httplib::Client cli(endpoint_.origin);
    cli.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!token_env_.empty()) {
      const char* tok = std::getenv(token_env_.c_str());
      if (!tok) throw Error(Errc::io, "auth token variable " + token_env_ + " is not set");
      headers.emplace("Authorization", std::string("Bearer ") + tok);
    }
    auto res = cli.Post(endpoint_.path, headers, chat_request_body(model_, prompt), "application/json");
    if (!res) throw Error(Errc::io, "request to " + endpoint_.origin + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw Error(Errc::io, "endpoint returned HTTP " + std::to_string(res->status));
    return extract_completion_text(res->body);
  }

 private:
  HttpEndpoint endpoint_;
  std::string model_;
  std::string token_env_;
};

}  // namespace blobvid
