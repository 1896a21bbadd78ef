#pragma once

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <string>

namespace clitest {

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI through the shell; stderr is discarded unless `keep_stderr`.
inline Run run(const std::string& args, bool keep_stderr = false) {
  const std::string cmd = std::string("\"") + BLOBVID_CLI_PATH + "\" " + args + (keep_stderr ? " 2>&1" : " 2>/dev/null");
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int st = ::pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

inline std::string data(const std::string& name) { return std::string(BLOBVID_DATA_DIR) + "/" + name; }

}  // namespace clitest
