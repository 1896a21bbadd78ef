#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace blobvid {

enum class Errc {
  invalid_blob,
  shape,
  empty_mask,
  range,
  empty_track,
  too_large,
  degenerate_vector,
  parse,
  schema,
  empty_prompt,
  undefined,
  io,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_blob: return "InvalidBlob";
    case Errc::shape: return "ShapeError";
    case Errc::empty_mask: return "EmptyMask";
    case Errc::range: return "RangeError";
    case Errc::empty_track: return "EmptyTrack";
    case Errc::too_large: return "TooLarge";
    case Errc::degenerate_vector: return "DegenerateVector";
    case Errc::parse: return "ParseError";
    case Errc::schema: return "SchemaError";
    case Errc::empty_prompt: return "EmptyPrompt";
    case Errc::undefined: return "Undefined";
    case Errc::io: return "IOError";
  }
  return "Error";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Malformed JSON; offset is the byte position in the original input text.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : Error(Errc::parse, "at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace blobvid
