#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace vic {

// Error hierarchy. Codec and training code throws these; the CLI maps them
// to exit codes and messages.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };      // bad shapes, bad layer wiring
struct UsageError : Error { using Error::Error; };       // API misuse (backward before forward, ...)
struct NumericalError : Error { using Error::Error; };   // non-finite values in a forward pass
struct IoError : Error { using Error::Error; };          // file system / image decode
struct FormatError : Error { using Error::Error; };      // bad magic or version in a serialized file
struct ShapeMismatchError : Error { using Error::Error; }; // checkpoint shape table mismatch
struct CorruptStreamError : Error { using Error::Error; }; // arithmetic decoder ran past the payload
struct HashMismatchError : Error { using Error::Error; }; // container does not belong to the checkpoint
struct TrainingError : Error { using Error::Error; };    // divergence (non-finite loss)

template <typename... Args>
std::string strfmt(const char* fmt, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return std::string(buf);
}

}  // namespace vic
