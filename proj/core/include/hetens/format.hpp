#pragma once

#include <charconv>
#include <string>

namespace hetens {

/// Shortest decimal text that parses back to the same double.
inline std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace hetens
