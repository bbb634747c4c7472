#pragma once

#include <charconv>
#include <string>

namespace emtree {

// Locale-independent shortest round-trip formatting, so persisted CSV files
// are byte-stable across runs.
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace emtree
