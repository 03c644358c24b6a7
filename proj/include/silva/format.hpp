#pragma once

#include <charconv>
#include <string>

namespace silva {

// Fixed-precision significand formatting (9 significant digits) so that
// output files are byte-stable across runs. Locale-independent.
inline std::string format_g9(double value) {
  char buf[40];
  auto [ptr, ec] =
      std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 9);
  return std::string(buf, ptr);
}

// Full-precision variant, round-trips a double exactly.
inline std::string format_exact(double value) {
  char buf[40];
  auto [ptr, ec] =
      std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

}  // namespace silva
