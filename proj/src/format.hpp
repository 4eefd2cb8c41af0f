#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace trainopt::detail {

// Shortest of %.15g/%.17g that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  if (std::strtod(buf, nullptr) != v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
  }
  return buf;
}

}  // namespace trainopt::detail
