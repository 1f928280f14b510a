#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

#include "cida/error.hpp"

namespace cida {

// 17 significant digits: enough for exact double round-trips through text.
inline std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// Strict full-token parses.
inline double parse_double(const std::string& s, const std::string& what) {
  if (s.empty()) throw DataError(what + ": empty number");
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw DataError(what + ": bad number '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s, const std::string& what) {
  if (s.empty()) throw DataError(what + ": empty integer");
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) throw DataError(what + ": bad integer '" + s + "'");
  return v;
}

inline unsigned long long parse_uint(const std::string& s, const std::string& what) {
  if (s.empty()) throw DataError(what + ": empty integer");
  char* end = nullptr;
  unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) throw DataError(what + ": bad integer '" + s + "'");
  return v;
}

}  // namespace cida
