#pragma once

#include <cstdint>
#include <string>

namespace distlift {

// 64-bit FNV-1a over bytes, used for config fingerprints in reports.
inline std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string fnv1a_hex(const std::string& data) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(data)));
  return buf;
}

}  // namespace distlift
