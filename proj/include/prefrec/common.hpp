#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace prefrec {

// Dense indices into the item/user catalogs. External files use opaque
// string ids; everything past ingestion works on these.
using ItemIdx = int32_t;
using UserIdx = int32_t;

// All hard errors in the library are thrown as Error; the CLI turns them
// into stderr + nonzero exit.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

// FNV-1a, used for manifests and checkpoint/catalog integrity tags.
inline uint64_t fnv1a(std::string_view bytes, uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string to_hex(uint64_t v);

// Fixed-point decimal formatting; all persisted floats go through this so
// reruns are byte-identical.
std::string format_fixed(double v, int decimals);

}  // namespace prefrec
