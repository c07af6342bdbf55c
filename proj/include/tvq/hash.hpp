#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tvq {

/// 64-bit FNV-1a, used for cheap content fingerprints in model containers.
class Fnv1a {
 public:
  void update(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(const std::string& s) { update(s.data(), s.size()); }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hash_to_hex(std::uint64_t h);

}  // namespace tvq
