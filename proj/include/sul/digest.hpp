// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <string>

namespace sul {

// FNV-1a 64-bit running digest. Used for ranking/forget-set fingerprints and
// for the report content hashes in the run manifest.
class Digest {
 public:
  Digest& add_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001B3ULL;
    }
    return *this;
  }

  Digest& add(const std::string& s) {
    add_bytes(s.data(), s.size());
    const char nul = '\0';
    return add_bytes(&nul, 1);
  }

  Digest& add(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    return add(bits);
  }

  Digest& add(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    return add_bytes(b, 8);
  }

  Digest& add(int v) { return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }

  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 0; i < 16; ++i)
      out[static_cast<std::size_t>(i)] = digits[(hash_ >> (60 - 4 * i)) & 0xF];
    return out;
  }

  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xCBF29CE484222325ULL;
};

}  // namespace sul
