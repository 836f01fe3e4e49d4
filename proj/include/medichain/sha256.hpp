#pragma once

#include <sodium.h>

#include <stdexcept>

#include "medichain/bytes.hpp"

namespace medichain {

inline void ensure_sodium() {
  static const bool ready = [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
    return true;
  }();
  (void)ready;
}

/// Incremental SHA-256. Copyable, so a partially absorbed prefix can be
/// reused across many suffixes (the mining loop relies on this).
class Sha256 {
 public:
  Sha256() { crypto_hash_sha256_init(&state_); }

  Sha256& update(ByteView data) {
    crypto_hash_sha256_update(&state_, data.data(), data.size());
    return *this;
  }

  Hash32 finish() {
    Hash32 out;
    crypto_hash_sha256_final(&state_, out.bytes.data());
    return out;
  }

 private:
  crypto_hash_sha256_state state_;
};

inline Hash32 sha256(ByteView data) {
  Hash32 out;
  crypto_hash_sha256(out.bytes.data(), data.data(), data.size());
  return out;
}

inline Hash32 sha256(std::string_view text) { return sha256(as_bytes(text)); }

/// Number of leading zero bits of a digest, 0..256.
inline int leading_zero_bits(const Hash32& h) {
  int bits = 0;
  for (auto b : h.bytes) {
    if (b == 0) {
      bits += 8;
      continue;
    }
    for (int mask = 0x80; (b & mask) == 0; mask >>= 1) ++bits;
    break;
  }
  return bits;
}

}  // namespace medichain
