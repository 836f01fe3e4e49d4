#pragma once

#include <sodium.h>

#include <optional>
#include <stdexcept>

#include "medichain/bytes.hpp"
#include "medichain/sha256.hpp"

namespace medichain {

struct BadKeyLength : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Ed25519 identity. `secret_key` is the 32-byte seed; the expanded
/// 64-byte signing key is rebuilt on demand and never stored.
struct KeyPair {
  SecretKey secret_key;
  PublicKey public_key;
};

inline KeyPair keygen(const std::optional<SecretKey>& seed = std::nullopt) {
  ensure_sodium();
  KeyPair kp;
  if (seed) {
    kp.secret_key = *seed;
  } else {
    randombytes_buf(kp.secret_key.bytes.data(), kp.secret_key.size);
  }
  std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES> expanded{};
  crypto_sign_seed_keypair(kp.public_key.bytes.data(), expanded.data(), kp.secret_key.bytes.data());
  sodium_memzero(expanded.data(), expanded.size());
  return kp;
}

/// Seed of dev identity `index`: 31 zero bytes followed by the index byte.
inline SecretKey dev_seed(std::uint8_t index) {
  SecretKey s;
  s.bytes.back() = index;
  return s;
}

inline Address derive_address(ByteView public_key) {
  if (public_key.size() != PublicKey::size) {
    throw BadKeyLength("public key must be 32 bytes, got " + std::to_string(public_key.size()));
  }
  auto digest = sha256(public_key);
  return Address::from_span(ByteView(digest.bytes).subspan(32 - Address::size));
}

inline Address derive_address(const PublicKey& public_key) { return derive_address(public_key.view()); }

inline Signature sign(const KeyPair& kp, ByteView message) {
  std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES> expanded{};
  std::array<std::uint8_t, crypto_sign_PUBLICKEYBYTES> pk{};
  crypto_sign_seed_keypair(pk.data(), expanded.data(), kp.secret_key.bytes.data());
  Signature sig;
  crypto_sign_detached(sig.bytes.data(), nullptr, message.data(), message.size(), expanded.data());
  sodium_memzero(expanded.data(), expanded.size());
  return sig;
}

/// Never throws: malformed keys or signatures simply fail verification.
inline bool verify(ByteView public_key, ByteView message, ByteView signature) {
  if (public_key.size() != crypto_sign_PUBLICKEYBYTES || signature.size() != crypto_sign_BYTES) return false;
  ensure_sodium();
  return crypto_sign_verify_detached(signature.data(), message.data(), message.size(), public_key.data()) == 0;
}

inline bool verify(const PublicKey& public_key, ByteView message, const Signature& sig) {
  return verify(public_key.view(), message, sig.view());
}

template <std::size_t N>
std::array<std::uint8_t, N> random_bytes() {
  ensure_sodium();
  std::array<std::uint8_t, N> out{};
  randombytes_buf(out.data(), N);
  return out;
}

}  // namespace medichain
