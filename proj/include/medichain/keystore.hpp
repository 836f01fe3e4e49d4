#pragma once

#include <sodium.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>

#include "medichain/crypto.hpp"
#include "medichain/json_util.hpp"

namespace medichain {

struct WrongPassword : std::runtime_error {
  WrongPassword() : std::runtime_error("keystore password is incorrect") {}
};

inline constexpr std::uint32_t kKeystoreIterations = 10'000;

/// On-disk form of an encrypted identity, keys/<address>.json.
struct KeystoreEntry {
  Address address;
  std::array<std::uint8_t, 16> salt{};
  std::uint32_t iterations = kKeystoreIterations;
  std::array<std::uint8_t, 32> ciphertext{};
  std::array<std::uint8_t, crypto_secretbox_MACBYTES> mac{};
};

/// key_1 = sha256(salt || password); key_i = sha256(key_{i-1} || salt || password).
inline Hash32 derive_keystore_key(ByteView salt, std::string_view password, std::uint32_t iterations) {
  if (iterations == 0) throw std::invalid_argument("keystore iterations must be positive");
  Hash32 key = Sha256{}.update(salt).update(as_bytes(password)).finish();
  for (std::uint32_t i = 1; i < iterations; ++i) {
    key = Sha256{}.update(key.view()).update(salt).update(as_bytes(password)).finish();
  }
  return key;
}

// Each salt yields a fresh key that encrypts exactly one message, so the
// XSalsa20-Poly1305 nonce is fixed at zero.
inline KeystoreEntry seal_keystore(const KeyPair& kp, std::string_view password,
                                   std::uint32_t iterations = kKeystoreIterations) {
  ensure_sodium();
  KeystoreEntry e;
  e.address = derive_address(kp.public_key);
  e.salt = random_bytes<16>();
  e.iterations = iterations;
  auto key = derive_keystore_key(e.salt, password, iterations);
  std::array<std::uint8_t, crypto_secretbox_NONCEBYTES> nonce{};
  crypto_secretbox_detached(e.ciphertext.data(), e.mac.data(), kp.secret_key.bytes.data(), kp.secret_key.size,
                            nonce.data(), key.bytes.data());
  sodium_memzero(key.bytes.data(), key.size);
  return e;
}

inline KeyPair open_keystore(const KeystoreEntry& e, std::string_view password) {
  ensure_sodium();
  auto key = derive_keystore_key(e.salt, password, e.iterations);
  std::array<std::uint8_t, crypto_secretbox_NONCEBYTES> nonce{};
  SecretKey seed;
  int rc = crypto_secretbox_open_detached(seed.bytes.data(), e.ciphertext.data(), e.mac.data(), e.ciphertext.size(),
                                          nonce.data(), key.bytes.data());
  sodium_memzero(key.bytes.data(), key.size);
  if (rc != 0) throw WrongPassword();
  auto kp = keygen(seed);
  if (derive_address(kp.public_key) != e.address) throw ParseError("keystore address does not match its key");
  return kp;
}

inline nlohmann::json keystore_to_json(const KeystoreEntry& e) {
  return {{"address", e.address.hex()},
          {"salt", to_hex(e.salt)},
          {"iterations", e.iterations},
          {"ciphertext", to_hex(e.ciphertext)},
          {"mac", to_hex(e.mac)}};
}

inline KeystoreEntry keystore_from_json(const nlohmann::json& j) {
  strict::expect_object(j, {"address", "salt", "iterations", "ciphertext", "mac"});
  auto fixed = [&](const char* field, auto& dst) {
    auto raw = from_hex(strict::str(j, field));
    if (raw.size() != dst.size()) throw ParseError(std::string("keystore field has wrong length: ") + field);
    std::copy(raw.begin(), raw.end(), dst.begin());
  };
  try {
    KeystoreEntry e;
    e.address = Address::from_hex(strict::str(j, "address"));
    auto iterations = strict::u64(j, "iterations");
    if (iterations == 0 || iterations > 0xffffffffu) throw ParseError("keystore iterations out of range");
    e.iterations = static_cast<std::uint32_t>(iterations);
    fixed("salt", e.salt);
    fixed("ciphertext", e.ciphertext);
    fixed("mac", e.mac);
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("malformed keystore: ") + ex.what());
  }
}

/// Directory of keystore files, one per identity.
class Keystore {
 public:
  explicit Keystore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::filesystem::path path_for(const Address& a) const { return dir_ / (a.hex() + ".json"); }

  std::filesystem::path save(const KeystoreEntry& e) const {
    std::filesystem::create_directories(dir_);
    auto path = path_for(e.address);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    std::filesystem::permissions(path, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write,
                                 std::filesystem::perm_options::replace);
    out << keystore_to_json(e).dump(2) << '\n';
    if (!out.flush()) throw std::runtime_error("cannot write " + path.string());
    return path;
  }

  KeystoreEntry load(const Address& a) const {
    std::ifstream in(path_for(a));
    if (!in) throw std::runtime_error("no keystore for " + a.hex() + " in " + dir_.string());
    return keystore_from_json(nlohmann::json::parse(in));
  }

  std::vector<Address> list() const {
    std::vector<Address> out;
    if (!std::filesystem::exists(dir_)) return out;
    for (const auto& ent : std::filesystem::directory_iterator(dir_)) {
      if (ent.path().extension() != ".json") continue;
      try {
        out.push_back(Address::from_hex(ent.path().stem().string()));
      } catch (const ParseError&) {
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

}  // namespace medichain
