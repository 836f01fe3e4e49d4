#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>

#include "medichain/bytes.hpp"
#include "medichain/crypto.hpp"
#include "medichain/sha256.hpp"

namespace medichain {

// Challenge-handshake login. The server keeps only sha256(password); the
// client proves knowledge of it by hashing it under a fresh server nonce.
// No salt, so a stolen PasswordRecord allows offline guessing; this is the
// scheme as described, not a modern password protocol.

using ChallengeNonce = std::array<std::uint8_t, 32>;

struct Challenge {
  std::uint64_t id = 0;
  ChallengeNonce nonce{};
  std::int64_t issued_at = 0;
  bool consumed = false;
};

struct PasswordRecord {
  Address address;
  Hash32 stored_hash;  // sha256(password)
};

inline constexpr std::int64_t kDefaultChallengeLifetime = 120;

inline Hash32 password_hash(std::string_view password) { return sha256(password); }

inline PasswordRecord make_password_record(const Address& address, std::string_view password) {
  return {address, password_hash(password)};
}

/// Response the client sends: sha256(nonce || sha256(password)).
inline Hash32 chap_respond(std::string_view password, const ChallengeNonce& nonce) {
  auto stored = password_hash(password);
  return Sha256{}.update(nonce).update(stored.view()).finish();
}

inline bool chap_expired(const Challenge& c, std::int64_t now, std::int64_t lifetime) {
  return now < c.issued_at || now - c.issued_at > lifetime;
}

/// Checks a response against the record; marks the challenge consumed on success.
inline bool chap_verify(const PasswordRecord& rec, Challenge& challenge, const Hash32& response, std::int64_t now,
                        std::int64_t lifetime = kDefaultChallengeLifetime) {
  if (challenge.consumed || chap_expired(challenge, now, lifetime)) return false;
  auto expected = Sha256{}.update(challenge.nonce).update(rec.stored_hash.view()).finish();
  if (sodium_memcmp(expected.bytes.data(), response.bytes.data(), expected.size) != 0) return false;
  challenge.consumed = true;
  return true;
}

enum class ChapResult { Ok, UnknownChallenge, Expired, Failed };

/// Shared issue/consume store; verification of one challenge is atomic, so
/// concurrent logins against it admit at most one success.
class ChallengeRegistry {
 public:
  explicit ChallengeRegistry(std::int64_t lifetime = kDefaultChallengeLifetime) : lifetime_(lifetime) {}

  Challenge issue(std::int64_t now) {
    Challenge c;
    c.nonce = random_bytes<32>();
    c.issued_at = now;
    std::lock_guard lock(mu_);
    c.id = ++next_id_;
    challenges_.emplace(c.id, c);
    prune(now);
    return c;
  }

  ChapResult verify(const PasswordRecord& rec, std::uint64_t challenge_id, const Hash32& response, std::int64_t now) {
    std::lock_guard lock(mu_);
    auto it = challenges_.find(challenge_id);
    if (it == challenges_.end()) return ChapResult::UnknownChallenge;
    if (it->second.consumed) return ChapResult::Failed;
    if (chap_expired(it->second, now, lifetime_)) return ChapResult::Expired;
    return chap_verify(rec, it->second, response, now, lifetime_) ? ChapResult::Ok : ChapResult::Failed;
  }

  std::optional<Challenge> find(std::uint64_t id) const {
    std::lock_guard lock(mu_);
    auto it = challenges_.find(id);
    if (it == challenges_.end()) return std::nullopt;
    return it->second;
  }

  std::int64_t lifetime() const { return lifetime_; }

 private:
  // Consumed and long-dead challenges are dropped; expired ones are kept
  // for one extra lifetime so late logins still report expiry.
  void prune(std::int64_t now) {
    for (auto it = challenges_.begin(); it != challenges_.end();) {
      bool stale = it->second.consumed ? chap_expired(it->second, now, lifetime_)
                                       : chap_expired(it->second, now, 2 * lifetime_);
      it = stale ? challenges_.erase(it) : std::next(it);
    }
  }

  std::int64_t lifetime_;
  mutable std::mutex mu_;
  std::uint64_t next_id_ = 0;
  std::map<std::uint64_t, Challenge> challenges_;
};

}  // namespace medichain
