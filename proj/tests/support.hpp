#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "medichain/medichain.hpp"

namespace medichain::testing {

/// Frozen values produced by tests/oracles/derive_fixtures.py.
inline const nlohmann::json& oracle() {
  static const nlohmann::json j = [] {
    std::ifstream in(MEDICHAIN_FIXTURES "/oracle.json");
    if (!in) throw std::runtime_error("missing oracle.json");
    return nlohmann::json::parse(in);
  }();
  return j;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("medichain-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline PatientProfile patient_profile(std::string name = "Alice") {
  return {std::move(name), "555-0100", "alice@example.org", "1990-04-12", "1 Main St", "ACME-123"};
}

inline ProviderProfile provider_profile(std::string name = "Bob") {
  return {std::move(name), "555-0200", "bob@example.org", "1975-09-30", "2 Clinic Rd", "REG-42", "City Clinic"};
}

inline Payload register_payload(Role role) {
  if (role == Role::Patient) return tx::Register{role, patient_profile()};
  return tx::Register{role, provider_profile()};
}

/// Applies `t` and fails the calling test if it is rejected.
inline void must_apply(WorldState& s, const SignedTransaction& t, BlockContext ctx = {}) {
  if (auto r = apply_tx_in_place(s, t, ctx)) throw std::runtime_error("unexpected rejection: " + r->message());
}

/// Dev state plus per-identity nonce bookkeeping for scripted scenarios.
struct Scenario {
  WorldState state = devnet_state();
  std::array<std::uint64_t, devnet::kAccounts> nonces{};
  std::array<KeyPair, devnet::kAccounts> keys = [] {
    std::array<KeyPair, devnet::kAccounts> k;
    for (int i = 0; i < devnet::kAccounts; ++i) k[i] = devnet::identity(i);
    return k;
  }();

  static WorldState devnet_state() { return genesis_state(devnet::allocations()).value(); }

  Address addr(int i) const { return derive_address(keys[i].public_key); }

  SignedTransaction tx(int i, Payload p) { return make_tx(keys[i], nonces[i], 1'704'067'300, std::move(p)); }

  /// Signs with the next nonce and applies; the nonce advances only on success.
  std::optional<Rejection> run(int i, Payload p) {
    auto r = apply_tx_in_place(state, tx(i, std::move(p)), {1, 1'704'067'300});
    if (!r) ++nonces[i];
    return r;
  }
};

}  // namespace medichain::testing
