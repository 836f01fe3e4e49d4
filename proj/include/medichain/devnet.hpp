#pragma once

#include <vector>

#include "medichain/amount.hpp"
#include "medichain/crypto.hpp"
#include "medichain/ledger.hpp"
#include "medichain/state.hpp"

namespace medichain::devnet {

// Local development network: ten identities from seeds 0x00..00 through
// 0x00..09, each funded with 100 ether at genesis.

inline constexpr int kAccounts = 10;
inline constexpr std::uint64_t kEtherPerAccount = 100;
inline constexpr std::uint64_t kGenesisTimestamp = 1'704'067'200;  // 2024-01-01T00:00:00Z
inline constexpr int kDefaultDifficulty = 16;

inline KeyPair identity(int index) { return keygen(dev_seed(static_cast<std::uint8_t>(index))); }

inline std::vector<Allocation> allocations() {
  std::vector<Allocation> out;
  for (int i = 0; i < kAccounts; ++i) out.push_back({derive_address(identity(i).public_key), ether(kEtherPerAccount)});
  return out;
}

inline Block genesis(int difficulty_bits) { return make_genesis(kGenesisTimestamp, difficulty_bits); }

}  // namespace medichain::devnet
