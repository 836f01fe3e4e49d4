#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <vector>

#include "medichain/bytes.hpp"
#include "medichain/json_util.hpp"
#include "medichain/sha256.hpp"
#include "medichain/transaction.hpp"

namespace medichain {

inline constexpr int kMaxDifficultyBits = 32;
inline constexpr std::size_t kHeaderSize = 8 + 32 + 32 + 8 + 1 + 8;

struct BlockHeader {
  std::uint64_t height = 0;
  Hash32 prev_hash;
  Hash32 merkle_root;
  std::uint64_t timestamp = 0;
  std::uint8_t difficulty_bits = 0;
  std::uint64_t nonce = 0;

  bool operator==(const BlockHeader&) const = default;
};

struct Block {
  BlockHeader header;
  std::uint64_t tx_count = 0;
  std::vector<SignedTransaction> transactions;

  bool operator==(const Block&) const = default;
};

using Chain = std::vector<Block>;

/// Fixed 89-byte layout; the PoW nonce occupies the final 8 bytes.
inline Bytes encode_header(const BlockHeader& h) {
  ByteWriter w;
  w.u64(h.height);
  w.raw(h.prev_hash.view());
  w.raw(h.merkle_root.view());
  w.u64(h.timestamp);
  w.u8(h.difficulty_bits);
  w.u64(h.nonce);
  return std::move(w).bytes();
}

inline BlockHeader decode_header(ByteView data) {
  if (data.size() != kHeaderSize) throw ParseError("block header must be 89 bytes");
  ByteReader r(data);
  BlockHeader h;
  h.height = r.u64();
  h.prev_hash = Hash32::from_span(r.raw(32));
  h.merkle_root = Hash32::from_span(r.raw(32));
  h.timestamp = r.u64();
  h.difficulty_bits = r.u8();
  h.nonce = r.u64();
  return h;
}

inline Hash32 header_hash(const BlockHeader& h) { return sha256(encode_header(h)); }

/// Bitcoin-style tree: odd levels duplicate their last node. Empty input
/// gives the zero hash; a single leaf is its own root.
inline Hash32 merkle_root(std::vector<Hash32> level) {
  if (level.empty()) return Hash32{};
  while (level.size() > 1) {
    if (level.size() % 2 != 0) level.push_back(level.back());
    std::vector<Hash32> next;
    next.reserve(level.size() / 2);
    for (std::size_t i = 0; i < level.size(); i += 2) {
      next.push_back(Sha256{}.update(level[i].view()).update(level[i + 1].view()).finish());
    }
    level = std::move(next);
  }
  return level.front();
}

inline Hash32 merkle_root(const std::vector<SignedTransaction>& txs) {
  std::vector<Hash32> leaves;
  leaves.reserve(txs.size());
  for (const auto& t : txs) leaves.push_back(txid(t));
  return merkle_root(std::move(leaves));
}

struct SearchExhausted : std::runtime_error {
  SearchExhausted() : std::runtime_error("PoW nonce space exhausted") {}
};

/// Scans nonces 0,1,2,... for the first header hash with at least
/// `difficulty_bits` leading zero bits. Returns nullopt if `stop` fires.
inline std::optional<BlockHeader> mine_header(BlockHeader h, std::stop_token stop = {}) {
  if (h.difficulty_bits > kMaxDifficultyBits) throw std::invalid_argument("difficulty_bits exceeds 32");
  auto bytes = encode_header(h);
  // The first 64 bytes form one full SHA-256 block and never change.
  Sha256 prefix;
  prefix.update(ByteView(bytes).first(64));
  auto tail = ByteView(bytes).subspan(64);
  auto* nonce_bytes = bytes.data() + kHeaderSize - 8;
  for (std::uint64_t nonce = 0;; ++nonce) {
    if (stop.stop_requested()) return std::nullopt;
    for (int i = 0; i < 8; ++i) nonce_bytes[i] = static_cast<std::uint8_t>(nonce >> (56 - 8 * i));
    Sha256 s = prefix;
    if (leading_zero_bits(s.update(tail).finish()) >= h.difficulty_bits) {
      h.nonce = nonce;
      return h;
    }
    if (nonce == UINT64_MAX) throw SearchExhausted();
  }
}

inline std::optional<Block> mine_block(const BlockHeader& prev, std::vector<SignedTransaction> txs, int difficulty_bits,
                                       std::uint64_t timestamp, std::stop_token stop = {}) {
  if (difficulty_bits < 0 || difficulty_bits > kMaxDifficultyBits) {
    throw std::invalid_argument("difficulty_bits must be in [0, 32]");
  }
  if (timestamp < prev.timestamp) throw std::invalid_argument("timestamp precedes predecessor");
  BlockHeader h;
  h.height = prev.height + 1;
  h.prev_hash = header_hash(prev);
  h.merkle_root = merkle_root(txs);
  h.timestamp = timestamp;
  h.difficulty_bits = static_cast<std::uint8_t>(difficulty_bits);
  auto mined = mine_header(h, stop);
  if (!mined) return std::nullopt;
  return Block{*mined, txs.size(), std::move(txs)};
}

/// Height-0 block with no transactions, mined at the chain difficulty.
inline Block make_genesis(std::uint64_t timestamp, int difficulty_bits) {
  BlockHeader h;
  h.timestamp = timestamp;
  h.difficulty_bits = static_cast<std::uint8_t>(difficulty_bits);
  return Block{*mine_header(h), 0, {}};
}

enum class Violation {
  HeightMismatch,
  LinkBroken,
  MerkleMismatch,
  TxCountMismatch,
  TimestampRegression,
  InsufficientWork,
  DifficultyMismatch,
  MissingGenesis,
};

inline std::string_view violation_name(Violation v) {
  switch (v) {
    case Violation::HeightMismatch: return "HeightMismatch";
    case Violation::LinkBroken: return "LinkBroken";
    case Violation::MerkleMismatch: return "MerkleMismatch";
    case Violation::TxCountMismatch: return "TxCountMismatch";
    case Violation::TimestampRegression: return "TimestampRegression";
    case Violation::InsufficientWork: return "InsufficientWork";
    case Violation::DifficultyMismatch: return "DifficultyMismatch";
    case Violation::MissingGenesis: return "MissingGenesis";
  }
  return "?";
}

namespace detail {
inline void check_body(const Block& b, int difficulty_bits, std::vector<Violation>& out) {
  if (b.tx_count != b.transactions.size()) out.push_back(Violation::TxCountMismatch);
  if (b.header.merkle_root != merkle_root(b.transactions)) out.push_back(Violation::MerkleMismatch);
  if (b.header.difficulty_bits != difficulty_bits) out.push_back(Violation::DifficultyMismatch);
  if (leading_zero_bits(header_hash(b.header)) < difficulty_bits) out.push_back(Violation::InsufficientWork);
}
}  // namespace detail

/// All violations of `b` as successor of `prev`; empty means valid.
inline std::vector<Violation> validate_block(const Block& b, const BlockHeader& prev, int difficulty_bits) {
  std::vector<Violation> out;
  if (b.header.height != prev.height + 1) out.push_back(Violation::HeightMismatch);
  if (b.header.prev_hash != header_hash(prev)) out.push_back(Violation::LinkBroken);
  if (b.header.timestamp < prev.timestamp) out.push_back(Violation::TimestampRegression);
  detail::check_body(b, difficulty_bits, out);
  return out;
}

inline std::vector<Violation> validate_genesis(const Block& g, int difficulty_bits) {
  std::vector<Violation> out;
  if (g.header.height != 0) out.push_back(Violation::HeightMismatch);
  if (!g.header.prev_hash.is_zero()) out.push_back(Violation::LinkBroken);
  detail::check_body(g, difficulty_bits, out);
  return out;
}

struct ChainFailure {
  std::uint64_t height = 0;
  std::vector<Violation> violations;
};

/// nullopt when the whole chain is valid, else the first failing height.
inline std::optional<ChainFailure> validate_chain(const Chain& c, int difficulty_bits) {
  if (c.empty()) return ChainFailure{0, {Violation::MissingGenesis}};
  if (auto v = validate_genesis(c.front(), difficulty_bits); !v.empty()) return ChainFailure{0, std::move(v)};
  for (std::size_t i = 1; i < c.size(); ++i) {
    if (auto v = validate_block(c[i], c[i - 1].header, difficulty_bits); !v.empty()) {
      return ChainFailure{i, std::move(v)};
    }
  }
  return std::nullopt;
}

// ---- JSON ---------------------------------------------------------------

inline nlohmann::json header_to_json(const BlockHeader& h) {
  return {{"height", h.height},
          {"prev_hash", h.prev_hash.hex()},
          {"merkle_root", h.merkle_root.hex()},
          {"timestamp", h.timestamp},
          {"difficulty_bits", h.difficulty_bits},
          {"nonce", h.nonce}};
}

inline BlockHeader header_from_json(const nlohmann::json& j) {
  using namespace medichain::strict;
  expect_object(j, {"height", "prev_hash", "merkle_root", "timestamp", "difficulty_bits", "nonce"});
  BlockHeader h;
  h.height = u64(j, "height");
  h.prev_hash = hex<Hash32>(j, "prev_hash");
  h.merkle_root = hex<Hash32>(j, "merkle_root");
  h.timestamp = u64(j, "timestamp");
  auto bits = u64(j, "difficulty_bits");
  if (bits > 255) throw ParseError("difficulty_bits out of range");
  h.difficulty_bits = static_cast<std::uint8_t>(bits);
  h.nonce = u64(j, "nonce");
  return h;
}

inline nlohmann::json block_to_json(const Block& b) {
  auto txs = nlohmann::json::array();
  for (const auto& t : b.transactions) txs.push_back(tx_to_json(t));
  return {{"header", header_to_json(b.header)}, {"tx_count", b.tx_count}, {"transactions", std::move(txs)}};
}

inline Block block_from_json(const nlohmann::json& j) {
  using namespace medichain::strict;
  expect_object(j, {"header", "tx_count", "transactions"});
  Block b;
  b.header = header_from_json(field(j, "header"));
  b.tx_count = u64(j, "tx_count");
  const auto& txs = field(j, "transactions");
  if (!txs.is_array()) throw ParseError("transactions must be an array");
  for (const auto& t : txs) b.transactions.push_back(tx_from_json(t));
  return b;
}

/// One canonical JSON line (no trailing newline).
inline std::string block_to_line(const Block& b) { return strict::canonical(block_to_json(b)); }

inline Block block_from_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  return block_from_json(j);
}

}  // namespace medichain
