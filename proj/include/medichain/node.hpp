#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <stop_token>
#include <thread>
#include <vector>

#include "medichain/chain_store.hpp"
#include "medichain/chap.hpp"
#include "medichain/config.hpp"
#include "medichain/devnet.hpp"
#include "medichain/ledger.hpp"
#include "medichain/rejection.hpp"
#include "medichain/state.hpp"

namespace medichain {

inline std::int64_t system_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

/// Immutable view handed to readers; replaced wholesale on every commit.
struct Snapshot {
  Chain chain;
  WorldState state;

  const Block& tip() const { return chain.back(); }
  std::uint64_t height() const { return chain.back().header.height; }
};

enum class ReceiptStatus { Pending, Applied, Rejected };

struct Receipt {
  ReceiptStatus status = ReceiptStatus::Pending;
  std::optional<std::uint64_t> height;
  std::optional<Rejection> error;
};

struct MinedBlock {
  Block block;
  std::vector<std::pair<Hash32, Rejection>> dropped;
};

struct SessionToken {
  std::string token;  // 64 hex chars
  Address address;
  std::int64_t expires_at = 0;
};

/// Signed message binding a password hash to an address at enrolment.
inline Hash32 enrollment_digest(const Address& address, const Hash32& stored_hash) {
  return Sha256{}.update(as_bytes("medichain/enroll")).update(address.view()).update(stored_hash.view()).finish();
}

/// Fetches a peer's full chain; throws on any transport or parse failure.
using PeerFetcher = std::function<Chain(const std::string& peer)>;

/// A single node: mempool, block production, persistence, auth sessions
/// and fork choice. All mutations go through `writer_mu_`; readers take a
/// snapshot and never block on mining.
class Node {
 public:
  using Clock = std::function<std::int64_t()>;

  explicit Node(NodeConfig cfg, Clock clock = system_now)
      : cfg_(std::move(cfg)), clock_(std::move(clock)), store_(cfg_.data_dir), challenges_(cfg_.challenge_lifetime) {
    cfg_.validate();
    peers_ = cfg_.peers;
  }

  ~Node() { stop(); }

  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  const NodeConfig& config() const { return cfg_; }

  std::vector<Allocation> genesis_alloc() const {
    return cfg_.dev_mode ? devnet::allocations() : std::vector<Allocation>{};
  }

  /// Loads chain.jsonl, validates and replays it. An empty data dir gets
  /// the fixed genesis block. Throws CorruptChain on any damage.
  void startup_replay() {
    std::lock_guard lock(writer_mu_);
    std::filesystem::create_directories(cfg_.data_dir);
    Chain chain = store_.load(cfg_.recover_torn_tail);
    if (chain.empty()) {
      chain.push_back(devnet::genesis(cfg_.difficulty_bits));
      store_.append(chain.front());
    }
    if (auto failure = validate_chain(chain, cfg_.difficulty_bits)) {
      std::string why;
      for (auto v : failure->violations) why += std::string(violation_name(v)) + " ";
      throw CorruptChain(failure->height, why);
    }
    auto state = replay(chain, genesis_alloc());
    if (!state) throw CorruptChain(state.error().height.value_or(0), state.error().message());
    load_passwords();
    rebuild_receipts(chain);
    publish(std::move(chain), std::move(state).value());
  }

  /// Starts the background automine loop when configured.
  void start_background() {
    if (!cfg_.automine_interval || automine_.joinable()) return;
    automine_ = std::jthread([this](std::stop_token st) { automine_loop(st); });
  }

  void stop() {
    stop_source_.request_stop();
    if (automine_.joinable()) {
      automine_.request_stop();
      wake_.notify_all();
      automine_.join();
    }
  }

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard lock(snap_mu_);
    return snapshot_;
  }

  // ---- mempool ----------------------------------------------------------

  /// Shallow admission: signature, address binding, (sender, nonce) unique
  /// against both the pool and the chain.
  Result<Hash32> submit_tx(const SignedTransaction& t) {
    if (!verify_tx_signature(t)) return {RejectCode::BadSignature, {}};
    auto id = txid(t);
    std::lock_guard lock(writer_mu_);
    if (auto r = admit_locked(t, *snapshot_locked()); r) return *r;
    receipts_[id] = Receipt{};
    return id;
  }

  std::vector<SignedTransaction> mempool() const {
    std::lock_guard lock(writer_mu_);
    return pending_;
  }

  /// Next usable nonce for `a`, counting its pending transactions.
  std::uint64_t next_nonce(const Address& a) const {
    std::lock_guard lock(writer_mu_);
    auto snap = snapshot_locked();
    const Account* acct = snap->state.account(a);
    std::uint64_t n = acct ? acct->nonce : 0;
    while (pending_keys_.contains({a, n})) ++n;
    return n;
  }

  std::optional<Receipt> receipt(const Hash32& id) const {
    std::lock_guard lock(writer_mu_);
    auto it = receipts_.find(id);
    if (it == receipts_.end()) return std::nullopt;
    return it->second;
  }

  // ---- block production -------------------------------------------------

  /// Drains the pool into one block. State-invalid transactions are dropped
  /// and reported; the block is durable on disk before the live state moves.
  Result<MinedBlock> produce_block(std::int64_t now, bool allow_empty = false) {
    std::lock_guard lock(writer_mu_);
    if (pending_.empty() && !allow_empty) return {RejectCode::NothingToMine, "mempool is empty"};
    auto snap = snapshot_locked();
    const Block& tip = snap->tip();

    WorldState working = snap->state;
    BlockContext ctx{tip.header.height + 1, std::max<std::uint64_t>(static_cast<std::uint64_t>(now), tip.header.timestamp)};
    std::vector<SignedTransaction> included;
    MinedBlock result;
    for (auto& t : ordered_pending()) {
      if (auto r = apply_tx_in_place(working, t, ctx)) {
        log("dropped " + txid(t).hex() + ": " + r->message());
        result.dropped.emplace_back(txid(t), *r);
      } else {
        included.push_back(std::move(t));
      }
    }
    if (included.empty() && !allow_empty) {
      clear_pool_locked(result.dropped);
      return {RejectCode::NothingToMine, "no applicable transactions"};
    }

    auto mined = mine_block(tip.header, included, cfg_.difficulty_bits, ctx.timestamp, stop_source_.get_token());
    if (!mined) return {RejectCode::NothingToMine, "mining cancelled"};
    store_.append(*mined);

    Chain chain = snap->chain;
    chain.push_back(*mined);
    for (const auto& t : included) receipts_[txid(t)] = Receipt{ReceiptStatus::Applied, ctx.height, std::nullopt};
    clear_pool_locked(result.dropped);
    publish(std::move(chain), std::move(working));
    result.block = std::move(*mined);
    log("mined block " + std::to_string(ctx.height) + " with " + std::to_string(result.block.tx_count) + " txs");
    return result;
  }

  // ---- peers ------------------------------------------------------------

  std::vector<std::string> peers() const {
    std::lock_guard lock(peers_mu_);
    return peers_;
  }

  void add_peer(const std::string& url) {
    std::lock_guard lock(peers_mu_);
    if (std::find(peers_.begin(), peers_.end(), url) == peers_.end()) peers_.push_back(url);
  }

  /// Full validation of a foreign chain: structure, same genesis, replay.
  std::optional<WorldState> check_candidate(const Chain& candidate) const {
    if (validate_chain(candidate, cfg_.difficulty_bits)) return std::nullopt;
    if (candidate.front().header != snapshot()->chain.front().header) return std::nullopt;
    auto state = replay(candidate, genesis_alloc());
    if (!state) return std::nullopt;
    return std::move(state).value();
  }

  /// Pulls every peer's chain and adopts the longest valid one if it is
  /// strictly longer than ours. Peer failures are logged and skipped.
  bool sync_with_peers(const PeerFetcher& fetch) {
    std::optional<std::pair<Chain, WorldState>> best;
    std::size_t best_len = snapshot()->chain.size();
    for (const auto& peer : peers()) {
      Chain candidate;
      try {
        candidate = fetch(peer);
      } catch (const std::exception& e) {
        log("peer " + peer + " skipped: " + e.what());
        continue;
      }
      if (candidate.size() <= best_len) continue;
      auto state = check_candidate(candidate);
      if (!state) {
        log("peer " + peer + " offered an invalid chain");
        continue;
      }
      best_len = candidate.size();
      best.emplace(std::move(candidate), std::move(*state));
    }
    if (!best) return false;
    return adopt(std::move(best->first), std::move(best->second));
  }

  // ---- authentication ---------------------------------------------------

  Challenge issue_challenge() { return challenges_.issue(clock_()); }

  /// Stores sha256(password) for `address`, authorised by its signing key.
  Result<Unit> enroll_password(const Address& address, const PublicKey& key, const Hash32& stored_hash,
                               const Signature& sig) {
    if (derive_address(key) != address) return {RejectCode::BadSignature, "key does not match address"};
    if (!verify(key, enrollment_digest(address, stored_hash).view(), sig)) return {RejectCode::BadSignature, {}};
    std::lock_guard lock(auth_mu_);
    passwords_[address] = stored_hash;
    save_passwords_locked();
    return Unit{};
  }

  Result<SessionToken> login(const Address& address, std::uint64_t challenge_id, const Hash32& response) {
    std::optional<PasswordRecord> rec;
    {
      std::lock_guard lock(auth_mu_);
      auto it = passwords_.find(address);
      if (it != passwords_.end()) rec = PasswordRecord{address, it->second};
    }
    std::int64_t now = clock_();
    if (!rec) {
      // Burn the challenge anyway so probing unknown addresses costs the same.
      challenges_.verify(PasswordRecord{address, Hash32{}}, challenge_id, response, now);
      return {RejectCode::AuthFailed, {}};
    }
    switch (challenges_.verify(*rec, challenge_id, response, now)) {
      case ChapResult::Ok: break;
      case ChapResult::Expired: return {RejectCode::ChallengeExpired, {}};
      default: return {RejectCode::AuthFailed, {}};
    }
    SessionToken tok{to_hex(random_bytes<32>()), address, now + cfg_.session_lifetime};
    std::lock_guard lock(auth_mu_);
    sessions_[tok.token] = tok;
    return tok;
  }

  std::optional<Address> session_address(const std::string& token) const {
    std::lock_guard lock(auth_mu_);
    auto it = sessions_.find(token);
    if (it == sessions_.end() || it->second.expires_at < clock_()) return std::nullopt;
    return it->second.address;
  }

  std::int64_t now() const { return clock_(); }

 private:
  std::shared_ptr<const Snapshot> snapshot_locked() const {
    std::lock_guard lock(snap_mu_);
    return snapshot_;
  }

  void publish(Chain chain, WorldState state) {
    auto snap = std::make_shared<Snapshot>(Snapshot{std::move(chain), std::move(state)});
    std::lock_guard lock(snap_mu_);
    snapshot_ = std::move(snap);
  }

  std::optional<Rejection> admit_locked(const SignedTransaction& t, const Snapshot& snap) {
    const Account* acct = snap.state.account(t.sender);
    if (acct && t.nonce < acct->nonce) return Rejection{RejectCode::DuplicateNonce, "nonce already used on chain"};
    if (pending_keys_.contains({t.sender, t.nonce})) {
      return Rejection{RejectCode::DuplicateNonce, "nonce already pending"};
    }
    pending_keys_.insert({t.sender, t.nonce});
    pending_.push_back(t);
    return std::nullopt;
  }

  /// Admission order overall, nonce order within each sender: each sender's
  /// slots are refilled with that sender's transactions sorted by nonce.
  std::vector<SignedTransaction> ordered_pending() const {
    std::map<Address, std::vector<const SignedTransaction*>> by_sender;
    for (const auto& t : pending_) by_sender[t.sender].push_back(&t);
    for (auto& [_, list] : by_sender) {
      std::stable_sort(list.begin(), list.end(), [](auto* a, auto* b) { return a->nonce < b->nonce; });
    }
    std::map<Address, std::size_t> cursor;
    std::vector<SignedTransaction> out;
    out.reserve(pending_.size());
    for (const auto& t : pending_) out.push_back(*by_sender[t.sender][cursor[t.sender]++]);
    return out;
  }

  void clear_pool_locked(const std::vector<std::pair<Hash32, Rejection>>& dropped) {
    for (const auto& [id, why] : dropped) receipts_[id] = Receipt{ReceiptStatus::Rejected, std::nullopt, why};
    pending_.clear();
    pending_keys_.clear();
  }

  bool adopt(Chain chain, WorldState state) {
    std::lock_guard lock(writer_mu_);
    auto current = snapshot_locked();
    if (chain.size() <= current->chain.size()) return false;

    std::set<Hash32> adopted_ids;
    for (const auto& b : chain) {
      for (const auto& t : b.transactions) adopted_ids.insert(txid(t));
    }
    // Transactions we had (mined or pending) that the new chain lacks.
    std::vector<SignedTransaction> orphans;
    for (const auto& b : current->chain) {
      for (const auto& t : b.transactions) {
        if (!adopted_ids.contains(txid(t))) orphans.push_back(t);
      }
    }
    for (const auto& t : pending_) {
      if (!adopted_ids.contains(txid(t))) orphans.push_back(t);
    }

    store_.rewrite(chain);
    rebuild_receipts(chain);
    pending_.clear();
    pending_keys_.clear();
    Snapshot next{chain, state};
    for (const auto& t : orphans) {
      if (!admit_locked(t, next)) receipts_[txid(t)] = Receipt{};
    }
    log("adopted peer chain of height " + std::to_string(chain.back().header.height) + ", requeued " +
        std::to_string(pending_.size()) + " txs");
    publish(std::move(chain), std::move(state));
    return true;
  }

  void rebuild_receipts(const Chain& chain) {
    for (auto it = receipts_.begin(); it != receipts_.end();) {
      it = it->second.status == ReceiptStatus::Applied ? receipts_.erase(it) : std::next(it);
    }
    for (const auto& b : chain) {
      for (const auto& t : b.transactions) {
        receipts_[txid(t)] = Receipt{ReceiptStatus::Applied, b.header.height, std::nullopt};
      }
    }
  }

  void automine_loop(std::stop_token st) {
    std::mutex m;
    while (!st.stop_requested()) {
      {
        std::unique_lock lock(m);
        wake_.wait_for(lock, st, std::chrono::seconds(*cfg_.automine_interval), [] { return false; });
      }
      if (st.stop_requested()) break;
      bool has_work = !mempool().empty();
      if (has_work) produce_block(clock_());
    }
  }

  std::filesystem::path passwords_path() const { return cfg_.data_dir / "passwords.json"; }

  void load_passwords() {
    std::lock_guard lock(auth_mu_);
    passwords_.clear();
    std::ifstream in(passwords_path());
    if (!in) return;
    auto j = nlohmann::json::parse(in);
    for (const auto& [addr, hash] : j.items()) {
      passwords_[Address::from_hex(addr)] = Hash32::from_hex(hash.get<std::string>());
    }
  }

  void save_passwords_locked() {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [addr, hash] : passwords_) j[addr.hex()] = hash.hex();
    auto tmp = passwords_path();
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << j.dump() << '\n';
    }
    std::filesystem::permissions(tmp, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write,
                                 std::filesystem::perm_options::replace);
    std::filesystem::rename(tmp, passwords_path());
  }

  void log(const std::string& msg) const {
    if (verbose_) std::clog << "[node:" << cfg_.listen_port << "] " << msg << '\n';
  }

 public:
  void set_verbose(bool v) { verbose_ = v; }

 private:
  NodeConfig cfg_;
  Clock clock_;
  ChainStore store_;
  ChallengeRegistry challenges_;
  bool verbose_ = false;

  mutable std::mutex writer_mu_;
  std::vector<SignedTransaction> pending_;
  std::set<std::pair<Address, std::uint64_t>> pending_keys_;
  std::map<Hash32, Receipt> receipts_;

  mutable std::mutex snap_mu_;
  std::shared_ptr<const Snapshot> snapshot_;

  mutable std::mutex auth_mu_;
  std::map<Address, Hash32> passwords_;
  std::map<std::string, SessionToken> sessions_;

  mutable std::mutex peers_mu_;
  std::vector<std::string> peers_;

  std::stop_source stop_source_;
  std::condition_variable_any wake_;
  std::jthread automine_;
};

}  // namespace medichain
