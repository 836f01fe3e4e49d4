// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "node_server.hpp"
#include "qr_decoder.hpp"
#include "support.hpp"

extern char** environ;

using namespace medichain;
using medichain::testing::NodeServer;
using medichain::testing::register_payload;
using medichain::testing::Scenario;
using medichain::testing::TempDir;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

Hash32 random_hash(std::mt19937_64& rng) {
  Hash32 h;
  for (auto& b : h.bytes) b = static_cast<std::uint8_t>(rng());
  return h;
}

Address dev_addr(int i) { return derive_address(devnet::identity(i).public_key); }

// ---- processes --------------------------------------------------------------

struct ProcessResult {
  int exit_code = -1;
  std::string out;
};

std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

std::string cli_command(const std::vector<std::string>& args) {
  std::string cmd = shell_quote(MEDICHAIN_CLI);
  for (const auto& a : args) cmd += " " + shell_quote(a);
  return cmd + " 2>&1";
}

ProcessResult finish(std::FILE* pipe) {
  ProcessResult r;
  char buf[4096];
  while (auto n = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

ProcessResult run_cli(const std::vector<std::string>& args) {
  std::FILE* pipe = ::popen(cli_command(args).c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  return finish(pipe);
}

int free_port() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  socklen_t len = sizeof sa;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0 ||
      ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len) != 0) {
    ::close(fd);
    throw std::runtime_error("cannot reserve a port");
  }
  ::close(fd);
  return ntohs(sa.sin_port);
}

/// `medichain serve` as a child process, terminated on destruction.
class ServeProcess {
 public:
  ServeProcess(const std::vector<std::string>& args, const std::filesystem::path& log) {
    std::vector<std::string> argv_s{MEDICHAIN_CLI};
    argv_s.insert(argv_s.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_s) argv.push_back(a.data());
    argv.push_back(nullptr);
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_addopen(&fa, STDOUT_FILENO, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    posix_spawn_file_actions_adddup2(&fa, STDOUT_FILENO, STDERR_FILENO);
    int rc = posix_spawn(&pid_, argv[0], &fa, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&fa);
    if (rc != 0) throw std::runtime_error("cannot spawn node");
  }
  ~ServeProcess() {
    ::kill(pid_, SIGTERM);
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
  ServeProcess(const ServeProcess&) = delete;
  ServeProcess& operator=(const ServeProcess&) = delete;

 private:
  pid_t pid_ = 0;
};

bool wait_healthy(const std::string& url, std::chrono::seconds limit) {
  auto deadline = Clock::now() + limit;
  api::Client c(url);
  while (Clock::now() < deadline) {
    try {
      if (c.get("/health").status == 200) return true;
    } catch (const std::runtime_error&) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  return false;
}

/// genesis(difficulty) plus nine mined blocks of dev transfers and clinic traffic.
Chain ten_block_chain(int difficulty, std::mt19937_64& rng) {
  Chain chain{devnet::genesis(difficulty)};
  Scenario s;
  std::vector<SignedTransaction> first;
  first.push_back(s.tx(0, register_payload(Role::Patient)));
  first.push_back(s.tx(1, register_payload(Role::Doctor)));
  first.push_back(s.tx(2, register_payload(Role::Pharmacist)));
  for (int i : {0, 1, 2}) ++s.nonces[i];
  chain.push_back(*mine_block(chain.back().header, first, difficulty, chain.back().header.timestamp + 10));
  std::vector<SignedTransaction> second;
  second.push_back(s.tx(0, tx::GrantAccess{s.addr(1)}));
  ++s.nonces[0];
  chain.push_back(*mine_block(chain.back().header, second, difficulty, chain.back().header.timestamp + 10));
  while (chain.size() < 10) {
    std::vector<SignedTransaction> txs;
    txs.push_back(s.tx(1, tx::AnchorRecord{s.addr(0), random_hash(rng), "lab"}));
    ++s.nonces[1];
    for (int k = 0; k < 3; ++k) {
      int from = 3 + static_cast<int>(rng() % 7);
      txs.push_back(s.tx(from, tx::Transfer{s.addr(static_cast<int>(rng() % 10)), ether(1)}));
      ++s.nonces[from];
    }
    chain.push_back(*mine_block(chain.back().header, txs, difficulty, chain.back().header.timestamp + 10));
  }
  return chain;
}

// ---- criteria ---------------------------------------------------------------

Outcome genesis_fidelity() {
  TempDir dir;
  NodeConfig cfg;
  cfg.data_dir = dir.path();
  cfg.dev_mode = true;
  cfg.difficulty_bits = 8;
  Node node(cfg);
  node.startup_replay();
  auto snap = node.snapshot();
  const auto& accounts = snap->state.accounts;
  bool all_hundred = accounts.size() == 10;
  for (const auto& [_, a] : accounts) all_hundred = all_hundred && a.balance == ether(100);
  auto total = to_decimal(snap->state.balance_sum());
  bool pass = all_hundred && total == "1000000000000000000000" && snap->state.total_supply == snap->state.balance_sum();
  return {pass, std::to_string(accounts.size()) + " accounts, total " + total + " wei"};
}

Outcome conservation() {
  auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  Scenario s;
  for (int i : {0, 1}) s.run(i, register_payload(Role::Patient));
  s.run(2, register_payload(Role::Doctor));
  s.run(3, register_payload(Role::Pharmacist));
  for (int i : {0, 1}) s.run(i, tx::GrantAccess{s.addr(2)});
  int applied = 0, transfers = 0, payments = 0;
  bool conserved = true;
  while (applied < 1000) {
    switch (rng() % 3) {
      case 0: {
        int from = static_cast<int>(rng() % 10);
        if (!s.run(from, tx::Transfer{s.addr(static_cast<int>(rng() % 10)), static_cast<Wei>(rng() % ether(5))})) {
          ++applied;
          ++transfers;
        }
        break;
      }
      case 1:
        s.run(2, tx::Prescribe{s.addr(static_cast<int>(rng() % 2)), s.addr(3), Hash32{}, rng() % ether(3)});
        break;
      default: {
        std::vector<const Invoice*> unpaid;
        for (const auto& inv : s.state.invoices) {
          if (inv.status == InvoiceStatus::Unpaid) unpaid.push_back(&inv);
        }
        if (unpaid.empty()) break;
        const auto& inv = *unpaid[rng() % unpaid.size()];
        if (!s.run(inv.patient == s.addr(0) ? 0 : 1, tx::PayInvoice{inv.id})) {
          ++applied;
          ++payments;
        }
        break;
      }
    }
    conserved = conserved && s.state.balance_sum() == ether(1000);
  }
  double secs = seconds_since(t0);
  bool pass = conserved && to_decimal(s.state.balance_sum()) == "1000000000000000000000" && secs < 5.0;
  return {pass, std::to_string(transfers) + " transfers + " + std::to_string(payments) + " payments, sum " +
                    to_decimal(s.state.balance_sum()) + " wei, " + fmt(secs) + " s"};
}

Outcome tamper_detection() {
  constexpr int kDifficulty = 8;
  std::mt19937_64 rng(102);
  TempDir dir;
  ChainStore store(dir.path());
  auto chain = ten_block_chain(kDifficulty, rng);
  for (const auto& b : chain) store.append(b);
  if (validate_chain(store.load(), kDifficulty) || !replay(store.load(), devnet::allocations()).ok()) {
    return {false, "pristine chain does not validate"};
  }
  std::string pristine;
  {
    std::ifstream in(store.path(), std::ios::binary);
    pristine.assign(std::istreambuf_iterator<char>(in), {});
  }
  int detected = 0, by_load = 0, by_validate = 0, by_replay = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto mutated = pristine;
    auto pos = rng() % mutated.size();
    char old = mutated[pos];
    do {
      mutated[pos] = static_cast<char>(rng() % 256);
    } while (mutated[pos] == old);
    TempDir copy;
    std::ofstream(copy / "chain.jsonl", std::ios::binary) << mutated;
    Chain c;
    try {
      c = ChainStore(copy.path()).load();
    } catch (const CorruptChain&) {
      ++by_load;
      ++detected;
      continue;
    }
    if (validate_chain(c, kDifficulty)) {
      ++by_validate;
      ++detected;
    } else if (!replay(c, devnet::allocations()).ok()) {
      ++by_replay;
      ++detected;
    }
  }
  return {detected == 100, std::to_string(detected) + "/100 (load " + std::to_string(by_load) + ", validate " +
                               std::to_string(by_validate) + ", replay " + std::to_string(by_replay) + ")"};
}

Outcome proof_of_work() {
  auto t0 = Clock::now();
  BlockHeader prev = devnet::genesis(16).header;
  bool all_hard = leading_zero_bits(header_hash(prev)) >= 16;
  double attempts = 0;
  for (int i = 0; i < 20; ++i) {
    auto b = mine_block(prev, {}, 16, prev.timestamp + 1);
    all_hard = all_hard && leading_zero_bits(header_hash(b->header)) >= 16;
    attempts += static_cast<double>(b->header.nonce + 1);
    prev = b->header;
  }
  double mean = attempts / 20;
  double secs = seconds_since(t0);
  bool pass = all_hard && mean >= 16384 && mean <= 262144 && secs < 10.0;
  return {pass, "mean attempts " + fmt(mean, 0) + ", " + fmt(secs) + " s"};
}

Outcome double_spend() {
  Scenario s;
  auto t = s.tx(0, tx::Transfer{s.addr(1), ether(1)});
  auto first = apply_tx_in_place(s.state, t, {});
  auto replayed = apply_tx_in_place(s.state, t, {});
  bool nonce_ok = !first && replayed && replayed->code == RejectCode::BadNonce;
  s.nonces[0] = 1;

  s.run(0, register_payload(Role::Patient));
  s.run(1, register_payload(Role::Doctor));
  s.run(2, register_payload(Role::Pharmacist));
  s.run(0, tx::GrantAccess{s.addr(1)});
  s.run(1, tx::Prescribe{s.addr(0), s.addr(2), Hash32{}, ether(2)});
  auto pay1 = s.run(0, tx::PayInvoice{1});
  auto pay2 = s.run(0, tx::PayInvoice{1});
  bool paid_ok = !pay1 && pay2 && pay2->code == RejectCode::AlreadyPaid;

  // Through a node: admission refuses the resubmission outright, and a block
  // that smuggles the replay in fails to replay with BadNonce.
  TempDir dir;
  NodeConfig cfg;
  cfg.data_dir = dir.path();
  cfg.dev_mode = true;
  cfg.difficulty_bits = 4;
  Node node(cfg);
  node.startup_replay();
  auto nt = make_tx(devnet::identity(0), 0, system_now(), tx::Transfer{dev_addr(1), ether(1)});
  bool node_ok = node.submit_tx(nt).ok() && node.produce_block(system_now()).ok();
  auto again = node.submit_tx(nt);
  node_ok = node_ok && !again.ok() && again.code() == RejectCode::DuplicateNonce;
  auto chain = node.snapshot()->chain;
  chain.push_back(*mine_block(chain.back().header, {nt}, 4, chain.back().header.timestamp + 1));
  auto replayed_chain = replay(chain, devnet::allocations());
  bool block_ok = !replayed_chain.ok() && replayed_chain.code() == RejectCode::InvalidTransactionAt &&
                  replayed_chain.error().message().find("BadNonce") != std::string::npos;
  node_ok = node_ok && block_ok;

  return {nonce_ok && paid_ok && node_ok,
          std::string("replay -> ") + (replayed ? std::string(reject_name(replayed->code)) : "accepted") +
              ", node resubmit -> " + (again.ok() ? "accepted" : std::string(reject_name(again.code()))) +
              ", replay in block -> " + (block_ok ? "BadNonce" : "not rejected") +
              ", second payment -> " + (pay2 ? std::string(reject_name(pay2->code)) : "accepted")};
}

Outcome acl_soundness() {
  std::mt19937_64 rng(103);
  Scenario s;
  const std::vector<int> patients{0, 1, 2}, providers{3, 4, 5, 6};
  std::map<int, Role> role;
  for (int p : patients) role[p] = Role::Patient;
  role[3] = role[4] = Role::Doctor;
  role[5] = role[6] = Role::Pharmacist;
  for (auto [i, r] : role) s.run(i, register_payload(r));

  // Reference model kept from the operations alone.
  std::set<std::pair<int, int>> granted;
  std::map<int, std::size_t> records_of;
  int violations = 0, ops = 0;
  for (; ops < 1000; ++ops) {
    int patient = patients[rng() % patients.size()];
    int actor = static_cast<int>(rng() % 8);
    switch (rng() % 4) {
      case 0: {
        int grantee = providers[rng() % providers.size()];
        bool ok = !s.run(patient, tx::GrantAccess{s.addr(grantee)});
        violations += ok == granted.contains({patient, grantee});
        if (ok) granted.insert({patient, grantee});
        break;
      }
      case 1: {
        int grantee = providers[rng() % providers.size()];
        bool ok = !s.run(patient, tx::RevokeAccess{s.addr(grantee)});
        violations += ok != granted.contains({patient, grantee});
        if (ok) granted.erase({patient, grantee});
        break;
      }
      case 2: {
        bool may = actor == patient ||
                   (role.contains(actor) && role[actor] == Role::Doctor && granted.contains({patient, actor}));
        bool ok = !s.run(actor, tx::AnchorRecord{s.addr(patient), random_hash(rng), "note"});
        violations += ok != may;
        if (ok) ++records_of[patient];
        break;
      }
      default: {
        bool may = actor == patient || granted.contains({patient, actor});
        auto r = query_records(s.state, s.addr(actor), s.addr(patient));
        violations += r.ok() != may;
        if (r.ok() && r->size() != records_of[patient]) ++violations;
        break;
      }
    }
  }
  return {violations == 0, std::to_string(ops) + " ops, " + std::to_string(violations) + " violations"};
}

Outcome replay_determinism() {
  constexpr int kDifficulty = 8;
  std::mt19937_64 rng(104);
  TempDir dir;
  ChainStore store(dir.path());
  for (const auto& b : ten_block_chain(kDifficulty, rng)) store.append(b);
  std::vector<std::string> args{"chain", "verify", "--json", "--dev", "--difficulty", std::to_string(kDifficulty),
                                "--data-dir", dir.path().string()};
  // Both processes run concurrently over the same file.
  std::FILE* a = ::popen(cli_command(args).c_str(), "r");
  std::FILE* b = ::popen(cli_command(args).c_str(), "r");
  if (!a || !b) throw std::runtime_error("popen failed");
  auto ra = finish(a);
  auto rb = finish(b);
  if (ra.exit_code != 0 || rb.exit_code != 0) return {false, "verify failed: " + ra.out + rb.out};
  auto da = json::parse(ra.out).at("state_digest").get<std::string>();
  auto db = json::parse(rb.out).at("state_digest").get<std::string>();
  auto local = state_digest(*replay(store.load(), devnet::allocations())).hex();
  return {da == db && da == local, "digest " + da.substr(0, 16) + "... (" + (da == db ? "equal" : "differs") + ")"};
}

Outcome convergence() {
  auto t0 = Clock::now();
  TempDir da, db, dc;
  NodeServer a(da.path(), 12), b(db.path(), 12), c(dc.path(), 12);
  std::vector<NodeServer*> nodes{&a, &b, &c};
  // Partitioned: each node mines its own fork of 2, 3 and 5 blocks.
  const int forks[] = {2, 3, 5};
  for (int i = 0; i < 3; ++i) {
    api::Client client(nodes[i]->url());
    auto t = make_tx(devnet::identity(i), 0, system_now(), tx::Transfer{dev_addr(9), ether(i + 1)});
    client.post("/tx", tx_to_json(t));
    for (int k = 0; k < forks[i]; ++k) client.post("/mine", {{"allow_empty", true}});
  }
  std::set<std::string> tips_before;
  for (auto* n : nodes) tips_before.insert(api::Client(n->url()).get("/health").body.at("tip").get<std::string>());

  for (auto* n : nodes) {
    for (auto* m : nodes) {
      if (n != m) api::Client(n->url()).post("/peers", {{"url", m->url()}});
    }
  }
  int rounds = 0;
  std::set<std::string> tips, digests;
  for (; rounds < 5; ++rounds) {
    tips.clear();
    digests.clear();
    for (auto* n : nodes) {
      auto h = api::Client(n->url()).get("/health").body;
      tips.insert(h.at("tip").get<std::string>());
      digests.insert(h.at("state_digest").get<std::string>());
    }
    if (tips.size() == 1 && digests.size() == 1) break;
    for (auto* n : nodes) api::Client(n->url()).post("/sync", json::object());
  }
  double secs = seconds_since(t0);
  auto height = api::Client(a.url()).get("/health").body.at("height").get<int>();
  bool pass = tips_before.size() == 3 && tips.size() == 1 && digests.size() == 1 && height == 5 && secs < 10.0;
  return {pass, std::to_string(tips_before.size()) + " forks -> " + std::to_string(tips.size()) + " tip at height " +
                    std::to_string(height) + " after " + std::to_string(rounds) + " sync round(s), " + fmt(secs) +
                    " s"};
}

bool contains_bytes(const std::string& hay, ByteView needle) {
  return hay.find(std::string(needle.begin(), needle.end())) != std::string::npos;
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

Outcome chap() {
  std::mt19937_64 rng(105);
  TempDir dir;
  NodeServer server(dir.path());
  api::Client client(server.url());
  std::vector<std::string> passwords;
  for (int i = 0; i < 10; ++i) {
    std::string pw = "pw-" + random_hash(rng).hex().substr(0, 20);
    passwords.push_back(pw);
    auto stored = password_hash(pw);
    auto kp = devnet::identity(i);
    auto r = client.post("/auth/enroll", {{"address", dev_addr(i).hex()},
                                          {"public_key", kp.public_key.hex()},
                                          {"stored_hash", stored.hex()},
                                          {"signature", sign(kp, enrollment_digest(dev_addr(i), stored).view()).hex()}});
    if (r.status != 200) return {false, "enrollment failed: " + r.body.dump()};
  }

  int logged_in = 0, leaks = 0, replays_refused = 0;
  for (int session = 0; session < 100; ++session) {
    int who = session % 10;
    const auto& pw = passwords[who];
    std::string transcript;
    json challenge_req = json::object();
    auto ch = client.post("/auth/challenge", challenge_req);
    transcript += "POST /auth/challenge " + challenge_req.dump() + "\n" + ch.body.dump() + "\n";
    auto nonce_bytes = from_hex(ch.body.at("nonce").get<std::string>());
    ChallengeNonce nonce{};
    std::copy(nonce_bytes.begin(), nonce_bytes.end(), nonce.begin());
    json login_req{{"address", dev_addr(who).hex()},
                   {"challenge_id", ch.body.at("challenge_id")},
                   {"response", chap_respond(pw, nonce).hex()}};
    auto login = client.post("/auth/login", login_req);
    transcript += "POST /auth/login " + login_req.dump() + "\n" + login.body.dump() + "\n";
    logged_in += login.status == 200 && !login.body.value("token", "").empty();

    auto h = password_hash(pw);
    bool leaked = transcript.find(pw) != std::string::npos || transcript.find(h.hex()) != std::string::npos ||
                  transcript.find(upper(h.hex())) != std::string::npos || contains_bytes(transcript, h.view());
    leaks += leaked;

    auto replay = client.post("/auth/login", login_req);
    replays_refused += replay.status == 401;
  }
  bool pass = logged_in == 100 && leaks == 0 && replays_refused == 100;
  return {pass, std::to_string(logged_in) + "/100 logins, " + std::to_string(leaks) + " leaks, " +
                    std::to_string(replays_refused) + "/100 replays refused"};
}

Outcome qr_codes() {
  std::mt19937_64 rng(106);
  std::vector<std::string> uris;
  std::vector<qr::Symbol> symbols;
  bool all_v6 = true;
  for (int i = 0; i < 50; ++i) {
    Address a;
    for (auto& b : a.bytes) b = static_cast<std::uint8_t>(rng());
    uris.push_back(qr::make_payload(a, random_hash(rng)).uri);
    symbols.push_back(qr::encode(uris.back()));
    all_v6 = all_v6 && symbols.back().version == 6 && symbols.back().size == 41;
  }
  auto decoded = medichain::testing::decode_symbols(symbols);
  int exact = 0;
  for (std::size_t i = 0; i < uris.size(); ++i) exact += decoded[i] == uris[i];

  // Every codeword position erased once, spread over the first ten symbols.
  auto codewords = qr::codeword_modules(6);
  std::vector<qr::Symbol> damaged;
  std::vector<std::string> expected;
  for (std::size_t k = 0; k < codewords.size(); ++k) {
    auto d = symbols[k % 10];
    for (auto [x, y] : codewords[k]) d.modules[static_cast<std::size_t>(y) * d.size + x] = !d.at(x, y);
    damaged.push_back(std::move(d));
    expected.push_back(uris[k % 10]);
  }
  auto recovered = medichain::testing::decode_symbols(damaged);
  int survived = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) survived += recovered[i] == expected[i];

  bool pass = all_v6 && exact == 50 && survived == static_cast<int>(expected.size());
  return {pass, std::to_string(exact) + "/50 decoded at 6-L, " + std::to_string(survived) + "/" +
                    std::to_string(expected.size()) + " single-codeword erasures decoded"};
}

Outcome end_to_end() {
  auto t0 = Clock::now();
  TempDir dir;
  int port = free_port();
  std::string url = "http://127.0.0.1:" + std::to_string(port);
  ::setenv("MEDICHAIN_NODE_URL", url.c_str(), 1);
  ::setenv("MEDICHAIN_KEYSTORE", (dir / "keys").c_str(), 1);
  ::setenv("MEDICHAIN_PASSWORD", "correct horse", 1);
  ServeProcess node({"serve", "--dev", "--data-dir", (dir / "data").string(), "--port", std::to_string(port)},
                    dir / "node.log");
  if (!wait_healthy(url, std::chrono::seconds(10))) return {false, "node did not come up"};

  std::string log;
  auto cli = [&](const std::vector<std::string>& args) {
    auto r = run_cli(args);
    log += "$ medichain";
    for (const auto& a : args) log += " " + a;
    log += "\n" + r.out;
    if (r.exit_code != 0) throw std::runtime_error("command failed:\n" + log);
    return r.out;
  };
  auto trim = [](std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
  };
  std::string patient = trim(cli({"keygen", "--dev-index", "0"}));
  std::string doctor = trim(cli({"keygen", "--dev-index", "1"}));
  std::string pharmacist = trim(cli({"keygen", "--dev-index", "2"}));

  cli({"--as", patient, "--mine", "register", "patient", "--name", "Alice", "--phone", "555-0100", "--email",
       "alice@example.org", "--dob", "1990-04-12", "--address", "1 Main St", "--insurance", "ACME-123"});
  for (const auto& [who, name] : {std::pair{doctor, "Bob"}, std::pair{pharmacist, "Carol"}}) {
    cli({"--as", who, "--mine", "register", who == doctor ? "doctor" : "pharmacist", "--name", name, "--phone",
         "555-0200", "--email", "staff@example.org", "--dob", "1975-09-30", "--address", "2 Clinic Rd",
         "--reg-number", "REG-42", "--org", "City Clinic"});
  }
  cli({"--as", patient, "--mine", "grant", doctor});
  std::ofstream(dir / "lab.txt") << "hemoglobin 14.1 g/dL\n";
  cli({"--as", doctor, "--mine", "anchor", (dir / "lab.txt").string(), "--patient", patient, "--type", "lab"});
  cli({"--as", doctor, "--mine", "prescribe", "--patient", patient, "--pharmacist", pharmacist, "--rx",
       "amoxicillin 500mg", "--price", "2"});
  cli({"--as", pharmacist, "--mine", "dispense", "1"});
  cli({"--as", patient, "--mine", "pay", "1"});

  auto balance = [&](const std::string& who) {
    return json::parse(cli({"--json", "balance", who})).at("balance_ether").get<std::string>();
  };
  auto patient_balance = balance(patient);
  auto pharmacist_balance = balance(pharmacist);
  auto invoices = json::parse(cli({"--as", patient, "--json", "invoices"})).at("invoices");
  std::string status = invoices.size() == 1 ? invoices[0].at("status").get<std::string>() : "missing";
  double secs = seconds_since(t0);
  bool pass = patient_balance == "98" && pharmacist_balance == "102" && status == "paid" && secs < 15.0;
  return {pass, "patient " + patient_balance + " ether, pharmacist " + pharmacist_balance + " ether, invoice " +
                    status + ", " + fmt(secs) + " s"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"genesis fidelity", genesis_fidelity},
      {"conservation", conservation},
      {"tamper detection", tamper_detection},
      {"proof of work", proof_of_work},
      {"double spend", double_spend},
      {"acl soundness", acl_soundness},
      {"replay determinism", replay_determinism},
      {"convergence", convergence},
      {"chap", chap},
      {"qr", qr_codes},
      {"end to end cli", end_to_end},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << '\n';
  return failed ? 1 : 0;
}
