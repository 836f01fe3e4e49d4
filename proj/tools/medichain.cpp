// medichain: node daemon and client for the EHR ledger.

#include <termios.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "medichain/http_api.hpp"
#include "medichain/keystore.hpp"
#include "medichain/medichain.hpp"

namespace {

using namespace medichain;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitRejected = 1;
constexpr int kExitUsage = 2;

/// A failure the CLI reports by rejection name with exit code 1.
struct CliRejection {
  std::string name;
  std::string detail;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

struct Options {
  std::string node_url = env_or("MEDICHAIN_NODE_URL", "http://127.0.0.1:7545");
  std::string keystore = env_or("MEDICHAIN_KEYSTORE", "keys");
  std::string identity = env_or("MEDICHAIN_IDENTITY", "");
  std::string password;
  bool json_out = false;
  bool mine_after = false;
  bool no_wait = false;
  int wait_seconds = 30;
};

void print_json(const json& j) { std::cout << strict::canonical(j) << '\n'; }

std::string prompt(const std::string& label, bool secret = false) {
  if (!isatty(STDIN_FILENO)) return {};
  std::cerr << label << ": " << std::flush;
  termios saved{};
  bool hide = secret && tcgetattr(STDIN_FILENO, &saved) == 0;
  if (hide) {
    termios quiet = saved;
    quiet.c_lflag &= ~static_cast<tcflag_t>(ECHO);
    tcsetattr(STDIN_FILENO, TCSANOW, &quiet);
  }
  std::string line;
  std::getline(std::cin, line);
  if (hide) {
    tcsetattr(STDIN_FILENO, TCSANOW, &saved);
    std::cerr << '\n';
  }
  return line;
}

std::string password_for(Options& o) {
  if (o.password.empty()) o.password = env_or("MEDICHAIN_PASSWORD", "");
  if (o.password.empty()) o.password = prompt("password", true);
  if (o.password.empty()) throw UsageError("a password is required (--password or MEDICHAIN_PASSWORD)");
  return o.password;
}

Address parse_address(const std::string& s) {
  try {
    return Address::from_hex(s.rfind("0x", 0) == 0 ? s.substr(2) : s);
  } catch (const ParseError&) {
    throw UsageError("not a 40-hex-digit address: " + s);
  }
}

class Session {
 public:
  explicit Session(Options& o) : o_(o), client_(o.node_url) {}

  api::Client& client() { return client_; }

  Address identity_address() {
    Keystore ks(o_.keystore);
    if (!o_.identity.empty()) return parse_address(o_.identity);
    auto all = ks.list();
    if (all.size() == 1) return all.front();
    throw UsageError(all.empty() ? "no identities in keystore " + o_.keystore
                                 : "several identities in keystore; choose one with --as");
  }

  const KeyPair& keys() {
    if (!keys_) {
      Keystore ks(o_.keystore);
      auto entry = ks.load(identity_address());
      try {
        keys_ = open_keystore(entry, password_for(o_));
      } catch (const WrongPassword&) {
        throw CliRejection{"WrongPassword", "cannot unlock keystore"};
      }
    }
    return *keys_;
  }

  Address me() { return derive_address(keys().public_key); }

  json expect_ok(const api::Client::Response& r) {
    if (!r.ok()) {
      std::string name = r.body.value("error", "HttpError");
      throw CliRejection{name, r.body.value("detail", "HTTP " + std::to_string(r.status))};
    }
    return r.body;
  }

  /// Signs, submits and (by default) waits for the transaction to settle.
  json submit(Payload payload) {
    const auto& kp = keys();
    auto acct = expect_ok(client_.get("/accounts/" + me().hex()));
    auto t = make_tx(kp, acct.at("next_nonce").get<std::uint64_t>(), system_now(), std::move(payload));
    auto accepted = expect_ok(client_.post("/tx", tx_to_json(t)));
    std::string id = accepted.at("txid");
    if (o_.mine_after) client_.post("/mine", json::object());
    if (o_.no_wait) return {{"txid", id}, {"status", "pending"}};

    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(o_.wait_seconds);
    while (true) {
      auto r = expect_ok(client_.get("/tx/" + id));
      std::string status = r.at("status");
      if (status == "applied") return {{"txid", id}, {"status", status}, {"height", r.at("height")}};
      if (status == "rejected") {
        const auto& err = r.at("error");
        std::string detail = err.value("detail", "");
        throw CliRejection{err.at("error"), (detail.empty() ? "" : detail + " ") + "(txid " + id + ")"};
      }
      if (std::chrono::steady_clock::now() > deadline) return {{"txid", id}, {"status", "pending"}};
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  }

  /// CHAP login; neither the password nor its hash is sent.
  std::string login() {
    if (token_) return *token_;
    auto ch = expect_ok(client_.post("/auth/challenge", json::object()));
    auto nonce_bytes = from_hex(ch.at("nonce").get<std::string>());
    ChallengeNonce nonce{};
    if (nonce_bytes.size() != nonce.size()) throw CliRejection{"BadResponse", "challenge nonce has wrong size"};
    std::copy(nonce_bytes.begin(), nonce_bytes.end(), nonce.begin());
    auto response = chap_respond(password_for(o_), nonce);
    auto tok = expect_ok(client_.post(
        "/auth/login",
        {{"address", me().hex()}, {"challenge_id", ch.at("challenge_id")}, {"response", response.hex()}}));
    token_ = tok.at("token").get<std::string>();
    return *token_;
  }

  void enroll() {
    auto stored = password_hash(password_for(o_));
    auto sig = sign(keys(), enrollment_digest(me(), stored).view());
    expect_ok(client_.post("/auth/enroll", {{"address", me().hex()},
                                            {"public_key", keys().public_key.hex()},
                                            {"stored_hash", stored.hex()},
                                            {"signature", sig.hex()}}));
  }

 private:
  Options& o_;
  api::Client client_;
  std::optional<KeyPair> keys_;
  std::optional<std::string> token_;
};

void report_tx(const Options& o, const json& r, const std::string& what) {
  if (o.json_out) return print_json(r);
  std::cout << what << ": " << r.at("status").get<std::string>() << " (txid " << r.at("txid").get<std::string>();
  if (r.contains("height")) std::cout << ", block " << r.at("height");
  std::cout << ")\n";
}

// ---- serve ----------------------------------------------------------------

api::Server* g_server = nullptr;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

struct ServeArgs {
  std::string config;
  std::string host = "127.0.0.1";
  std::optional<int> port;
  std::optional<std::string> data_dir;
  std::optional<int> difficulty;
  std::vector<std::string> peers;
  bool dev = false;
  std::optional<int> automine;
  bool recover = false;
  bool verbose = false;
};

NodeConfig node_config(const ServeArgs& a) {
  NodeConfig cfg;
  if (!a.config.empty()) cfg = load_node_toml(a.config);
  if (a.port) cfg.listen_port = static_cast<std::uint16_t>(*a.port);
  if (a.data_dir) cfg.data_dir = *a.data_dir;
  if (a.difficulty) cfg.difficulty_bits = *a.difficulty;
  for (const auto& p : a.peers) cfg.peers.push_back(p);
  if (a.dev) cfg.dev_mode = true;
  if (a.automine) cfg.automine_interval = *a.automine;
  cfg.recover_torn_tail = a.recover;
  cfg.validate();
  return cfg;
}

int run_serve(const ServeArgs& a) {
  auto cfg = node_config(a);
  Node node(cfg);
  node.set_verbose(a.verbose);
  try {
    node.startup_replay();
  } catch (const CorruptChain& e) {
    std::cerr << "CorruptChain: " << e.what() << '\n';
    return kExitRejected;
  }
  api::Server server(node);
  g_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  node.start_background();
  auto snap = node.snapshot();
  std::cerr << "medichain node on " << a.host << ":" << cfg.listen_port << ", height " << snap->height()
            << ", data " << cfg.data_dir.string() << (cfg.dev_mode ? " (dev)" : "") << std::endl;
  bool ok = server.listen(a.host, cfg.listen_port);
  node.stop();
  g_server = nullptr;
  if (!ok) {
    std::cerr << "cannot listen on " << a.host << ":" << cfg.listen_port << '\n';
    return kExitRejected;
  }
  return kExitOk;
}

// ---- chain verify ---------------------------------------------------------

int run_chain_verify(const Options& o, const ServeArgs& a) {
  auto cfg = node_config(a);
  ChainStore store(cfg.data_dir);
  auto fail = [&](std::uint64_t height, const std::string& why) {
    if (o.json_out) {
      print_json({{"ok", false}, {"height", height}, {"error", why}});
    } else {
      std::cout << "chain invalid at height " << height << ": " << why << '\n';
    }
    return kExitRejected;
  };
  Chain chain;
  try {
    chain = store.load();
  } catch (const CorruptChain& e) {
    return fail(e.height, e.what());
  }
  if (auto failure = validate_chain(chain, cfg.difficulty_bits)) {
    std::string why;
    for (auto v : failure->violations) why += (why.empty() ? "" : ", ") + std::string(violation_name(v));
    return fail(failure->height, why);
  }
  auto state = replay(chain, cfg.dev_mode ? devnet::allocations() : std::vector<Allocation>{});
  if (!state) return fail(state.error().height.value_or(0), state.error().message());
  auto tip = header_hash(chain.back().header).hex();
  auto digest = state_digest(*state).hex();
  if (o.json_out) {
    print_json({{"ok", true}, {"height", chain.back().header.height}, {"tip", tip}, {"state_digest", digest}});
  } else {
    std::cout << "chain ok: height " << chain.back().header.height << ", tip " << tip << "\nstate digest " << digest
              << '\n';
  }
  return kExitOk;
}

// ---- client commands ------------------------------------------------------

struct RegisterArgs {
  std::string role;
  std::string name, phone, email, dob, address, insurance, reg_number, org;
};

std::string field_or_prompt(const std::string& value, const std::string& label) {
  return value.empty() ? prompt(label) : value;
}

Payload register_payload(const RegisterArgs& a) {
  Role role = parse_role(a.role);
  auto name = field_or_prompt(a.name, "name");
  auto phone = field_or_prompt(a.phone, "phone");
  auto email = field_or_prompt(a.email, "email");
  auto dob = field_or_prompt(a.dob, "date of birth (YYYY-MM-DD)");
  if (role == Role::Patient) {
    return tx::Register{role, PatientProfile{name, phone, email, dob, field_or_prompt(a.address, "home address"),
                                             field_or_prompt(a.insurance, "insurance details")}};
  }
  return tx::Register{role, ProviderProfile{name, phone, email, dob, field_or_prompt(a.address, "postal address"),
                                            field_or_prompt(a.reg_number, "registration number"),
                                            field_or_prompt(a.org, "organization")}};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"medichain: permissioned EHR ledger node and client"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  app.add_option("--node", o.node_url, "Node URL (env MEDICHAIN_NODE_URL)");
  app.add_option("--keystore", o.keystore, "Keystore directory (env MEDICHAIN_KEYSTORE)");
  app.add_option("--as", o.identity, "Identity address to act as (env MEDICHAIN_IDENTITY)");
  app.add_option("--password", o.password, "Keystore/portal password (env MEDICHAIN_PASSWORD)");
  app.add_flag("--json", o.json_out, "Canonical JSON output");
  app.add_flag("--mine", o.mine_after, "Ask the node to mine right after submitting");
  app.add_flag("--no-wait", o.no_wait, "Return as soon as the node accepts the transaction");
  app.add_option("--wait", o.wait_seconds, "Seconds to wait for inclusion")->check(CLI::PositiveNumber);

  ServeArgs serve_args;
  auto add_node_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", serve_args.config, "node.toml");
    cmd->add_option("--data-dir", serve_args.data_dir, "Node data directory");
    cmd->add_option("--difficulty", serve_args.difficulty, "PoW difficulty bits")->check(CLI::Range(0, 32));
    cmd->add_flag("--dev", serve_args.dev, "Dev network: ten funded fixture accounts");
  };
  auto* serve = app.add_subcommand("serve", "Run a node");
  add_node_flags(serve);
  serve->add_option("--host", serve_args.host, "Bind address");
  serve->add_option("--port", serve_args.port, "Listen port")->check(CLI::Range(1, 65535));
  serve->add_option("--peer", serve_args.peers, "Peer URL (repeatable)");
  serve->add_option("--automine", serve_args.automine, "Mine pending transactions every N seconds")
      ->check(CLI::PositiveNumber);
  serve->add_flag("--recover", serve_args.recover, "Drop a torn final line in chain.jsonl");
  serve->add_flag("--verbose", serve_args.verbose, "Log node activity");

  std::optional<int> dev_index;
  std::string seed_hex;
  auto* keygen_cmd = app.add_subcommand("keygen", "Create an encrypted identity");
  keygen_cmd->add_option("--dev-index", dev_index, "Import dev identity 0..9")->check(CLI::Range(0, 9));
  keygen_cmd->add_option("--seed", seed_hex, "32-byte hex seed");

  RegisterArgs reg;
  auto* register_cmd = app.add_subcommand("register", "Register a role and profile");
  register_cmd->add_option("role", reg.role, "patient | doctor | pharmacist")
      ->required()
      ->check(CLI::IsMember({"patient", "doctor", "pharmacist"}));
  register_cmd->add_option("--name", reg.name);
  register_cmd->add_option("--phone", reg.phone);
  register_cmd->add_option("--email", reg.email);
  register_cmd->add_option("--dob", reg.dob, "Date of birth YYYY-MM-DD");
  register_cmd->add_option("--address", reg.address, "Home or postal address");
  register_cmd->add_option("--insurance", reg.insurance, "Insurance details (patients)");
  register_cmd->add_option("--reg-number", reg.reg_number, "Registration number (providers)");
  register_cmd->add_option("--org", reg.org, "Healthcare organization (providers)");

  std::string grantee;
  auto* grant_cmd = app.add_subcommand("grant", "Grant a provider access to your records");
  grant_cmd->add_option("grantee", grantee)->required();
  auto* revoke_cmd = app.add_subcommand("revoke", "Revoke a provider's access");
  revoke_cmd->add_option("grantee", grantee)->required();

  std::string file, patient, record_type = "document";
  auto* anchor_cmd = app.add_subcommand("anchor", "Hash a record file locally and anchor the digest");
  anchor_cmd->add_option("file", file)->required();
  anchor_cmd->add_option("--patient", patient, "Patient address (default: yourself)");
  anchor_cmd->add_option("--type", record_type, "Record type label");

  auto* records_cmd = app.add_subcommand("records", "List a patient's anchored records");
  records_cmd->add_option("patient", patient)->required();

  std::string pharmacist, rx_text, rx_file, price;
  auto* prescribe_cmd = app.add_subcommand("prescribe", "Prescribe; the invoice is created with it");
  prescribe_cmd->add_option("--patient", patient)->required();
  prescribe_cmd->add_option("--pharmacist", pharmacist)->required();
  auto* rx_opt = prescribe_cmd->add_option("--rx", rx_text, "Prescription text (only its hash goes on chain)");
  prescribe_cmd->add_option("--rx-file", rx_file, "Prescription file")->excludes(rx_opt);
  prescribe_cmd->add_option("--price", price, "Price in ether")->required();

  std::uint64_t id = 0;
  auto* dispense_cmd = app.add_subcommand("dispense", "Mark a prescription dispensed");
  dispense_cmd->add_option("prescription-id", id)->required();

  auto* invoices_cmd = app.add_subcommand("invoices", "List invoices you owe or are owed");

  auto* pay_cmd = app.add_subcommand("pay", "Pay an invoice");
  pay_cmd->add_option("invoice-id", id)->required();

  std::string addr;
  auto* balance_cmd = app.add_subcommand("balance", "Show an account balance");
  balance_cmd->add_option("address", addr, "Address (default: yourself)");

  std::string to, amount;
  auto* transfer_cmd = app.add_subcommand("transfer", "Send ether");
  transfer_cmd->add_option("--to", to)->required();
  transfer_cmd->add_option("--amount", amount, "Amount in ether")->required();

  std::optional<std::uint64_t> record_id;
  std::string pbm_path;
  auto* qr_cmd = app.add_subcommand("qr", "Show a patient's record digest as a QR symbol");
  qr_cmd->add_option("patient", patient)->required();
  qr_cmd->add_option("--record", record_id, "Single record id instead of the Merkle digest");
  qr_cmd->add_option("--pbm", pbm_path, "Also write a PBM image");

  auto* chain_cmd = app.add_subcommand("chain", "Chain tools");
  chain_cmd->require_subcommand(1);
  auto* verify_cmd = chain_cmd->add_subcommand("verify", "Validate and replay a node data directory");
  add_node_flags(verify_cmd);

  bool allow_empty = false;
  auto* mine_cmd = app.add_subcommand("mine", "Ask the node to mine a block");
  mine_cmd->add_flag("--allow-empty", allow_empty, "Mine even with an empty mempool");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (serve->parsed()) return run_serve(serve_args);
    if (verify_cmd->parsed()) return run_chain_verify(o, serve_args);

    Session s(o);
    if (keygen_cmd->parsed()) {
      std::optional<SecretKey> seed;
      if (dev_index) seed = dev_seed(static_cast<std::uint8_t>(*dev_index));
      if (!seed_hex.empty()) seed = SecretKey::from_hex(seed_hex);
      auto kp = keygen(seed);
      auto path = Keystore(o.keystore).save(seal_keystore(kp, password_for(o)));
      auto address = derive_address(kp.public_key).hex();
      if (o.json_out) {
        print_json({{"address", address}, {"public_key", kp.public_key.hex()}, {"keystore", path.string()}});
      } else {
        std::cout << address << '\n';
      }
      return kExitOk;
    }
    if (register_cmd->parsed()) {
      auto r = s.submit(register_payload(reg));
      s.enroll();
      report_tx(o, r, "register " + reg.role);
      return kExitOk;
    }
    if (grant_cmd->parsed()) {
      report_tx(o, s.submit(tx::GrantAccess{parse_address(grantee)}), "grant");
      return kExitOk;
    }
    if (revoke_cmd->parsed()) {
      report_tx(o, s.submit(tx::RevokeAccess{parse_address(grantee)}), "revoke");
      return kExitOk;
    }
    if (anchor_cmd->parsed()) {
      auto digest = sha256(read_file(file));
      Address target = patient.empty() ? s.me() : parse_address(patient);
      auto r = s.submit(tx::AnchorRecord{target, digest, record_type});
      r["record_hash"] = digest.hex();
      if (o.json_out) {
        print_json(r);
      } else {
        std::cout << "sha256 " << digest.hex() << '\n';
        report_tx(o, r, "anchor");
      }
      return kExitOk;
    }
    if (records_cmd->parsed()) {
      auto token = s.login();
      auto r = s.expect_ok(s.client().get("/patients/" + parse_address(patient).hex() + "/records", token));
      if (o.json_out) {
        print_json(r);
      } else {
        for (const auto& rec : r.at("records")) {
          std::cout << "#" << rec.at("id") << " " << rec.at("record_type").get<std::string>() << " "
                    << rec.at("record_hash").get<std::string>() << " by " << rec.at("author").get<std::string>()
                    << " @" << rec.at("anchored_at") << '\n';
        }
        std::cout << "digest " << r.at("digest").get<std::string>() << '\n';
      }
      return kExitOk;
    }
    if (prescribe_cmd->parsed()) {
      std::string rx = rx_file.empty() ? rx_text : read_file(rx_file);
      if (rx.empty()) throw UsageError("prescription needs --rx or --rx-file");
      Wei wei_price = 0;
      try {
        wei_price = parse_ether(price);
      } catch (const ParseError& e) {
        throw UsageError(e.what());
      }
      auto r = s.submit(tx::Prescribe{parse_address(patient), parse_address(pharmacist), sha256(rx), wei_price});
      report_tx(o, r, "prescribe");
      return kExitOk;
    }
    if (dispense_cmd->parsed()) {
      report_tx(o, s.submit(tx::Dispense{id}), "dispense");
      return kExitOk;
    }
    if (pay_cmd->parsed()) {
      report_tx(o, s.submit(tx::PayInvoice{id}), "pay");
      return kExitOk;
    }
    if (invoices_cmd->parsed()) {
      auto token = s.login();
      auto r = s.expect_ok(s.client().get("/invoices/" + s.me().hex(), token));
      if (o.json_out) {
        print_json(r);
      } else {
        for (const auto& inv : r.at("invoices")) {
          std::cout << "#" << inv.at("id") << " " << format_ether(parse_wei(inv.at("amount").get<std::string>()))
                    << " ether " << inv.at("status").get<std::string>() << " patient "
                    << inv.at("patient").get<std::string>() << " payee " << inv.at("payee").get<std::string>()
                    << '\n';
        }
      }
      return kExitOk;
    }
    if (balance_cmd->parsed()) {
      Address a = addr.empty() ? s.identity_address() : parse_address(addr);
      auto r = s.expect_ok(s.client().get("/accounts/" + a.hex()));
      if (o.json_out) {
        print_json(r);
      } else {
        std::cout << r.at("balance_ether").get<std::string>() << " ether\n";
      }
      return kExitOk;
    }
    if (transfer_cmd->parsed()) {
      Wei wei_amount = 0;
      try {
        wei_amount = parse_ether(amount);
      } catch (const ParseError& e) {
        throw UsageError(e.what());
      }
      report_tx(o, s.submit(tx::Transfer{parse_address(to), wei_amount}), "transfer");
      return kExitOk;
    }
    if (qr_cmd->parsed()) {
      std::string path = "/qr/" + parse_address(patient).hex();
      if (record_id) path += "?record=" + std::to_string(*record_id);
      auto r = s.expect_ok(s.client().get(path));
      auto symbol = qr::encode(r.at("payload").get<std::string>());
      if (!pbm_path.empty()) {
        std::ofstream out(pbm_path);
        out << qr::to_pbm(symbol);
        if (!out) throw UsageError("cannot write " + pbm_path);
      }
      if (o.json_out) {
        print_json(r);
      } else {
        std::cout << r.at("payload").get<std::string>() << '\n' << qr::to_ascii(symbol);
      }
      return kExitOk;
    }
    if (mine_cmd->parsed()) {
      auto r = s.expect_ok(s.client().post("/mine", {{"allow_empty", allow_empty}}));
      if (o.json_out) {
        print_json(r);
      } else {
        std::cout << "mined block " << r.at("height") << " " << r.at("hash").get<std::string>() << " ("
                  << r.at("included").size() << " txs, " << r.at("dropped").size() << " dropped)\n";
      }
      return kExitOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CliRejection& r) {
    if (o.json_out) {
      print_json({{"error", r.name}, {"detail", r.detail}});
    } else {
      std::cerr << r.name << (r.detail.empty() ? "" : ": " + r.detail) << '\n';
    }
    return kExitRejected;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRejected;
  }
  return kExitUsage;
}
