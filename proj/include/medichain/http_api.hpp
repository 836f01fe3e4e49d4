#pragma once

#include <httplib.h>

#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "medichain/node.hpp"
#include "medichain/qr.hpp"
#include "medichain/qr_payload.hpp"

namespace medichain::api {

using nlohmann::json;

inline int http_status(RejectCode c) {
  switch (c) {
    case RejectCode::AuthFailed:
    case RejectCode::ChallengeExpired: return 401;
    case RejectCode::Unauthorized: return 403;
    case RejectCode::NotFound: return 404;
    case RejectCode::DuplicateNonce:
    case RejectCode::NothingToMine: return 409;
    default: return 400;
  }
}

inline json rejection_json(const Rejection& r) {
  json j = {{"error", reject_name(r.code)}, {"detail", r.detail}};
  if (r.height) j["height"] = *r.height;
  if (r.index) j["index"] = *r.index;
  return j;
}

inline void send(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(strict::canonical(body), "application/json");
}

inline void send_rejection(httplib::Response& res, const Rejection& r) { send(res, rejection_json(r), http_status(r.code)); }

inline json receipt_json(const Receipt& r) {
  static constexpr const char* names[] = {"pending", "applied", "rejected"};
  json j = {{"status", names[static_cast<int>(r.status)]}};
  if (r.height) j["height"] = *r.height;
  if (r.error) j["error"] = rejection_json(*r.error);
  return j;
}

inline json account_json(const Snapshot& snap, const Address& a, std::uint64_t next_nonce) {
  const Account* acct = snap.state.account(a);
  Wei bal = acct ? acct->balance : 0;
  json j = {{"address", a.hex()},
            {"balance", to_decimal(bal)},
            {"balance_ether", format_ether(bal)},
            {"nonce", acct ? acct->nonce : 0},
            {"next_nonce", next_nonce},
            {"role", nullptr}};
  if (auto role = snap.state.role_of(a)) j["role"] = role_name(*role);
  return j;
}

inline json chain_json(const Chain& chain) {
  auto blocks = json::array();
  for (const auto& b : chain) blocks.push_back(block_to_json(b));
  return {{"blocks", std::move(blocks)}};
}

inline Chain chain_from_json(const json& j) {
  const auto& blocks = strict::field(j, "blocks");
  if (!blocks.is_array()) throw ParseError("blocks must be an array");
  Chain out;
  for (const auto& b : blocks) out.push_back(block_from_json(b));
  return out;
}

inline std::optional<std::string> bearer_token(const httplib::Request& req) {
  auto h = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (h.size() <= prefix.size() || h.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  return h.substr(prefix.size());
}

/// Blocking HTTP client for one base URL, e.g. "http://127.0.0.1:7545".
class Client {
 public:
  explicit Client(const std::string& base_url) : cli_(base_url) {
    cli_.set_connection_timeout(5);
    cli_.set_read_timeout(60);
  }

  struct Response {
    int status = 0;
    json body;
    bool ok() const { return status >= 200 && status < 300; }
  };

  Response get(const std::string& path, const std::optional<std::string>& token = std::nullopt) {
    return wrap(cli_.Get(path.c_str(), headers(token)));
  }

  Response post(const std::string& path, const json& body, const std::optional<std::string>& token = std::nullopt) {
    return wrap(cli_.Post(path.c_str(), headers(token), strict::canonical(body), "application/json"));
  }

 private:
  static httplib::Headers headers(const std::optional<std::string>& token) {
    httplib::Headers h;
    if (token) h.emplace("Authorization", "Bearer " + *token);
    return h;
  }

  static Response wrap(const httplib::Result& r) {
    if (!r) throw std::runtime_error("node unreachable: " + httplib::to_string(r.error()));
    Response out;
    out.status = r->status;
    out.body = r->body.empty() ? json::object() : json::parse(r->body, nullptr, false);
    if (out.body.is_discarded()) out.body = json{{"error", "BadResponse"}, {"detail", r->body}};
    return out;
  }

  httplib::Client cli_;
};

inline Chain fetch_chain(const std::string& peer_url) {
  Client c(peer_url);
  auto r = c.get("/chain");
  if (!r.ok()) throw std::runtime_error("GET /chain returned " + std::to_string(r.status));
  return chain_from_json(r.body);
}

/// Binds a Node to the REST surface.
class Server {
 public:
  explicit Server(Node& node) : node_(node) { routes(); }

  bool listen(const std::string& host, int port) { return http_.listen(host, port); }
  int bind_any_port(const std::string& host = "127.0.0.1") { return http_.bind_to_any_port(host); }
  bool listen_after_bind() { return http_.listen_after_bind(); }
  void stop() { http_.stop(); }
  void wait_until_ready() const { http_.wait_until_ready(); }
  bool is_running() const { return http_.is_running(); }

 private:
  template <typename F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const ParseError& e) {
      send_rejection(res, {RejectCode::BadRequest, e.what()});
    } catch (const json::exception& e) {
      send_rejection(res, {RejectCode::BadRequest, e.what()});
    } catch (const std::invalid_argument& e) {
      send_rejection(res, {RejectCode::BadRequest, e.what()});
    }
  }

  static json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    auto j = json::parse(req.body, nullptr, false);
    if (j.is_discarded()) throw ParseError("request body is not JSON");
    return j;
  }

  std::optional<Address> require_session(const httplib::Request& req, httplib::Response& res) {
    auto tok = bearer_token(req);
    auto who = tok ? node_.session_address(*tok) : std::nullopt;
    if (!who) send_rejection(res, {RejectCode::AuthFailed, "missing or expired session token"});
    return who;
  }

  void routes() {
    using Req = const httplib::Request&;
    using Res = httplib::Response&;

    http_.Get("/health", [this](Req, Res res) {
      auto snap = node_.snapshot();
      send(res, {{"status", "ok"},
                 {"height", snap->height()},
                 {"tip", header_hash(snap->tip().header).hex()},
                 {"state_digest", state_digest(snap->state).hex()},
                 {"difficulty_bits", node_.config().difficulty_bits},
                 {"dev_mode", node_.config().dev_mode}});
    });

    http_.Post("/tx", [this](Req req, Res res) {
      guarded(res, [&] {
        auto t = tx_from_json(parse_body(req));
        auto r = node_.submit_tx(t);
        if (!r) return send_rejection(res, r.error());
        send(res, {{"txid", r->hex()}});
      });
    });

    http_.Get(R"(/tx/([0-9a-f]{64}))", [this](Req req, Res res) {
      auto r = node_.receipt(Hash32::from_hex(req.matches[1].str()));
      if (!r) return send_rejection(res, {RejectCode::NotFound, "unknown txid"});
      send(res, receipt_json(*r));
    });

    http_.Get("/mempool", [this](Req, Res res) {
      auto pending = json::array();
      for (const auto& t : node_.mempool()) pending.push_back({{"txid", txid(t).hex()}, {"tx", tx_to_json(t)}});
      send(res, {{"pending", std::move(pending)}});
    });

    http_.Post("/mine", [this](Req req, Res res) {
      guarded(res, [&] {
        auto body = parse_body(req);
        bool allow_empty = body.contains("allow_empty") && strict::boolean(body, "allow_empty");
        auto r = node_.produce_block(node_.now(), allow_empty);
        if (!r) return send_rejection(res, r.error());
        auto included = json::array();
        for (const auto& t : r->block.transactions) included.push_back(txid(t).hex());
        auto dropped = json::array();
        for (const auto& [id, why] : r->dropped) dropped.push_back({{"txid", id.hex()}, {"error", rejection_json(why)}});
        send(res, {{"height", r->block.header.height},
                   {"hash", header_hash(r->block.header).hex()},
                   {"included", std::move(included)},
                   {"dropped", std::move(dropped)}});
      });
    });

    http_.Get("/chain", [this](Req, Res res) { send(res, chain_json(node_.snapshot()->chain)); });

    http_.Get(R"(/block/(\d+))", [this](Req req, Res res) {
      auto snap = node_.snapshot();
      auto h = std::stoull(req.matches[1].str());
      if (h >= snap->chain.size()) return send_rejection(res, {RejectCode::NotFound, "no block at that height"});
      auto j = block_to_json(snap->chain[h]);
      j["hash"] = header_hash(snap->chain[h].header).hex();
      send(res, j);
    });

    http_.Get(R"(/accounts/([0-9a-f]{40}))", [this](Req req, Res res) {
      auto a = Address::from_hex(req.matches[1].str());
      auto next = node_.next_nonce(a);
      send(res, account_json(*node_.snapshot(), a, next));
    });

    http_.Post("/auth/challenge", [this](Req, Res res) {
      auto c = node_.issue_challenge();
      send(res, {{"challenge_id", c.id},
                 {"nonce", to_hex(c.nonce)},
                 {"issued_at", c.issued_at},
                 {"expires_at", c.issued_at + node_.config().challenge_lifetime}});
    });

    http_.Post("/auth/login", [this](Req req, Res res) {
      guarded(res, [&] {
        auto body = parse_body(req);
        auto r = node_.login(strict::hex<Address>(body, "address"), strict::u64(body, "challenge_id"),
                             strict::hex<Hash32>(body, "response"));
        if (!r) return send_rejection(res, r.error());
        send(res, {{"token", r->token}, {"address", r->address.hex()}, {"expires_at", r->expires_at}});
      });
    });

    http_.Post("/auth/enroll", [this](Req req, Res res) {
      guarded(res, [&] {
        auto body = parse_body(req);
        auto r = node_.enroll_password(strict::hex<Address>(body, "address"), strict::hex<PublicKey>(body, "public_key"),
                                       strict::hex<Hash32>(body, "stored_hash"), strict::hex<Signature>(body, "signature"));
        if (!r) return send_rejection(res, r.error());
        send(res, {{"enrolled", true}});
      });
    });

    http_.Get(R"(/patients/([0-9a-f]{40})/records)", [this](Req req, Res res) {
      auto who = require_session(req, res);
      if (!who) return;
      auto patient = Address::from_hex(req.matches[1].str());
      auto snap = node_.snapshot();
      auto r = query_records(snap->state, *who, patient);
      if (!r) return send_rejection(res, r.error());
      auto records = json::array();
      for (const auto& rec : *r) records.push_back(record_to_json(rec));
      send(res, {{"patient", patient.hex()},
                 {"records", std::move(records)},
                 {"digest", records_digest(snap->state, patient).hex()}});
    });

    http_.Get(R"(/prescriptions/(\d+))", [this](Req req, Res res) {
      auto who = require_session(req, res);
      if (!who) return;
      auto snap = node_.snapshot();
      auto id = std::stoull(req.matches[1].str());
      const auto& rxs = snap->state.prescriptions;
      if (id == 0 || id > rxs.size()) return send_rejection(res, {RejectCode::NotFound, "no such prescription"});
      const auto& rx = rxs[id - 1];
      if (*who != rx.patient && *who != rx.doctor && *who != rx.pharmacist) {
        return send_rejection(res, {RejectCode::Unauthorized, {}});
      }
      auto j = prescription_to_json(rx);
      j["invoice"] = invoice_to_json(snap->state.invoices[id - 1]);
      send(res, j);
    });

    http_.Get(R"(/invoices/([0-9a-f]{40}))", [this](Req req, Res res) {
      auto who = require_session(req, res);
      if (!who) return;
      auto addr = Address::from_hex(req.matches[1].str());
      if (*who != addr) return send_rejection(res, {RejectCode::Unauthorized, {}});
      auto out = json::array();
      auto snap = node_.snapshot();
      for (const auto& inv : snap->state.invoices) {
        if (inv.patient == addr || inv.payee == addr) out.push_back(invoice_to_json(inv));
      }
      send(res, {{"invoices", std::move(out)}});
    });

    http_.Get(R"(/qr/([0-9a-f]{40}))", [this](Req req, Res res) {
      guarded(res, [&] {
        auto patient = Address::from_hex(req.matches[1].str());
        auto snap = node_.snapshot();
        Hash32 digest;
        std::string kind = "merkle_root";
        if (req.has_param("record")) {
          auto id = std::stoull(req.get_param_value("record"));
          const auto& recs = snap->state.records;
          if (id == 0 || id > recs.size() || recs[id - 1].patient != patient) {
            return send_rejection(res, {RejectCode::NotFound, "no such record for patient"});
          }
          digest = recs[id - 1].record_hash;
          kind = "record";
        } else {
          digest = records_digest(snap->state, patient);
        }
        auto payload = qr::make_payload(patient, digest);
        auto symbol = qr::encode(payload.uri);
        if (req.get_param_value("format") == "pbm") {
          res.set_content(qr::to_pbm(symbol), "image/x-portable-bitmap");
          return;
        }
        send(res, {{"payload", payload.uri},
                   {"digest_kind", kind},
                   {"version", symbol.version},
                   {"size", symbol.size},
                   {"ascii", qr::to_ascii(symbol)}});
      });
    });

    http_.Get("/peers", [this](Req, Res res) { send(res, {{"peers", node_.peers()}}); });

    http_.Post("/peers", [this](Req req, Res res) {
      guarded(res, [&] {
        node_.add_peer(strict::str(parse_body(req), "url"));
        send(res, {{"peers", node_.peers()}});
      });
    });

    http_.Post("/sync", [this](Req, Res res) {
      bool adopted = node_.sync_with_peers(fetch_chain);
      send(res, {{"adopted", adopted}, {"height", node_.snapshot()->height()}});
    });
  }

  Node& node_;
  httplib::Server http_;
};

}  // namespace medichain::api
