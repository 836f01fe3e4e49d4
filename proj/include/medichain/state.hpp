#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "medichain/amount.hpp"
#include "medichain/json_util.hpp"
#include "medichain/ledger.hpp"
#include "medichain/rejection.hpp"
#include "medichain/transaction.hpp"

namespace medichain {

struct Account {
  Wei balance = 0;
  std::uint64_t nonce = 0;
  bool operator==(const Account&) const = default;
};

struct Registration {
  Role role;
  Profile profile;
  std::uint64_t registered_at = 0;
  bool operator==(const Registration&) const = default;
};

struct Grant {
  Address patient;
  Address grantee;
  bool active = false;
  std::uint64_t granted_at = 0;
  std::optional<std::uint64_t> revoked_at;
  bool operator==(const Grant&) const = default;
};

struct RecordAnchor {
  std::uint64_t id = 0;
  Address patient;
  Address author;
  Hash32 record_hash;
  std::string record_type;
  std::uint64_t anchored_at = 0;
  bool operator==(const RecordAnchor&) const = default;
};

enum class PrescriptionStatus { Open, Dispensed };
enum class InvoiceStatus { Unpaid, Paid };

struct Prescription {
  std::uint64_t id = 0;
  Address doctor;
  Address patient;
  Address pharmacist;
  Hash32 rx_hash;
  Wei price = 0;
  PrescriptionStatus status = PrescriptionStatus::Open;
  std::uint64_t created_at = 0;
  bool operator==(const Prescription&) const = default;
};

struct Invoice {
  std::uint64_t id = 0;
  std::uint64_t prescription_id = 0;
  Address patient;
  Address payee;
  Wei amount = 0;
  InvoiceStatus status = InvoiceStatus::Unpaid;
  std::optional<std::uint64_t> paid_at;
  bool operator==(const Invoice&) const = default;
};

/// Height and time of the block a transaction executes in.
struct BlockContext {
  std::uint64_t height = 0;
  std::uint64_t timestamp = 0;
};

/// Materialised contract state. Ids are 1-based and equal index + 1 in
/// their vectors; prescription k and invoice k are created together.
struct WorldState {
  std::map<Address, Account> accounts;
  std::map<Address, Registration> registrations;
  std::map<std::pair<Address, Address>, Grant> grants;  // keyed (patient, grantee)
  std::vector<RecordAnchor> records;
  std::vector<Prescription> prescriptions;
  std::vector<Invoice> invoices;
  Wei total_supply = 0;

  bool operator==(const WorldState&) const = default;

  const Account* account(const Address& a) const {
    auto it = accounts.find(a);
    return it == accounts.end() ? nullptr : &it->second;
  }
  std::optional<Role> role_of(const Address& a) const {
    auto it = registrations.find(a);
    if (it == registrations.end()) return std::nullopt;
    return it->second.role;
  }
  bool has_active_grant(const Address& patient, const Address& grantee) const {
    auto it = grants.find({patient, grantee});
    return it != grants.end() && it->second.active;
  }
  Wei balance_sum() const {
    Wei sum = 0;
    for (const auto& [_, acct] : accounts) sum += acct.balance;
    return sum;
  }
};

struct Allocation {
  Address address;
  Wei amount = 0;
};

inline Result<WorldState> genesis_state(const std::vector<Allocation>& allocations) {
  WorldState s;
  for (const auto& a : allocations) {
    auto [_, inserted] = s.accounts.emplace(a.address, Account{a.amount, 0});
    if (!inserted) return {RejectCode::DuplicateAddress, a.address.hex()};
    s.total_supply += a.amount;
  }
  return s;
}

namespace rules {

inline bool valid_iso_date(std::string_view d) {
  if (d.size() != 10 || d[4] != '-' || d[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (d[i] < '0' || d[i] > '9') return false;
  }
  int year = std::stoi(std::string(d.substr(0, 4)));
  int month = std::stoi(std::string(d.substr(5, 2)));
  int day = std::stoi(std::string(d.substr(8, 2)));
  if (month < 1 || month > 12 || day < 1) return false;
  static constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  int limit = days[month - 1] + (month == 2 && leap ? 1 : 0);
  return day <= limit;
}

inline std::optional<Rejection> check_profile(Role role, const Profile& profile) {
  std::vector<std::pair<const char*, const std::string*>> fields;
  const std::string* dob = nullptr;
  if (role == Role::Patient) {
    const auto* p = std::get_if<PatientProfile>(&profile);
    if (!p) return Rejection{RejectCode::InvalidField, "patient registration needs a patient profile"};
    fields = {{"name", &p->name},
              {"phone", &p->phone},
              {"email", &p->email},
              {"date_of_birth", &p->date_of_birth},
              {"home_address", &p->home_address},
              {"insurance_details", &p->insurance_details}};
    dob = &p->date_of_birth;
  } else {
    const auto* d = std::get_if<ProviderProfile>(&profile);
    if (!d) return Rejection{RejectCode::InvalidField, "provider registration needs a provider profile"};
    fields = {{"name", &d->name},
              {"phone", &d->phone},
              {"email", &d->email},
              {"date_of_birth", &d->date_of_birth},
              {"postal_address", &d->postal_address},
              {"registration_number", &d->registration_number},
              {"organization", &d->organization}};
    dob = &d->date_of_birth;
  }
  for (const auto& [name, value] : fields) {
    if (value->empty()) return Rejection{RejectCode::MissingField, name};
  }
  if (!valid_iso_date(*dob)) return Rejection{RejectCode::InvalidField, "date_of_birth"};
  return std::nullopt;
}

// Each rule validates completely before its first write, so a rejection
// leaves `s` untouched.

inline std::optional<Rejection> apply(WorldState& s, const Address& sender, const tx::Register& p,
                                      const BlockContext& ctx) {
  if (s.registrations.contains(sender)) return Rejection{RejectCode::AlreadyRegistered, sender.hex()};
  if (auto bad = check_profile(p.role, p.profile)) return bad;
  s.registrations.emplace(sender, Registration{p.role, p.profile, ctx.height});
  s.accounts.try_emplace(sender);
  return std::nullopt;
}

inline std::optional<Rejection> apply(WorldState& s, const Address& sender, const tx::GrantAccess& p,
                                      const BlockContext& ctx) {
  if (s.role_of(sender) != Role::Patient) return Rejection{RejectCode::NotAPatient, {}};
  auto grantee_role = s.role_of(p.grantee);
  if (grantee_role != Role::Doctor && grantee_role != Role::Pharmacist) {
    return Rejection{RejectCode::GranteeUnregistered, p.grantee.hex()};
  }
  if (s.has_active_grant(sender, p.grantee)) return Rejection{RejectCode::AlreadyActive, {}};
  s.grants[{sender, p.grantee}] = Grant{sender, p.grantee, true, ctx.height, std::nullopt};
  return std::nullopt;
}

inline std::optional<Rejection> apply(WorldState& s, const Address& sender, const tx::RevokeAccess& p,
                                      const BlockContext& ctx) {
  if (s.role_of(sender) != Role::Patient) return Rejection{RejectCode::NotAPatient, {}};
  auto grantee_role = s.role_of(p.grantee);
  if (grantee_role != Role::Doctor && grantee_role != Role::Pharmacist) {
    return Rejection{RejectCode::GranteeUnregistered, p.grantee.hex()};
  }
  auto it = s.grants.find({sender, p.grantee});
  if (it == s.grants.end() || !it->second.active) return Rejection{RejectCode::NotActive, {}};
  it->second.active = false;
  it->second.revoked_at = ctx.height;
  return std::nullopt;
}

inline std::optional<Rejection> apply(WorldState& s, const Address& sender, const tx::AnchorRecord& p,
                                      const BlockContext& ctx) {
  if (s.role_of(p.patient) != Role::Patient) return Rejection{RejectCode::PatientUnregistered, p.patient.hex()};
  bool own = sender == p.patient;
  bool granted_doctor = s.role_of(sender) == Role::Doctor && s.has_active_grant(p.patient, sender);
  if (!own && !granted_doctor) return Rejection{RejectCode::Unauthorized, {}};
  if (p.record_type.empty()) return Rejection{RejectCode::MissingField, "record_type"};
  s.records.push_back(RecordAnchor{s.records.size() + 1, p.patient, sender, p.record_hash, p.record_type, ctx.height});
  return std::nullopt;
}

inline std::optional<Rejection> apply(WorldState& s, const Address& sender, const tx::Prescribe& p,
                                      const BlockContext& ctx) {
  if (s.role_of(sender) != Role::Doctor) return Rejection{RejectCode::NotADoctor, {}};
  if (!s.has_active_grant(p.patient, sender)) return Rejection{RejectCode::NoActiveGrant, {}};
  if (s.role_of(p.pharmacist) != Role::Pharmacist) {
    return Rejection{RejectCode::PharmacistUnregistered, p.pharmacist.hex()};
  }
  std::uint64_t id = s.prescriptions.size() + 1;
  s.prescriptions.push_back(
      Prescription{id, sender, p.patient, p.pharmacist, p.rx_hash, p.price, PrescriptionStatus::Open, ctx.height});
  s.invoices.push_back(Invoice{id, id, p.patient, p.pharmacist, p.price, InvoiceStatus::Unpaid, std::nullopt});
  return std::nullopt;
}

inline std::optional<Rejection> apply(WorldState& s, const Address& sender, const tx::Dispense& p,
                                      const BlockContext&) {
  if (p.prescription_id == 0 || p.prescription_id > s.prescriptions.size()) {
    return Rejection{RejectCode::NotFound, "prescription " + std::to_string(p.prescription_id)};
  }
  auto& rx = s.prescriptions[p.prescription_id - 1];
  if (rx.pharmacist != sender) return Rejection{RejectCode::NotDesignatedPharmacist, {}};
  if (rx.status == PrescriptionStatus::Dispensed) return Rejection{RejectCode::AlreadyDispensed, {}};
  rx.status = PrescriptionStatus::Dispensed;
  return std::nullopt;
}

inline std::optional<Rejection> apply(WorldState& s, const Address& sender, const tx::PayInvoice& p,
                                      const BlockContext& ctx) {
  if (p.invoice_id == 0 || p.invoice_id > s.invoices.size()) {
    return Rejection{RejectCode::NotFound, "invoice " + std::to_string(p.invoice_id)};
  }
  auto& inv = s.invoices[p.invoice_id - 1];
  if (inv.patient != sender) return Rejection{RejectCode::NotYourInvoice, {}};
  if (inv.status == InvoiceStatus::Paid) return Rejection{RejectCode::AlreadyPaid, {}};
  auto& payer = s.accounts.at(sender);
  if (payer.balance < inv.amount) return Rejection{RejectCode::InsufficientBalance, {}};
  payer.balance -= inv.amount;
  s.accounts[inv.payee].balance += inv.amount;
  inv.status = InvoiceStatus::Paid;
  inv.paid_at = ctx.height;
  return std::nullopt;
}

inline std::optional<Rejection> apply(WorldState& s, const Address& sender, const tx::Transfer& p,
                                      const BlockContext&) {
  auto& from = s.accounts.at(sender);
  if (from.balance < p.amount) return Rejection{RejectCode::InsufficientBalance, {}};
  from.balance -= p.amount;
  s.accounts[p.to].balance += p.amount;
  return std::nullopt;
}

}  // namespace rules

/// In-place variant of apply_tx for replay loops. On rejection `s` is
/// unchanged.
inline std::optional<Rejection> apply_tx_in_place(WorldState& s, const SignedTransaction& t, const BlockContext& ctx) {
  if (!verify_tx_signature(t)) return Rejection{RejectCode::BadSignature, {}};
  const Account* acct = s.account(t.sender);
  bool is_register = std::holds_alternative<tx::Register>(t.payload);
  if (!acct && !is_register) return Rejection{RejectCode::UnknownSender, t.sender.hex()};
  std::uint64_t expected = acct ? acct->nonce : 0;
  if (t.nonce != expected) {
    return Rejection{RejectCode::BadNonce, "expected " + std::to_string(expected) + ", got " + std::to_string(t.nonce)};
  }
  auto rejected = std::visit([&](const auto& p) { return rules::apply(s, t.sender, p, ctx); }, t.payload);
  if (rejected) return rejected;
  s.accounts[t.sender].nonce += 1;
  return std::nullopt;
}

/// Pure transition: the input state is never modified.
inline Result<WorldState> apply_tx(const WorldState& s, const SignedTransaction& t, const BlockContext& ctx = {}) {
  WorldState next = s;
  if (auto r = apply_tx_in_place(next, t, ctx)) return *r;
  return next;
}

inline Result<std::vector<RecordAnchor>> query_records(const WorldState& s, const Address& requester,
                                                       const Address& patient) {
  if (requester != patient && !s.has_active_grant(patient, requester)) return {RejectCode::Unauthorized, {}};
  std::vector<RecordAnchor> out;
  for (const auto& r : s.records) {
    if (r.patient == patient) out.push_back(r);
  }
  return out;
}

/// Merkle root over a patient's record hashes in anchoring order.
inline Hash32 records_digest(const WorldState& s, const Address& patient) {
  std::vector<Hash32> leaves;
  for (const auto& r : s.records) {
    if (r.patient == patient) leaves.push_back(r.record_hash);
  }
  return merkle_root(std::move(leaves));
}

/// Applies one block's transactions; first rejection aborts with its index.
inline std::optional<Rejection> apply_block(WorldState& s, const Block& b) {
  BlockContext ctx{b.header.height, b.header.timestamp};
  for (std::size_t i = 0; i < b.transactions.size(); ++i) {
    if (auto r = apply_tx_in_place(s, b.transactions[i], ctx)) {
      Rejection out{RejectCode::InvalidTransactionAt,
                    "height " + std::to_string(b.header.height) + ", index " + std::to_string(i) + ": " + r->message(),
                    b.header.height, i};
      return out;
    }
  }
  return std::nullopt;
}

/// Folds every transaction of a validated chain into the genesis state.
inline Result<WorldState> replay(const Chain& chain, const std::vector<Allocation>& genesis_alloc) {
  auto state = genesis_state(genesis_alloc);
  if (!state) return state;
  WorldState s = std::move(state).value();
  for (const auto& b : chain) {
    if (auto r = apply_block(s, b)) return *r;
  }
  return s;
}

// ---- canonical JSON / digest ---------------------------------------------

inline std::string_view status_name(PrescriptionStatus s) { return s == PrescriptionStatus::Open ? "open" : "dispensed"; }
inline std::string_view status_name(InvoiceStatus s) { return s == InvoiceStatus::Unpaid ? "unpaid" : "paid"; }

inline nlohmann::json record_to_json(const RecordAnchor& r) {
  return {{"id", r.id},
          {"patient", r.patient.hex()},
          {"author", r.author.hex()},
          {"record_hash", r.record_hash.hex()},
          {"record_type", r.record_type},
          {"anchored_at", r.anchored_at}};
}

inline nlohmann::json prescription_to_json(const Prescription& p) {
  return {{"id", p.id},
          {"doctor", p.doctor.hex()},
          {"patient", p.patient.hex()},
          {"pharmacist", p.pharmacist.hex()},
          {"rx_hash", p.rx_hash.hex()},
          {"price", to_decimal(p.price)},
          {"status", status_name(p.status)},
          {"created_at", p.created_at}};
}

inline nlohmann::json invoice_to_json(const Invoice& i) {
  return {{"id", i.id},
          {"prescription_id", i.prescription_id},
          {"patient", i.patient.hex()},
          {"payee", i.payee.hex()},
          {"amount", to_decimal(i.amount)},
          {"status", status_name(i.status)},
          {"paid_at", i.paid_at ? nlohmann::json(*i.paid_at) : nlohmann::json(nullptr)}};
}

inline nlohmann::json state_to_json(const WorldState& s) {
  nlohmann::json accounts = nlohmann::json::object();
  for (const auto& [addr, a] : s.accounts) {
    accounts[addr.hex()] = {{"balance", to_decimal(a.balance)}, {"nonce", a.nonce}};
  }
  nlohmann::json regs = nlohmann::json::object();
  for (const auto& [addr, r] : s.registrations) {
    regs[addr.hex()] = {{"role", role_name(r.role)},
                        {"profile", profile_to_json(r.profile)},
                        {"registered_at", r.registered_at}};
  }
  auto grants = nlohmann::json::array();
  for (const auto& [_, g] : s.grants) {
    grants.push_back({{"patient", g.patient.hex()},
                      {"grantee", g.grantee.hex()},
                      {"active", g.active},
                      {"granted_at", g.granted_at},
                      {"revoked_at", g.revoked_at ? nlohmann::json(*g.revoked_at) : nlohmann::json(nullptr)}});
  }
  auto records = nlohmann::json::array();
  for (const auto& r : s.records) records.push_back(record_to_json(r));
  auto rxs = nlohmann::json::array();
  for (const auto& p : s.prescriptions) rxs.push_back(prescription_to_json(p));
  auto invoices = nlohmann::json::array();
  for (const auto& i : s.invoices) invoices.push_back(invoice_to_json(i));
  return {{"accounts", std::move(accounts)},
          {"registrations", std::move(regs)},
          {"grants", std::move(grants)},
          {"records", std::move(records)},
          {"prescriptions", std::move(rxs)},
          {"invoices", std::move(invoices)},
          {"total_supply", to_decimal(s.total_supply)}};
}

/// sha256 of the canonical (sorted-key, compact) state JSON.
inline Hash32 state_digest(const WorldState& s) { return sha256(strict::canonical(state_to_json(s))); }

}  // namespace medichain
