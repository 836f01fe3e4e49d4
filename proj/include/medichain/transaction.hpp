#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "medichain/amount.hpp"
#include "medichain/bytes.hpp"
#include "medichain/crypto.hpp"
#include "medichain/json_util.hpp"
#include "medichain/sha256.hpp"

namespace medichain {

enum class Role : std::uint8_t { Patient = 1, Doctor = 2, Pharmacist = 3 };

inline std::string_view role_name(Role r) {
  switch (r) {
    case Role::Patient: return "patient";
    case Role::Doctor: return "doctor";
    case Role::Pharmacist: return "pharmacist";
  }
  return "?";
}

inline Role parse_role(std::string_view s) {
  if (s == "patient") return Role::Patient;
  if (s == "doctor") return Role::Doctor;
  if (s == "pharmacist") return Role::Pharmacist;
  throw ParseError("unknown role: " + std::string(s));
}

/// Registration details for doctors and pharmacists.
struct ProviderProfile {
  std::string name;
  std::string phone;
  std::string email;
  std::string date_of_birth;  // YYYY-MM-DD
  std::string postal_address;
  std::string registration_number;
  std::string organization;

  bool operator==(const ProviderProfile&) const = default;
};

struct PatientProfile {
  std::string name;
  std::string phone;
  std::string email;
  std::string date_of_birth;  // YYYY-MM-DD
  std::string home_address;
  std::string insurance_details;

  bool operator==(const PatientProfile&) const = default;
};

using Profile = std::variant<ProviderProfile, PatientProfile>;

inline Role default_profile_role(const Profile& p) {
  return std::holds_alternative<PatientProfile>(p) ? Role::Patient : Role::Doctor;
}

namespace tx {

struct Register {
  Role role;
  Profile profile;
  bool operator==(const Register&) const = default;
};
struct GrantAccess {
  Address grantee;
  bool operator==(const GrantAccess&) const = default;
};
struct RevokeAccess {
  Address grantee;
  bool operator==(const RevokeAccess&) const = default;
};
struct AnchorRecord {
  Address patient;
  Hash32 record_hash;
  std::string record_type;
  bool operator==(const AnchorRecord&) const = default;
};
struct Prescribe {
  Address patient;
  Address pharmacist;
  Hash32 rx_hash;
  Wei price = 0;
  bool operator==(const Prescribe&) const = default;
};
struct Dispense {
  std::uint64_t prescription_id = 0;
  bool operator==(const Dispense&) const = default;
};
struct PayInvoice {
  std::uint64_t invoice_id = 0;
  bool operator==(const PayInvoice&) const = default;
};
struct Transfer {
  Address to;
  Wei amount = 0;
  bool operator==(const Transfer&) const = default;
};

}  // namespace tx

// Variant order fixes the type tag: index + 1.
using Payload = std::variant<tx::Register, tx::GrantAccess, tx::RevokeAccess, tx::AnchorRecord, tx::Prescribe,
                             tx::Dispense, tx::PayInvoice, tx::Transfer>;

inline std::string_view payload_name(const Payload& p) {
  static constexpr std::string_view names[] = {"register", "grant",    "revoke",      "anchor",
                                               "prescribe", "dispense", "pay_invoice", "transfer"};
  return names[p.index()];
}

struct SignedTransaction {
  Address sender;
  PublicKey sender_public_key;
  std::uint64_t nonce = 0;
  std::int64_t timestamp = 0;
  Payload payload;
  Signature signature;

  bool operator==(const SignedTransaction&) const = default;
};

namespace detail {

inline void encode_profile(ByteWriter& w, const Profile& profile) {
  if (const auto* d = std::get_if<ProviderProfile>(&profile)) {
    for (const auto* s : {&d->name, &d->phone, &d->email, &d->date_of_birth, &d->postal_address,
                          &d->registration_number, &d->organization}) {
      w.text(*s);
    }
  } else {
    const auto& p = std::get<PatientProfile>(profile);
    for (const auto* s : {&p.name, &p.phone, &p.email, &p.date_of_birth, &p.home_address, &p.insurance_details}) {
      w.text(*s);
    }
  }
}

inline void encode_payload(ByteWriter& w, const Payload& payload) {
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, tx::Register>) {
          w.u8(static_cast<std::uint8_t>(p.role));
          encode_profile(w, p.profile);
        } else if constexpr (std::is_same_v<T, tx::GrantAccess> || std::is_same_v<T, tx::RevokeAccess>) {
          w.raw(p.grantee.view());
        } else if constexpr (std::is_same_v<T, tx::AnchorRecord>) {
          w.raw(p.patient.view());
          w.raw(p.record_hash.view());
          w.text(p.record_type);
        } else if constexpr (std::is_same_v<T, tx::Prescribe>) {
          w.raw(p.patient.view());
          w.raw(p.pharmacist.view());
          w.raw(p.rx_hash.view());
          w.u128(p.price);
        } else if constexpr (std::is_same_v<T, tx::Dispense>) {
          w.u64(p.prescription_id);
        } else if constexpr (std::is_same_v<T, tx::PayInvoice>) {
          w.u64(p.invoice_id);
        } else {
          w.raw(p.to.view());
          w.u128(p.amount);
        }
      },
      payload);
}

inline ByteWriter encode_unsigned(const SignedTransaction& t) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(t.payload.index() + 1));
  w.raw(t.sender.view());
  w.raw(t.sender_public_key.view());
  w.u64(t.nonce);
  w.u64(static_cast<std::uint64_t>(t.timestamp));
  encode_payload(w, t.payload);
  return w;
}

}  // namespace detail

/// Canonical encoding: tag byte, then fields in declaration order with
/// big-endian integers and u32-length-prefixed texts; the signature last.
inline Bytes encode_tx(const SignedTransaction& t) {
  auto w = detail::encode_unsigned(t);
  w.raw(t.signature.view());
  return std::move(w).bytes();
}

/// Digest the sender signs: the encoding with the signature omitted.
inline Hash32 signing_digest(const SignedTransaction& t) { return sha256(detail::encode_unsigned(t).bytes()); }

inline Hash32 txid(const SignedTransaction& t) { return sha256(encode_tx(t)); }

/// Address binding plus signature; never throws.
inline bool verify_tx_signature(const SignedTransaction& t) {
  if (derive_address(t.sender_public_key) != t.sender) return false;
  auto digest = signing_digest(t);
  return verify(t.sender_public_key, digest.view(), t.signature);
}

inline SignedTransaction make_tx(const KeyPair& kp, std::uint64_t nonce, std::int64_t timestamp, Payload payload) {
  SignedTransaction t;
  t.sender = derive_address(kp.public_key);
  t.sender_public_key = kp.public_key;
  t.nonce = nonce;
  t.timestamp = timestamp;
  t.payload = std::move(payload);
  auto digest = signing_digest(t);
  t.signature = sign(kp, digest.view());
  return t;
}

// ---- JSON ---------------------------------------------------------------

inline nlohmann::json profile_to_json(const Profile& profile) {
  if (const auto* d = std::get_if<ProviderProfile>(&profile)) {
    return {{"name", d->name},
            {"phone", d->phone},
            {"email", d->email},
            {"date_of_birth", d->date_of_birth},
            {"postal_address", d->postal_address},
            {"registration_number", d->registration_number},
            {"organization", d->organization}};
  }
  const auto& p = std::get<PatientProfile>(profile);
  return {{"name", p.name},
          {"phone", p.phone},
          {"email", p.email},
          {"date_of_birth", p.date_of_birth},
          {"home_address", p.home_address},
          {"insurance_details", p.insurance_details}};
}

inline Profile profile_from_json(Role role, const nlohmann::json& j) {
  using namespace medichain::strict;
  if (role == Role::Patient) {
    expect_object(j, {"name", "phone", "email", "date_of_birth", "home_address", "insurance_details"});
    return PatientProfile{str(j, "name"),          str(j, "phone"),        str(j, "email"),
                          str(j, "date_of_birth"), str(j, "home_address"), str(j, "insurance_details")};
  }
  expect_object(j, {"name", "phone", "email", "date_of_birth", "postal_address", "registration_number", "organization"});
  return ProviderProfile{str(j, "name"),           str(j, "phone"),
                         str(j, "email"),          str(j, "date_of_birth"),
                         str(j, "postal_address"), str(j, "registration_number"),
                         str(j, "organization")};
}

inline nlohmann::json payload_to_json(const Payload& payload) {
  return std::visit(
      [](const auto& p) -> nlohmann::json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, tx::Register>) {
          return {{"role", role_name(p.role)}, {"profile", profile_to_json(p.profile)}};
        } else if constexpr (std::is_same_v<T, tx::GrantAccess> || std::is_same_v<T, tx::RevokeAccess>) {
          return {{"grantee", p.grantee.hex()}};
        } else if constexpr (std::is_same_v<T, tx::AnchorRecord>) {
          return {{"patient", p.patient.hex()}, {"record_hash", p.record_hash.hex()}, {"record_type", p.record_type}};
        } else if constexpr (std::is_same_v<T, tx::Prescribe>) {
          return {{"patient", p.patient.hex()},
                  {"pharmacist", p.pharmacist.hex()},
                  {"rx_hash", p.rx_hash.hex()},
                  {"price", to_decimal(p.price)}};
        } else if constexpr (std::is_same_v<T, tx::Dispense>) {
          return {{"prescription_id", p.prescription_id}};
        } else if constexpr (std::is_same_v<T, tx::PayInvoice>) {
          return {{"invoice_id", p.invoice_id}};
        } else {
          return {{"to", p.to.hex()}, {"amount", to_decimal(p.amount)}};
        }
      },
      payload);
}

inline Payload payload_from_json(std::string_view type, const nlohmann::json& j) {
  using namespace medichain::strict;
  if (type == "register") {
    expect_object(j, {"role", "profile"});
    Role role = parse_role(str(j, "role"));
    return tx::Register{role, profile_from_json(role, field(j, "profile"))};
  }
  if (type == "grant" || type == "revoke") {
    expect_object(j, {"grantee"});
    auto grantee = hex<Address>(j, "grantee");
    if (type == "grant") return tx::GrantAccess{grantee};
    return tx::RevokeAccess{grantee};
  }
  if (type == "anchor") {
    expect_object(j, {"patient", "record_hash", "record_type"});
    return tx::AnchorRecord{hex<Address>(j, "patient"), hex<Hash32>(j, "record_hash"), str(j, "record_type")};
  }
  if (type == "prescribe") {
    expect_object(j, {"patient", "pharmacist", "rx_hash", "price"});
    return tx::Prescribe{hex<Address>(j, "patient"), hex<Address>(j, "pharmacist"), hex<Hash32>(j, "rx_hash"),
                         wei(j, "price")};
  }
  if (type == "dispense") {
    expect_object(j, {"prescription_id"});
    return tx::Dispense{u64(j, "prescription_id")};
  }
  if (type == "pay_invoice") {
    expect_object(j, {"invoice_id"});
    return tx::PayInvoice{u64(j, "invoice_id")};
  }
  if (type == "transfer") {
    expect_object(j, {"to", "amount"});
    return tx::Transfer{hex<Address>(j, "to"), wei(j, "amount")};
  }
  throw ParseError("unknown transaction type: " + std::string(type));
}

inline nlohmann::json tx_to_json(const SignedTransaction& t) {
  return {{"type", payload_name(t.payload)},
          {"sender", t.sender.hex()},
          {"public_key", t.sender_public_key.hex()},
          {"nonce", t.nonce},
          {"timestamp", t.timestamp},
          {"payload", payload_to_json(t.payload)},
          {"signature", t.signature.hex()}};
}

inline SignedTransaction tx_from_json(const nlohmann::json& j) {
  using namespace medichain::strict;
  expect_object(j, {"type", "sender", "public_key", "nonce", "timestamp", "payload", "signature"});
  SignedTransaction t;
  t.sender = hex<Address>(j, "sender");
  t.sender_public_key = hex<PublicKey>(j, "public_key");
  t.nonce = u64(j, "nonce");
  auto ts = u64(j, "timestamp");
  if (ts > static_cast<std::uint64_t>(INT64_MAX)) throw ParseError("timestamp out of range");
  t.timestamp = static_cast<std::int64_t>(ts);
  t.payload = payload_from_json(str(j, "type"), field(j, "payload"));
  t.signature = hex<Signature>(j, "signature");
  return t;
}

}  // namespace medichain
