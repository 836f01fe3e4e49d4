#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace medichain {

/// Named reasons a transaction, request or chain is refused. The names are
/// part of the wire and CLI contract.
enum class RejectCode {
  BadSignature,
  BadNonce,
  UnknownSender,
  DuplicateAddress,
  AlreadyRegistered,
  MissingField,
  InvalidField,
  NotAPatient,
  GranteeUnregistered,
  AlreadyActive,
  NotActive,
  Unauthorized,
  PatientUnregistered,
  NotADoctor,
  NoActiveGrant,
  PharmacistUnregistered,
  NotDesignatedPharmacist,
  NotFound,
  AlreadyDispensed,
  NotYourInvoice,
  InsufficientBalance,
  AlreadyPaid,
  DuplicateNonce,
  NothingToMine,
  AuthFailed,
  ChallengeExpired,
  InvalidTransactionAt,
  CorruptChain,
  BadRequest,
};

inline constexpr std::string_view reject_name(RejectCode c) {
  switch (c) {
    case RejectCode::BadSignature: return "BadSignature";
    case RejectCode::BadNonce: return "BadNonce";
    case RejectCode::UnknownSender: return "UnknownSender";
    case RejectCode::DuplicateAddress: return "DuplicateAddress";
    case RejectCode::AlreadyRegistered: return "AlreadyRegistered";
    case RejectCode::MissingField: return "MissingField";
    case RejectCode::InvalidField: return "InvalidField";
    case RejectCode::NotAPatient: return "NotAPatient";
    case RejectCode::GranteeUnregistered: return "GranteeUnregistered";
    case RejectCode::AlreadyActive: return "AlreadyActive";
    case RejectCode::NotActive: return "NotActive";
    case RejectCode::Unauthorized: return "Unauthorized";
    case RejectCode::PatientUnregistered: return "PatientUnregistered";
    case RejectCode::NotADoctor: return "NotADoctor";
    case RejectCode::NoActiveGrant: return "NoActiveGrant";
    case RejectCode::PharmacistUnregistered: return "PharmacistUnregistered";
    case RejectCode::NotDesignatedPharmacist: return "NotDesignatedPharmacist";
    case RejectCode::NotFound: return "NotFound";
    case RejectCode::AlreadyDispensed: return "AlreadyDispensed";
    case RejectCode::NotYourInvoice: return "NotYourInvoice";
    case RejectCode::InsufficientBalance: return "InsufficientBalance";
    case RejectCode::AlreadyPaid: return "AlreadyPaid";
    case RejectCode::DuplicateNonce: return "DuplicateNonce";
    case RejectCode::NothingToMine: return "NothingToMine";
    case RejectCode::AuthFailed: return "AuthFailed";
    case RejectCode::ChallengeExpired: return "ChallengeExpired";
    case RejectCode::InvalidTransactionAt: return "InvalidTransactionAt";
    case RejectCode::CorruptChain: return "CorruptChain";
    case RejectCode::BadRequest: return "BadRequest";
  }
  return "Unknown";
}

struct Rejection {
  RejectCode code;
  std::string detail;
  // Set for InvalidTransactionAt.
  std::optional<std::uint64_t> height = std::nullopt;
  std::optional<std::uint64_t> index = std::nullopt;

  std::string message() const {
    std::string out(reject_name(code));
    if (!detail.empty()) out += ": " + detail;
    return out;
  }
  bool operator==(const Rejection& o) const { return code == o.code; }
};

/// Value or rejection. Kept deliberately small; rejection is the expected
/// path for state rules, so it is not an exception.
template <typename T>
class Result {
 public:
  Result(T value) : v_(std::move(value)) {}
  Result(Rejection r) : v_(std::move(r)) {}
  Result(RejectCode c, std::string detail = {}) : v_(Rejection{c, std::move(detail), {}, {}}) {}

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  T& value() & { return std::get<T>(v_); }
  const T& value() const& { return std::get<T>(v_); }
  T&& value() && { return std::get<T>(std::move(v_)); }
  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }
  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }

  const Rejection& error() const { return std::get<Rejection>(v_); }
  RejectCode code() const { return error().code; }

 private:
  std::variant<T, Rejection> v_;
};

struct Unit {};

}  // namespace medichain
