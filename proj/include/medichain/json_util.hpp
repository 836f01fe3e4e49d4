#pragma once

#include <initializer_list>
#include <nlohmann/json.hpp>
#include <string>

#include "medichain/amount.hpp"
#include "medichain/bytes.hpp"

namespace medichain::strict {

using nlohmann::json;

// Strict accessors for canonical documents: exact key sets, unsigned
// integers only, lowercase hex. Anything else is a ParseError.

inline void expect_object(const json& j, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ParseError("expected JSON object");
  if (j.size() != keys.size()) throw ParseError("unexpected key set in JSON object");
  for (const char* k : keys) {
    if (!j.contains(k)) throw ParseError(std::string("missing key: ") + k);
  }
}

inline const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing key: ") + key);
  return *it;
}

inline std::uint64_t u64(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_unsigned()) throw ParseError(std::string("expected unsigned integer: ") + key);
  return v.get<std::uint64_t>();
}

inline std::string str(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) throw ParseError(std::string("expected string: ") + key);
  return v.get<std::string>();
}

inline bool boolean(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_boolean()) throw ParseError(std::string("expected boolean: ") + key);
  return v.get<bool>();
}

template <typename Fixed>
Fixed hex(const json& j, const char* key) {
  return Fixed::from_hex(str(j, key));
}

inline Wei wei(const json& j, const char* key) { return parse_wei(str(j, key)); }

/// Canonical text: sorted keys (nlohmann's default object map) and no
/// insignificant whitespace.
inline std::string canonical(const json& j) { return j.dump(); }

}  // namespace medichain::strict
