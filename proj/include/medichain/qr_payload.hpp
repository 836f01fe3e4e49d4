#pragma once

#include <string>
#include <string_view>
#include <utility>

#include "medichain/bytes.hpp"

namespace medichain::qr {

inline constexpr std::string_view kScheme = "ehr://";
inline constexpr std::size_t kPayloadLength = 6 + 40 + 1 + 64;

/// `ehr://<40-hex patient address>/<64-hex digest>`, always 111 chars.
struct Payload {
  std::string uri;
  bool operator==(const Payload&) const = default;
};

inline Payload make_payload(const Address& patient, const Hash32& digest) {
  return {std::string(kScheme) + patient.hex() + "/" + digest.hex()};
}

inline std::pair<Address, Hash32> parse_payload(std::string_view uri) {
  if (uri.size() != kPayloadLength || uri.substr(0, kScheme.size()) != kScheme || uri[46] != '/') {
    throw ParseError("not an ehr:// payload");
  }
  return {Address::from_hex(uri.substr(6, 40)), Hash32::from_hex(uri.substr(47, 64))};
}

}  // namespace medichain::qr
