#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace medichain {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Thrown on any malformed external input (hex, JSON fields, file lines).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string to_hex(ByteView data) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

namespace detail {
// Lowercase only: the canonical rendering must be the one accepted form.
inline int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}
}  // namespace detail

inline Bytes from_hex(std::string_view text) {
  if (text.size() % 2 != 0) throw ParseError("hex string has odd length");
  Bytes out(text.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = detail::hex_nibble(text[2 * i]);
    int lo = detail::hex_nibble(text[2 * i + 1]);
    if (hi < 0 || lo < 0) throw ParseError("invalid lowercase hex digit");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

/// Fixed-width octet string with lowercase-hex rendering. `Tag` keeps
/// hashes, addresses and keys from mixing even when widths coincide.
template <std::size_t N, typename Tag>
struct FixedBytes {
  static constexpr std::size_t size = N;
  std::array<std::uint8_t, N> bytes{};

  static FixedBytes from_span(ByteView data) {
    if (data.size() != N) throw ParseError("expected " + std::to_string(N) + " bytes, got " + std::to_string(data.size()));
    FixedBytes out;
    std::copy(data.begin(), data.end(), out.bytes.begin());
    return out;
  }
  static FixedBytes from_hex(std::string_view text) {
    if (text.size() != 2 * N) throw ParseError("expected " + std::to_string(2 * N) + " hex chars");
    return from_span(medichain::from_hex(text));
  }

  std::string hex() const { return to_hex(bytes); }
  ByteView view() const { return bytes; }
  bool is_zero() const {
    return std::all_of(bytes.begin(), bytes.end(), [](auto b) { return b == 0; });
  }

  auto operator<=>(const FixedBytes&) const = default;
};

struct HashTag {};
struct AddressTag {};
struct PublicKeyTag {};
struct SignatureTag {};
struct SecretKeyTag {};

using Hash32 = FixedBytes<32, HashTag>;
using Address = FixedBytes<20, AddressTag>;
using PublicKey = FixedBytes<32, PublicKeyTag>;
using Signature = FixedBytes<64, SignatureTag>;
using SecretKey = FixedBytes<32, SecretKeyTag>;

/// Big-endian append helpers for canonical encodings.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void u128(unsigned __int128 v) {
    for (int shift = 120; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void raw(ByteView data) { out_.insert(out_.end(), data.begin(), data.end()); }
  void text(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }

  const Bytes& bytes() const& { return out_; }
  Bytes bytes() && { return std::move(out_); }

 private:
  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(ByteView data) : data_(data) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (auto b : take(8)) v = (v << 8) | b;
    return v;
  }
  ByteView raw(std::size_t n) { return take(n); }
  bool done() const { return pos_ == data_.size(); }

 private:
  ByteView take(std::size_t n) {
    if (data_.size() - pos_ < n) throw ParseError("truncated input");
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  ByteView data_;
  std::size_t pos_ = 0;
};

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace medichain
