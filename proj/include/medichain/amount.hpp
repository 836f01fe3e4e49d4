#pragma once

#include <string>
#include <string_view>

#include "medichain/bytes.hpp"

namespace medichain {

/// Currency amount in wei; 10^18 wei = 1 ether.
using Wei = unsigned __int128;

inline constexpr Wei kWeiPerEther = static_cast<Wei>(1'000'000'000'000'000'000ULL);

inline constexpr Wei ether(std::uint64_t whole) { return static_cast<Wei>(whole) * kWeiPerEther; }

inline std::string to_decimal(Wei v) {
  if (v == 0) return "0";
  std::string out;
  while (v != 0) {
    out.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  return {out.rbegin(), out.rend()};
}

inline Wei parse_wei(std::string_view text) {
  if (text.empty() || text.size() > 39) throw ParseError("invalid wei amount");
  if (text.size() > 1 && text[0] == '0') throw ParseError("wei amount has leading zero");
  Wei v = 0;
  for (char c : text) {
    if (c < '0' || c > '9') throw ParseError("invalid wei amount");
    Wei next = v * 10 + static_cast<Wei>(c - '0');
    if (next / 10 != v) throw ParseError("wei amount overflows 128 bits");
    v = next;
  }
  return v;
}

/// Parses a decimal ether amount such as "2", "0.5" or "1.000000000000000001".
inline Wei parse_ether(std::string_view text) {
  auto dot = text.find('.');
  std::string_view whole = text.substr(0, dot);
  std::string frac = dot == std::string_view::npos ? std::string{} : std::string(text.substr(dot + 1));
  if (whole.empty() && frac.empty()) throw ParseError("empty ether amount");
  if (frac.size() > 18) throw ParseError("ether amount has more than 18 decimals");
  frac.resize(18, '0');
  std::string digits = std::string(whole.empty() ? "0" : whole) + frac;
  auto first = digits.find_first_not_of('0');
  return first == std::string::npos ? 0 : parse_wei(std::string_view(digits).substr(first));
}

inline std::string format_ether(Wei v) {
  std::string whole = to_decimal(v / kWeiPerEther);
  std::string frac = to_decimal(v % kWeiPerEther);
  if (frac == "0") return whole;
  frac.insert(0, 18 - frac.size(), '0');
  frac.erase(frac.find_last_not_of('0') + 1);
  return whole + "." + frac;
}

}  // namespace medichain
