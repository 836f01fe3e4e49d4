#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "medichain/bytes.hpp"

namespace medichain::qr {

// QR Code Model 2 encoder restricted to byte mode, error-correction level L
// and versions 1..10.

struct PayloadTooLong : std::length_error {
  using std::length_error::length_error;
};

inline constexpr int kMinVersion = 1;
inline constexpr int kMaxVersion = 10;

namespace detail {

// Level L, indexed by version - 1.
inline constexpr std::array<int, 10> kEccPerBlock = {7, 10, 15, 20, 26, 18, 20, 24, 30, 18};
inline constexpr std::array<int, 10> kNumBlocks = {1, 1, 1, 1, 1, 2, 2, 2, 2, 4};

inline constexpr int kFormatBitsL = 1;

// ---- GF(2^8), primitive polynomial x^8 + x^4 + x^3 + x^2 + 1 ----

struct GaloisField {
  std::array<std::uint8_t, 512> exp{};
  std::array<int, 256> log{};

  constexpr GaloisField() {
    int x = 1;
    for (int i = 0; i < 255; ++i) {
      exp[i] = static_cast<std::uint8_t>(x);
      log[x] = i;
      x <<= 1;
      if (x & 0x100) x ^= 0x11D;
    }
    for (int i = 255; i < 512; ++i) exp[i] = exp[i - 255];
  }

  constexpr std::uint8_t mul(std::uint8_t a, std::uint8_t b) const {
    if (a == 0 || b == 0) return 0;
    return exp[log[a] + log[b]];
  }
};

inline constexpr GaloisField kGf{};

/// Coefficients of prod_{i<degree} (x - a^i), highest power first, with the
/// leading 1 dropped.
inline std::vector<std::uint8_t> rs_generator(int degree) {
  std::vector<std::uint8_t> poly(degree, 0);
  poly.back() = 1;
  std::uint8_t root = 1;
  for (int i = 0; i < degree; ++i) {
    for (int j = 0; j < degree; ++j) {
      poly[j] = kGf.mul(poly[j], root);
      if (j + 1 < degree) poly[j] ^= poly[j + 1];
    }
    root = kGf.mul(root, 0x02);
  }
  return poly;
}

inline std::vector<std::uint8_t> rs_remainder(const std::vector<std::uint8_t>& data,
                                              const std::vector<std::uint8_t>& generator) {
  std::vector<std::uint8_t> rem(generator.size(), 0);
  for (auto b : data) {
    std::uint8_t factor = b ^ rem.front();
    rem.erase(rem.begin());
    rem.push_back(0);
    for (std::size_t i = 0; i < rem.size(); ++i) rem[i] ^= kGf.mul(generator[i], factor);
  }
  return rem;
}

}  // namespace detail

inline int symbol_size(int version) { return 17 + 4 * version; }

/// Modules available for codewords (everything outside function patterns).
inline int raw_data_modules(int version) {
  int result = (16 * version + 128) * version + 64;
  if (version >= 2) {
    int align = version / 7 + 2;
    result -= (25 * align - 10) * align - 55;
    if (version >= 7) result -= 36;
  }
  return result;
}

inline int total_codewords(int version) { return raw_data_modules(version) / 8; }

inline int data_codewords(int version) {
  return total_codewords(version) - detail::kEccPerBlock[version - 1] * detail::kNumBlocks[version - 1];
}

inline int byte_count_bits(int version) { return version <= 9 ? 8 : 16; }

/// Largest byte-mode payload that fits `version` at level L.
inline int byte_capacity(int version) { return (data_codewords(version) * 8 - 4 - byte_count_bits(version)) / 8; }

inline std::vector<int> alignment_positions(int version) {
  if (version == 1) return {};
  int count = version / 7 + 2;
  int step = (version * 8 + count * 3 + 5) / (count * 4 - 4) * 2;
  std::vector<int> out(count);
  out[0] = 6;
  for (int i = count - 1, pos = symbol_size(version) - 7; i >= 1; --i, pos -= step) out[i] = pos;
  return out;
}

struct Symbol {
  int version = 1;
  int mask = 0;
  int size = 21;
  std::vector<bool> modules;  // row-major, true = dark

  bool at(int x, int y) const { return modules[static_cast<std::size_t>(y) * size + x]; }
  bool operator==(const Symbol&) const = default;
};

namespace detail {

class Builder {
 public:
  explicit Builder(int version)
      : version_(version), size_(symbol_size(version)), dark_(size_ * size_, false), function_(size_ * size_, false) {
    draw_function_patterns();
  }

  void set_function(int x, int y, bool dark) {
    dark_[idx(x, y)] = dark;
    function_[idx(x, y)] = true;
  }

  bool is_function(int x, int y) const { return function_[idx(x, y)]; }

  /// Zig-zag order of the non-function modules, two columns at a time from
  /// the bottom-right, skipping the vertical timing column.
  std::vector<std::pair<int, int>> data_path() const {
    std::vector<std::pair<int, int>> path;
    for (int right = size_ - 1; right >= 1; right -= 2) {
      if (right == 6) right = 5;
      for (int vert = 0; vert < size_; ++vert) {
        for (int j = 0; j < 2; ++j) {
          int x = right - j;
          bool upward = ((right + 1) & 2) == 0;
          int y = upward ? size_ - 1 - vert : vert;
          if (!is_function(x, y)) path.emplace_back(x, y);
        }
      }
    }
    return path;
  }

  void place_codewords(const std::vector<std::uint8_t>& codewords) {
    auto path = data_path();
    for (std::size_t i = 0; i < path.size(); ++i) {
      // Remainder bits beyond the last codeword stay light.
      bool bit = i < codewords.size() * 8 && ((codewords[i / 8] >> (7 - i % 8)) & 1) != 0;
      dark_[idx(path[i].first, path[i].second)] = bit;
    }
  }

  void apply_mask(int mask) {
    for (int y = 0; y < size_; ++y) {
      for (int x = 0; x < size_; ++x) {
        if (!is_function(x, y) && mask_bit(mask, x, y)) dark_[idx(x, y)] = !dark_[idx(x, y)];
      }
    }
  }

  void draw_format_bits(int mask) {
    int data = kFormatBitsL << 3 | mask;
    int rem = data;
    for (int i = 0; i < 10; ++i) rem = (rem << 1) ^ ((rem >> 9) * 0x537);
    int bits = (data << 10 | rem) ^ 0x5412;
    auto bit = [&](int i) { return ((bits >> i) & 1) != 0; };
    for (int i = 0; i <= 5; ++i) set_function(8, i, bit(i));
    set_function(8, 7, bit(6));
    set_function(8, 8, bit(7));
    set_function(7, 8, bit(8));
    for (int i = 9; i < 15; ++i) set_function(14 - i, 8, bit(i));
    for (int i = 0; i < 8; ++i) set_function(size_ - 1 - i, 8, bit(i));
    for (int i = 8; i < 15; ++i) set_function(8, size_ - 15 + i, bit(i));
    set_function(8, size_ - 8, true);
  }

  Symbol finish(int mask) const {
    Symbol s;
    s.version = version_;
    s.mask = mask;
    s.size = size_;
    s.modules = dark_;
    return s;
  }

  static bool mask_bit(int mask, int x, int y) {
    switch (mask) {
      case 0: return (x + y) % 2 == 0;
      case 1: return y % 2 == 0;
      case 2: return x % 3 == 0;
      case 3: return (x + y) % 3 == 0;
      case 4: return (x / 3 + y / 2) % 2 == 0;
      case 5: return x * y % 2 + x * y % 3 == 0;
      case 6: return (x * y % 2 + x * y % 3) % 2 == 0;
      case 7: return ((x + y) % 2 + x * y % 3) % 2 == 0;
      default: throw std::invalid_argument("mask must be 0..7");
    }
  }

 private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * size_ + x; }

  void draw_function_patterns() {
    for (int i = 0; i < size_; ++i) {
      set_function(6, i, i % 2 == 0);
      set_function(i, 6, i % 2 == 0);
    }
    draw_finder(3, 3);
    draw_finder(size_ - 4, 3);
    draw_finder(3, size_ - 4);

    auto align = alignment_positions(version_);
    for (std::size_t i = 0; i < align.size(); ++i) {
      for (std::size_t j = 0; j < align.size(); ++j) {
        bool corner = (i == 0 && j == 0) || (i == 0 && j + 1 == align.size()) || (i + 1 == align.size() && j == 0);
        if (!corner) draw_alignment(align[i], align[j]);
      }
    }
    draw_format_bits(0);  // reserves the area; redrawn once the mask is known
    draw_version();
  }

  void draw_finder(int cx, int cy) {
    for (int dy = -4; dy <= 4; ++dy) {
      for (int dx = -4; dx <= 4; ++dx) {
        int x = cx + dx, y = cy + dy;
        if (x < 0 || x >= size_ || y < 0 || y >= size_) continue;
        int dist = std::max(std::abs(dx), std::abs(dy));
        set_function(x, y, dist != 2 && dist != 4);
      }
    }
  }

  void draw_alignment(int cx, int cy) {
    for (int dy = -2; dy <= 2; ++dy) {
      for (int dx = -2; dx <= 2; ++dx) set_function(cx + dx, cy + dy, std::max(std::abs(dx), std::abs(dy)) != 1);
    }
  }

  void draw_version() {
    if (version_ < 7) return;
    int rem = version_;
    for (int i = 0; i < 12; ++i) rem = (rem << 1) ^ ((rem >> 11) * 0x1F25);
    long bits = static_cast<long>(version_) << 12 | rem;
    for (int i = 0; i < 18; ++i) {
      bool bit = ((bits >> i) & 1) != 0;
      int a = size_ - 11 + i % 3, b = i / 3;
      set_function(a, b, bit);
      set_function(b, a, bit);
    }
  }

  int version_;
  int size_;
  std::vector<bool> dark_;
  std::vector<bool> function_;
};

class BitBuffer {
 public:
  void append(std::uint32_t value, int bits) {
    for (int i = bits - 1; i >= 0; --i) bits_.push_back(((value >> i) & 1) != 0);
  }
  std::size_t size() const { return bits_.size(); }
  std::vector<std::uint8_t> bytes() const {
    std::vector<std::uint8_t> out(bits_.size() / 8, 0);
    for (std::size_t i = 0; i < out.size() * 8; ++i) {
      if (bits_[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80 >> (i % 8));
    }
    return out;
  }

 private:
  std::vector<bool> bits_;
};

inline std::vector<std::uint8_t> data_stream(ByteView payload, int version) {
  const std::size_t capacity_bits = static_cast<std::size_t>(data_codewords(version)) * 8;
  BitBuffer bb;
  bb.append(0b0100, 4);
  bb.append(static_cast<std::uint32_t>(payload.size()), byte_count_bits(version));
  for (auto b : payload) bb.append(b, 8);
  bb.append(0, static_cast<int>(std::min<std::size_t>(4, capacity_bits - bb.size())));
  bb.append(0, static_cast<int>((8 - bb.size() % 8) % 8));
  for (std::uint8_t pad = 0xEC; bb.size() < capacity_bits; pad ^= 0xEC ^ 0x11) bb.append(pad, 8);
  return bb.bytes();
}

/// Splits into blocks, appends RS parity, and interleaves.
inline std::vector<std::uint8_t> add_ecc_and_interleave(const std::vector<std::uint8_t>& data, int version) {
  const int num_blocks = kNumBlocks[version - 1];
  const int ecc_len = kEccPerBlock[version - 1];
  const int raw = total_codewords(version);
  const int num_short = num_blocks - raw % num_blocks;
  const int short_len = raw / num_blocks;
  auto generator = rs_generator(ecc_len);

  std::vector<std::vector<std::uint8_t>> blocks;
  std::size_t k = 0;
  for (int i = 0; i < num_blocks; ++i) {
    int data_len = short_len - ecc_len + (i < num_short ? 0 : 1);
    std::vector<std::uint8_t> block(data.begin() + k, data.begin() + k + data_len);
    k += data_len;
    auto ecc = rs_remainder(block, generator);
    if (i < num_short) block.push_back(0);  // placeholder keeps columns aligned
    block.insert(block.end(), ecc.begin(), ecc.end());
    blocks.push_back(std::move(block));
  }

  std::vector<std::uint8_t> out;
  for (std::size_t col = 0; col < blocks.front().size(); ++col) {
    for (int i = 0; i < num_blocks; ++i) {
      if (col == static_cast<std::size_t>(short_len - ecc_len) && i < num_short) continue;
      out.push_back(blocks[i][col]);
    }
  }
  return out;
}

}  // namespace detail

/// Sum of the four standard penalty rules; lower is better.
inline long penalty_score(const Symbol& s) {
  const int n = s.size;
  long score = 0;

  auto line_penalty = [&](auto get) {
    // Rule 1: runs of five or more same-coloured modules.
    for (int i = 0; i < n; ++i) {
      int run = 1;
      for (int j = 1; j <= n; ++j) {
        if (j < n && get(i, j) == get(i, j - 1)) {
          ++run;
          continue;
        }
        if (run >= 5) score += 3 + (run - 5);
        run = 1;
      }
      // Rule 3: each dark-light-dark(3)-light-dark run with four light
      // modules before or after it; the area outside the symbol is light.
      auto light = [&](int from, int to) {
        for (int j = std::max(from, 0); j < std::min(to, n); ++j) {
          if (get(i, j)) return false;
        }
        return true;
      };
      static constexpr std::array<bool, 7> finder = {true, false, true, true, true, false, true};
      for (int start = 0; start + 7 <= n; ++start) {
        bool match = true;
        for (int k = 0; k < 7 && match; ++k) match = get(i, start + k) == finder[k];
        if (match && (light(start - 4, start) || light(start + 7, start + 11))) score += 40;
      }
    }
  };
  line_penalty([&](int row, int col) { return s.at(col, row); });
  line_penalty([&](int col, int row) { return s.at(col, row); });

  // Rule 2: 2x2 blocks of one colour.
  for (int y = 0; y + 1 < n; ++y) {
    for (int x = 0; x + 1 < n; ++x) {
      bool c = s.at(x, y);
      if (c == s.at(x + 1, y) && c == s.at(x, y + 1) && c == s.at(x + 1, y + 1)) score += 3;
    }
  }

  // Rule 4: 10 points per 5% the dark ratio deviates from 50%.
  long dark = 0;
  for (bool m : s.modules) dark += m ? 1 : 0;
  long total = static_cast<long>(n) * n;
  long percent = dark * 100 / total;
  long lower = percent / 5 * 5;
  long deviation = std::min(std::labs(lower - 50), std::labs(lower + 5 - 50));
  score += deviation / 5 * 10;
  return score;
}

inline int smallest_version(std::size_t payload_bytes) {
  for (int v = kMinVersion; v <= kMaxVersion; ++v) {
    if (payload_bytes <= static_cast<std::size_t>(byte_capacity(v))) return v;
  }
  throw PayloadTooLong("payload of " + std::to_string(payload_bytes) + " bytes exceeds version 10-L capacity");
}

/// Encodes with a fixed mask; `encode` picks the mask by penalty.
inline Symbol encode_with_mask(ByteView payload, int version, int mask) {
  if (payload.size() > static_cast<std::size_t>(byte_capacity(version))) {
    throw PayloadTooLong("payload does not fit version " + std::to_string(version));
  }
  detail::Builder b(version);
  b.place_codewords(detail::add_ecc_and_interleave(detail::data_stream(payload, version), version));
  b.apply_mask(mask);
  b.draw_format_bits(mask);
  return b.finish(mask);
}

/// Byte mode, level L, smallest fitting version, lowest-penalty mask
/// (ties go to the lower mask index).
inline Symbol encode(ByteView payload) {
  int version = smallest_version(payload.size());
  Symbol best;
  long best_score = std::numeric_limits<long>::max();
  for (int mask = 0; mask < 8; ++mask) {
    auto candidate = encode_with_mask(payload, version, mask);
    long score = penalty_score(candidate);
    if (score < best_score) {
      best_score = score;
      best = std::move(candidate);
    }
  }
  return best;
}

inline Symbol encode(std::string_view text) { return encode(as_bytes(text)); }

/// Module coordinates of each codeword in transmission (interleaved) order.
inline std::vector<std::vector<std::pair<int, int>>> codeword_modules(int version) {
  detail::Builder b(version);
  auto path = b.data_path();
  std::vector<std::vector<std::pair<int, int>>> out(total_codewords(version));
  for (std::size_t i = 0; i < out.size() * 8; ++i) out[i / 8].push_back(path[i]);
  return out;
}

/// Dark modules as "##", light as two spaces, with a quiet zone.
inline std::string to_ascii(const Symbol& s, int border = 2) {
  std::string out;
  for (int y = -border; y < s.size + border; ++y) {
    for (int x = -border; x < s.size + border; ++x) {
      bool dark = x >= 0 && y >= 0 && x < s.size && y < s.size && s.at(x, y);
      out += dark ? "##" : "  ";
    }
    out += '\n';
  }
  return out;
}

/// Plain PBM (P1), one pixel per module, 4-module quiet zone.
inline std::string to_pbm(const Symbol& s, int border = 4) {
  int side = s.size + 2 * border;
  std::string out = "P1\n" + std::to_string(side) + " " + std::to_string(side) + "\n";
  for (int y = -border; y < s.size + border; ++y) {
    for (int x = -border; x < s.size + border; ++x) {
      bool dark = x >= 0 && y >= 0 && x < s.size && y < s.size && s.at(x, y);
      if (x > -border) out += ' ';
      out += dark ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

}  // namespace medichain::qr
