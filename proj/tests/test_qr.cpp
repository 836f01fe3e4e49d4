#include <gtest/gtest.h>

#include <random>

#include "qr_decoder.hpp"
#include "support.hpp"

using namespace medichain;
using medichain::testing::decode_symbol;
using medichain::testing::decode_symbols;
using medichain::testing::oracle;

namespace {

std::string random_payload(std::mt19937_64& rng) {
  Address a;
  Hash32 h;
  for (auto& b : a.bytes) b = static_cast<std::uint8_t>(rng());
  for (auto& b : h.bytes) b = static_cast<std::uint8_t>(rng());
  return qr::make_payload(a, h).uri;
}

}  // namespace

TEST(QrCapacity, LevelLTable) {
  EXPECT_EQ(qr::byte_capacity(1), 17);
  EXPECT_EQ(qr::byte_capacity(5), 106);
  EXPECT_EQ(qr::byte_capacity(6), 134);
  EXPECT_EQ(qr::byte_capacity(10), 271);
  EXPECT_EQ(qr::total_codewords(6), 172);
  EXPECT_EQ(qr::data_codewords(6), 136);
  EXPECT_EQ(qr::symbol_size(6), 41);
  EXPECT_EQ(qr::smallest_version(111), 6);
  EXPECT_EQ(qr::smallest_version(106), 5);
  EXPECT_THROW(qr::smallest_version(272), qr::PayloadTooLong);
  EXPECT_THROW(qr::encode_with_mask(as_bytes(std::string(107, 'a')), 5, 0), qr::PayloadTooLong);
}

TEST(QrReedSolomon, CodewordIsDivisibleByGenerator) {
  std::vector<std::uint8_t> data{0x40, 0xd2, 0x75, 0x47, 0x76, 0x17, 0x32, 0x06, 0x27, 0x26, 0x96, 0xc6, 0xc6};
  auto ecc = qr::detail::rs_remainder(data, qr::detail::rs_generator(13));
  auto all = data;
  all.insert(all.end(), ecc.begin(), ecc.end());
  // The remainder of a full codeword by the same generator is zero.
  auto zero = qr::detail::rs_remainder(all, qr::detail::rs_generator(13));
  EXPECT_TRUE(std::all_of(zero.begin(), zero.end(), [](auto b) { return b == 0; }));
}

TEST(QrReedSolomon, KnownVersion1MVector) {
  // "HELLO WORLD" 1-M data codewords and their ECC from the standard's worked example.
  std::vector<std::uint8_t> data{32, 91, 11, 120, 209, 114, 220, 77, 67, 64, 236, 17, 236, 17, 236, 17};
  std::vector<std::uint8_t> want{196, 35, 39, 119, 235, 215, 231, 226, 93, 23};
  EXPECT_EQ(qr::detail::rs_remainder(data, qr::detail::rs_generator(10)), want);
}

TEST(QrEncode, MatchesReferenceEncoderForEveryMask) {
  const auto& o = oracle()["qr"];
  std::string text = o["text"];
  for (int mask = 0; mask < 8; ++mask) {
    auto s = qr::encode_with_mask(as_bytes(text), 6, mask);
    const auto& rows = o["matrices"][std::to_string(mask)];
    ASSERT_EQ(static_cast<int>(rows.size()), s.size);
    int mismatches = 0;
    for (int y = 0; y < s.size; ++y) {
      std::string row = rows[y];
      for (int x = 0; x < s.size; ++x) mismatches += (row[x] == '1') != s.at(x, y);
    }
    EXPECT_EQ(mismatches, 0) << "mask " << mask;
    EXPECT_EQ(qr::penalty_score(s), o["penalties"][std::to_string(mask)].get<long>()) << "mask " << mask;
  }
}

TEST(QrEncode, MaskChoiceMatchesReferenceEncoder) {
  for (const auto& c : oracle()["qr_auto_mask"]) {
    auto s = qr::encode(c["text"].get<std::string>());
    EXPECT_EQ(s.version, c["version"].get<int>());
    EXPECT_EQ(s.mask, c["mask"].get<int>());
  }
}

TEST(QrEncode, EhrPayloadIsVersion6) {
  auto uri = qr::make_payload(Address{}, Hash32{}).uri;
  EXPECT_EQ(uri.size(), 111u);
  auto s = qr::encode(uri);
  EXPECT_EQ(s.version, 6);
  EXPECT_EQ(s.size, 41);
  EXPECT_EQ(decode_symbol(s), uri);
}

TEST(QrEncode, SmallAndLargeVersionsDecode) {
  std::vector<std::string> texts;
  std::vector<qr::Symbol> symbols;
  for (std::size_t len : {1u, 17u, 40u, 150u, 271u}) {
    std::string text(len, 'x');
    for (std::size_t i = 0; i < len; ++i) text[i] = static_cast<char>('a' + i % 26);
    symbols.push_back(qr::encode(text));
    EXPECT_EQ(symbols.back().version, qr::smallest_version(len));
    texts.push_back(text);
  }
  EXPECT_EQ(decode_symbols(symbols), texts);
}

TEST(QrEncode, RandomPayloadsDecode) {
  std::mt19937_64 rng(11);
  std::vector<std::string> uris;
  std::vector<qr::Symbol> symbols;
  for (int i = 0; i < 10; ++i) {
    uris.push_back(random_payload(rng));
    symbols.push_back(qr::encode(uris.back()));
  }
  EXPECT_EQ(decode_symbols(symbols), uris);
}

TEST(QrEncode, SingleCodewordErasureStillDecodes) {
  std::mt19937_64 rng(5);
  auto uri = random_payload(rng);
  auto s = qr::encode(uri);
  auto codewords = qr::codeword_modules(6);
  ASSERT_EQ(codewords.size(), 172u);
  std::vector<qr::Symbol> damaged;
  for (int k : {0, 17, 90, 135, 171}) {
    auto d = s;
    for (auto [x, y] : codewords[k]) d.modules[static_cast<std::size_t>(y) * d.size + x] = !d.at(x, y);
    EXPECT_NE(d, s);
    damaged.push_back(d);
  }
  EXPECT_EQ(decode_symbols(damaged), std::vector<std::string>(damaged.size(), uri));
}

TEST(QrPayload, ParseRoundTrip) {
  Address a = derive_address(devnet::identity(0).public_key);
  Hash32 h = sha256(std::string_view{"r"});
  auto p = qr::make_payload(a, h);
  auto [a2, h2] = qr::parse_payload(p.uri);
  EXPECT_EQ(a2, a);
  EXPECT_EQ(h2, h);
  EXPECT_THROW(qr::parse_payload("ehr://x"), ParseError);
  EXPECT_THROW(qr::parse_payload("ehx" + p.uri.substr(3)), ParseError);
}

TEST(QrRender, AsciiAndPbm) {
  auto s = qr::encode(std::string_view{"hello"});
  auto ascii = qr::to_ascii(s, 2);
  EXPECT_EQ(std::count(ascii.begin(), ascii.end(), '\n'), s.size + 4);
  auto pbm = qr::to_pbm(s);
  EXPECT_EQ(pbm.rfind("P1\n29 29\n", 0), 0u);
}
