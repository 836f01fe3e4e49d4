#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medichain/qr.hpp"
#include "support.hpp"

namespace medichain::testing {

/// Decodes symbols with an independent reader (tests/oracles/qr_decode.py).
/// One interpreter start per batch; failures come back as empty strings.
inline std::vector<std::string> decode_symbols(const std::vector<qr::Symbol>& symbols) {
  TempDir dir;
  std::string cmd = MEDICHAIN_PYTHON " " MEDICHAIN_ORACLES "/qr_decode.py";
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    auto path = dir / ("s" + std::to_string(i) + ".pbm");
    std::ofstream(path) << qr::to_pbm(symbols[i]);
    cmd += " " + path.string();
  }
  std::FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("cannot start QR decoder");
  std::string out;
  char buf[4096];
  while (auto n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  if (::pclose(pipe) != 0) throw std::runtime_error("QR decoder failed");

  std::vector<std::string> texts;
  std::size_t start = 0;
  while (start < out.size()) {
    auto nl = out.find('\n', start);
    texts.push_back(nlohmann::json::parse(out.substr(start, nl - start)).get<std::string>());
    start = nl + 1;
  }
  if (texts.size() != symbols.size()) throw std::runtime_error("QR decoder output truncated");
  return texts;
}

inline std::string decode_symbol(const qr::Symbol& s) { return decode_symbols({s}).front(); }

}  // namespace medichain::testing
