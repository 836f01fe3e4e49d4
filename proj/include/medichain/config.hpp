#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "medichain/bytes.hpp"
#include "medichain/chap.hpp"
#include "medichain/devnet.hpp"
#include "medichain/ledger.hpp"

namespace medichain {

struct NodeConfig {
  std::uint16_t listen_port = 7545;
  std::filesystem::path data_dir = "medichain-data";
  int difficulty_bits = devnet::kDefaultDifficulty;
  std::vector<std::string> peers;
  bool dev_mode = false;
  std::optional<int> automine_interval;  // seconds
  std::int64_t challenge_lifetime = kDefaultChallengeLifetime;
  std::int64_t session_lifetime = 3600;
  bool recover_torn_tail = false;

  void validate() const {
    if (difficulty_bits < 0 || difficulty_bits > kMaxDifficultyBits) {
      throw std::invalid_argument("difficulty_bits must be between 0 and 32");
    }
    if (automine_interval && *automine_interval <= 0) throw std::invalid_argument("automine_interval must be positive");
    if (challenge_lifetime <= 0 || session_lifetime <= 0) throw std::invalid_argument("lifetimes must be positive");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

inline std::string toml_string(const std::string& v, const std::string& key) {
  if (v.size() < 2 || v.front() != '"' || v.back() != '"') throw ParseError("node.toml: " + key + " must be a string");
  return v.substr(1, v.size() - 2);
}

inline std::int64_t toml_int(const std::string& v, const std::string& key) {
  std::size_t used = 0;
  std::int64_t out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ParseError("node.toml: " + key + " must be an integer");
  return out;
}

inline bool toml_bool(const std::string& v, const std::string& key) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ParseError("node.toml: " + key + " must be true or false");
}

inline std::vector<std::string> toml_string_array(const std::string& v, const std::string& key) {
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') throw ParseError("node.toml: " + key + " must be an array");
  std::vector<std::string> out;
  std::stringstream items(v.substr(1, v.size() - 2));
  std::string item;
  while (std::getline(items, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(toml_string(item, key));
  }
  return out;
}

}  // namespace detail

/// Reads the flat subset of TOML that node.toml uses: `key = value` pairs
/// with strings, integers, booleans and single-line string arrays.
inline NodeConfig parse_node_toml(std::istream& in, NodeConfig cfg = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto text = detail::trim(detail::strip_comment(line));
    if (text.empty()) continue;
    if (text.front() == '[') throw ParseError("node.toml line " + std::to_string(lineno) + ": tables are not supported");
    auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError("node.toml line " + std::to_string(lineno) + ": expected key = value");
    auto key = detail::trim(text.substr(0, eq));
    auto value = detail::trim(text.substr(eq + 1));
    if (key == "listen_port") {
      auto port = detail::toml_int(value, key);
      if (port <= 0 || port > 65535) throw ParseError("node.toml: listen_port out of range");
      cfg.listen_port = static_cast<std::uint16_t>(port);
    } else if (key == "data_dir") {
      cfg.data_dir = detail::toml_string(value, key);
    } else if (key == "difficulty_bits") {
      cfg.difficulty_bits = static_cast<int>(detail::toml_int(value, key));
    } else if (key == "peers") {
      cfg.peers = detail::toml_string_array(value, key);
    } else if (key == "dev_mode") {
      cfg.dev_mode = detail::toml_bool(value, key);
    } else if (key == "automine_interval") {
      cfg.automine_interval = static_cast<int>(detail::toml_int(value, key));
    } else if (key == "challenge_lifetime") {
      cfg.challenge_lifetime = detail::toml_int(value, key);
    } else if (key == "session_lifetime") {
      cfg.session_lifetime = detail::toml_int(value, key);
    } else {
      throw ParseError("node.toml: unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

inline NodeConfig load_node_toml(const std::filesystem::path& path, NodeConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_node_toml(in, std::move(cfg));
}

}  // namespace medichain
