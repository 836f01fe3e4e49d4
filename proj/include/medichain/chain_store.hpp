#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>

#include "medichain/ledger.hpp"

namespace medichain {

struct CorruptChain : std::runtime_error {
  CorruptChain(std::uint64_t h, const std::string& why)
      : std::runtime_error("corrupt chain at height " + std::to_string(h) + ": " + why), height(h) {}
  std::uint64_t height;
};

namespace detail {

class FileDescriptor {
 public:
  FileDescriptor(const std::filesystem::path& path, int flags) : fd_(::open(path.c_str(), flags | O_CLOEXEC, 0644)) {
    if (fd_ < 0) throw std::system_error(errno, std::generic_category(), "open " + path.string());
  }
  ~FileDescriptor() {
    if (fd_ >= 0) ::close(fd_);
  }
  FileDescriptor(const FileDescriptor&) = delete;
  FileDescriptor& operator=(const FileDescriptor&) = delete;

  void write_all(std::string_view data) {
    while (!data.empty()) {
      auto n = ::write(fd_, data.data(), data.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        throw std::system_error(errno, std::generic_category(), "write");
      }
      data.remove_prefix(static_cast<std::size_t>(n));
    }
  }
  void sync() {
    if (::fsync(fd_) != 0) throw std::system_error(errno, std::generic_category(), "fsync");
  }

 private:
  int fd_;
};

inline void sync_directory(const std::filesystem::path& dir) {
  FileDescriptor d(dir, O_RDONLY | O_DIRECTORY);
  d.sync();
}

}  // namespace detail

/// chain.jsonl: one canonical JSON block per '\n'-terminated line,
/// appended and fsynced before the block is considered committed.
class ChainStore {
 public:
  explicit ChainStore(std::filesystem::path data_dir)
      : dir_(std::move(data_dir)), path_(dir_ / "chain.jsonl") {}

  const std::filesystem::path& path() const { return path_; }

  bool empty() const { return !std::filesystem::exists(path_) || std::filesystem::file_size(path_) == 0; }

  /// Parses every line. A final fragment without its newline is a torn
  /// append; it is dropped only when `recover_torn_tail` is set, otherwise
  /// it is reported like any other damage.
  Chain load(bool recover_torn_tail = false) const {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return {};
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();

    Chain chain;
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      std::uint64_t height = chain.size();
      if (nl == std::string::npos) {
        if (recover_torn_tail) {
          std::filesystem::resize_file(path_, pos);
          break;
        }
        throw CorruptChain(height, "unterminated final line");
      }
      try {
        chain.push_back(block_from_line(std::string_view(text).substr(pos, nl - pos)));
      } catch (const ParseError& e) {
        throw CorruptChain(height, e.what());
      }
      pos = nl + 1;
    }
    return chain;
  }

  void append(const Block& b) {
    std::filesystem::create_directories(dir_);
    detail::FileDescriptor fd(path_, O_WRONLY | O_CREAT | O_APPEND);
    fd.write_all(block_to_line(b) + "\n");
    fd.sync();
  }

  /// Atomically replaces the whole file (fork adoption).
  void rewrite(const Chain& chain) {
    std::filesystem::create_directories(dir_);
    auto tmp = path_;
    tmp += ".tmp";
    {
      detail::FileDescriptor fd(tmp, O_WRONLY | O_CREAT | O_TRUNC);
      std::string all;
      for (const auto& b : chain) all += block_to_line(b) + "\n";
      fd.write_all(all);
      fd.sync();
    }
    std::filesystem::rename(tmp, path_);
    detail::sync_directory(dir_);
  }

 private:
  std::filesystem::path dir_;
  std::filesystem::path path_;
};

}  // namespace medichain
