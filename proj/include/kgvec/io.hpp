#pragma once

#include <zlib.h>

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <string_view>

#include "kgvec/error.hpp"

namespace kgvec {

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

/// Reads text line by line from a plain or gzip-compressed file. The codec is
/// picked by file extension (".gz" means gzip). Trailing '\n' and '\r' are
/// stripped from each line.
class LineReader {
 public:
  explicit LineReader(const std::string& path) {
    if (ends_with(path, ".gz")) {
      gz_ = gzopen(path.c_str(), "rb");
      if (gz_ == nullptr) throw IoError("cannot open " + path);
      gzbuffer(gz_, 1 << 16);
    } else {
      file_ = std::make_unique<std::ifstream>(path, std::ios::binary);
      if (!*file_) throw IoError("cannot open " + path);
    }
  }

  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  ~LineReader() {
    if (gz_ != nullptr) gzclose(gz_);
  }

  /// Returns false at end of input.
  bool next(std::string& line) {
    line.clear();
    if (file_) {
      if (!std::getline(*file_, line)) return false;
      strip(line);
      return true;
    }
    char buf[8192];
    bool got_any = false;
    while (gzgets(gz_, buf, sizeof buf) != nullptr) {
      got_any = true;
      line.append(buf);
      if (!line.empty() && line.back() == '\n') break;
    }
    int errnum = 0;
    const char* msg = gzerror(gz_, &errnum);
    if (errnum != Z_OK && errnum != Z_STREAM_END) throw IoError(std::string("gzip read error: ") + msg);
    if (!got_any) return false;
    strip(line);
    return true;
  }

 private:
  static void strip(std::string& line) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
  }

  std::unique_ptr<std::ifstream> file_;
  gzFile gz_ = nullptr;
};

/// 64-bit FNV-1a, used to fingerprint corpora in model metadata.
class Fnv1a {
 public:
  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      h_ ^= c;
      h_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace kgvec
