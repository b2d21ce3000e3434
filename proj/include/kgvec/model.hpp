#pragma once

// Embedding model container and its two on-disk formats.
//
// Text (word2vec interchange):
//   <vocab_size> <dim>
//   <token> <v1> ... <vdim>
// Floats are written in shortest round-trip form.
//
// Binary (little-endian):
//   "KGVECBIN"  u32 version  u64 rows  u32 dim  u32 meta_len  meta JSON bytes
//   then per row: u32 token_len, token bytes, dim x f32

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "kgvec/error.hpp"
#include "kgvec/io.hpp"

namespace kgvec {

static_assert(std::endian::native == std::endian::little, "binary model format assumes little-endian host");

class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  explicit EmbeddingModel(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t row) const { return tokens_.at(row); }

  std::span<const float> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }

  std::optional<std::size_t> find(std::string_view token) const {
    if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
    return std::nullopt;
  }
  bool contains(std::string_view token) const { return find(token).has_value(); }

  /// Returns false (and leaves the model unchanged) if the token exists.
  bool add(std::string token, std::span<const float> vec) {
    if (vec.size() != dim_) throw Error("vector dimension " + std::to_string(vec.size()) + " != model dimension " + std::to_string(dim_));
    if (index_.contains(token)) return false;
    index_.emplace(token, tokens_.size());
    tokens_.push_back(std::move(token));
    data_.insert(data_.end(), vec.begin(), vec.end());
    return true;
  }

  const nlohmann::json& metadata() const { return metadata_; }
  void set_metadata(nlohmann::json m) { metadata_ = std::move(m); }

  void save_text(const std::string& path) const;
  void save_binary(const std::string& path) const;
  /// Binary when the path ends in ".bin", text otherwise.
  void save(const std::string& path) const {
    ends_with(path, ".bin") ? save_binary(path) : save_text(path);
  }

  static EmbeddingModel load_text(const std::string& path);
  static EmbeddingModel load_binary(const std::string& path);
  /// Detects the format from the file's leading magic bytes.
  static EmbeddingModel load(const std::string& path);

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> tokens_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
  nlohmann::json metadata_ = nlohmann::json::object();
};

inline constexpr char kModelMagic[8] = {'K', 'G', 'V', 'E', 'C', 'B', 'I', 'N'};
inline constexpr std::uint32_t kModelVersion = 1;

inline void append_float(std::string& out, float f) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, f);
  out.append(buf, res.ptr);
}

inline void EmbeddingModel::save_text(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << size() << ' ' << dim_ << '\n';
  std::string line;
  for (std::size_t r = 0; r < size(); ++r) {
    line = tokens_[r];
    for (float f : row(r)) {
      line.push_back(' ');
      append_float(line, f);
    }
    line.push_back('\n');
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
  if (!out.flush()) throw IoError("write failed: " + path);
}

namespace detail {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("truncated model file " + path);
  return v;
}

}  // namespace detail

inline void EmbeddingModel::save_binary(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  const std::string meta = metadata_.dump();
  out.write(kModelMagic, sizeof kModelMagic);
  detail::write_pod(out, kModelVersion);
  detail::write_pod(out, static_cast<std::uint64_t>(size()));
  detail::write_pod(out, static_cast<std::uint32_t>(dim_));
  detail::write_pod(out, static_cast<std::uint32_t>(meta.size()));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  for (std::size_t r = 0; r < size(); ++r) {
    detail::write_pod(out, static_cast<std::uint32_t>(tokens_[r].size()));
    out.write(tokens_[r].data(), static_cast<std::streamsize>(tokens_[r].size()));
    out.write(reinterpret_cast<const char*>(row(r).data()), static_cast<std::streamsize>(dim_ * sizeof(float)));
  }
  if (!out.flush()) throw IoError("write failed: " + path);
}

inline EmbeddingModel EmbeddingModel::load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[sizeof kModelMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kModelMagic, sizeof magic) != 0) {
    throw IoError("not a binary kgvec model: " + path);
  }
  const auto version = detail::read_pod<std::uint32_t>(in, path);
  if (version != kModelVersion) throw IoError("unsupported model version " + std::to_string(version));
  const auto rows = detail::read_pod<std::uint64_t>(in, path);
  const auto dim = detail::read_pod<std::uint32_t>(in, path);
  const auto meta_len = detail::read_pod<std::uint32_t>(in, path);
  std::string meta(meta_len, '\0');
  if (!in.read(meta.data(), meta_len)) throw IoError("truncated model file " + path);

  EmbeddingModel m(dim);
  m.set_metadata(meta.empty() ? nlohmann::json::object() : nlohmann::json::parse(meta));
  std::vector<float> vec(dim);
  for (std::uint64_t r = 0; r < rows; ++r) {
    const auto len = detail::read_pod<std::uint32_t>(in, path);
    std::string token(len, '\0');
    if (!in.read(token.data(), len) ||
        !in.read(reinterpret_cast<char*>(vec.data()), static_cast<std::streamsize>(dim * sizeof(float)))) {
      throw IoError("truncated model file " + path);
    }
    if (!m.add(std::move(token), vec)) throw IoError("duplicate token in row " + std::to_string(r) + " of " + path);
  }
  return m;
}

inline EmbeddingModel EmbeddingModel::load_text(const std::string& path) {
  LineReader reader(path);
  std::string line;
  if (!reader.next(line)) throw ParseError("empty model file", 1);
  std::size_t declared_rows = 0, dim = 0;
  {
    std::istringstream hs(line);
    std::string extra;
    if (!(hs >> declared_rows >> dim) || (hs >> extra) || dim == 0) {
      throw ParseError("bad model header, expected '<vocab_size> <dim>'", 1);
    }
  }
  EmbeddingModel m(dim);
  std::vector<float> vec;
  vec.reserve(dim);
  std::size_t line_no = 1;
  while (reader.next(line)) {
    ++line_no;
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    const char* tok_end = p;
    while (tok_end < end && *tok_end != ' ') ++tok_end;
    std::string token(p, tok_end);
    vec.clear();
    p = tok_end;
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      float f = 0;
      auto res = std::from_chars(p, end, f);
      if (res.ec != std::errc{}) throw ParseError("bad float in model", line_no);
      vec.push_back(f);
      p = res.ptr;
    }
    if (vec.size() != dim) {
      throw ParseError("dimension mismatch (" + std::to_string(vec.size()) + " values, expected " + std::to_string(dim) + ")",
                       line_no);
    }
    if (!m.add(token, vec)) throw ParseError("duplicate token '" + token + "'", line_no);
  }
  if (m.size() != declared_rows) {
    throw ParseError("row count " + std::to_string(m.size()) + " does not match header " + std::to_string(declared_rows),
                     line_no);
  }
  return m;
}

inline EmbeddingModel EmbeddingModel::load(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open " + path);
  char magic[sizeof kModelMagic] = {};
  probe.read(magic, sizeof magic);
  if (probe.gcount() == sizeof magic && std::memcmp(magic, kModelMagic, sizeof magic) == 0) return load_binary(path);
  return load_text(path);
}

}  // namespace kgvec
