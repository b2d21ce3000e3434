#pragma once

// Streaming N-Triples reader and canonical writer.

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>

#include "kgvec/error.hpp"
#include "kgvec/io.hpp"

namespace kgvec::rdf {

struct Iri {
  std::string value;
  friend bool operator==(const Iri&, const Iri&) = default;
};

struct BlankNode {
  std::string label;  // without the "_:" prefix
  friend bool operator==(const BlankNode&, const BlankNode&) = default;
};

struct Literal {
  std::string lexical;
  std::optional<std::string> datatype;
  std::optional<std::string> language;
  friend bool operator==(const Literal&, const Literal&) = default;
};

using Subject = std::variant<Iri, BlankNode>;
using Object = std::variant<Iri, BlankNode, Literal>;

struct Triple {
  Subject subject;
  Iri predicate;
  Object object;
  friend bool operator==(const Triple&, const Triple&) = default;
};

inline bool is_literal(const Object& o) { return std::holds_alternative<Literal>(o); }

namespace detail {

inline void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

struct Malformed {
  std::string detail;
};

class LineScanner {
 public:
  explicit LineScanner(std::string_view s) : s_(s) {}

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return at_end() ? '\0' : s_[pos_]; }

  [[noreturn]] void fail(std::string detail) const {
    throw Malformed{std::move(detail) + " (column " + std::to_string(pos_ + 1) + ")"};
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::uint32_t read_uchar() {
    // Positioned just after the backslash, at 'u' or 'U'.
    const int width = s_[pos_] == 'u' ? 4 : 8;
    ++pos_;
    if (pos_ + width > s_.size()) fail("truncated unicode escape");
    std::uint32_t cp = 0;
    for (int i = 0; i < width; ++i) {
      const int h = hex_value(s_[pos_ + i]);
      if (h < 0) fail("bad hex digit in unicode escape");
      cp = cp * 16 + static_cast<std::uint32_t>(h);
    }
    if (cp > 0x10FFFF) fail("code point out of range");
    pos_ += width;
    return cp;
  }

  std::string read_iri() {
    expect('<');
    std::string out;
    while (true) {
      if (at_end()) fail("unterminated IRI");
      const char c = s_[pos_];
      if (c == '>') {
        ++pos_;
        break;
      }
      if (c == '\\') {
        ++pos_;
        if (peek() != 'u' && peek() != 'U') fail("invalid escape in IRI");
        const std::uint32_t cp = read_uchar();
        if (cp <= 0x20) fail("IRI contains whitespace or control character");
        append_utf8(out, cp);
        continue;
      }
      if (static_cast<unsigned char>(c) <= 0x20 || c == '<' || c == '"' || c == '{' || c == '}' ||
          c == '|' || c == '^' || c == '`') {
        fail("invalid character in IRI");
      }
      out.push_back(c);
      ++pos_;
    }
    if (!is_absolute(out)) fail("relative IRI <" + out + ">");
    return out;
  }

  std::string read_blank() {
    expect('_');
    expect(':');
    const std::size_t start = pos_;
    while (!at_end()) {
      const unsigned char c = static_cast<unsigned char>(s_[pos_]);
      if (std::isalnum(c) || c == '_' || c == '-' || c == '.' || c >= 0x80) {
        ++pos_;
      } else {
        break;
      }
    }
    // A trailing '.' belongs to the statement terminator.
    while (pos_ > start && s_[pos_ - 1] == '.') --pos_;
    if (pos_ == start) fail("empty blank node label");
    if (s_[start] == '-') fail("blank node label cannot start with '-'");
    return std::string(s_.substr(start, pos_ - start));
  }

  Literal read_literal() {
    expect('"');
    Literal lit;
    while (true) {
      if (at_end()) fail("unterminated literal");
      const char c = s_[pos_];
      if (c == '"') {
        ++pos_;
        break;
      }
      if (c == '\\') {
        ++pos_;
        if (at_end()) fail("dangling escape");
        const char e = s_[pos_];
        switch (e) {
          case 't': lit.lexical.push_back('\t'); ++pos_; break;
          case 'b': lit.lexical.push_back('\b'); ++pos_; break;
          case 'n': lit.lexical.push_back('\n'); ++pos_; break;
          case 'r': lit.lexical.push_back('\r'); ++pos_; break;
          case 'f': lit.lexical.push_back('\f'); ++pos_; break;
          case '"': lit.lexical.push_back('"'); ++pos_; break;
          case '\'': lit.lexical.push_back('\''); ++pos_; break;
          case '\\': lit.lexical.push_back('\\'); ++pos_; break;
          case 'u':
          case 'U': append_utf8(lit.lexical, read_uchar()); break;
          default: fail("invalid escape in literal");
        }
        continue;
      }
      lit.lexical.push_back(c);
      ++pos_;
    }
    if (peek() == '^') {
      expect('^');
      expect('^');
      lit.datatype = read_iri();
    } else if (peek() == '@') {
      ++pos_;
      const std::size_t start = pos_;
      while (!at_end() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (pos_ == start) fail("empty language tag");
      while (peek() == '-') {
        ++pos_;
        const std::size_t sub = pos_;
        while (!at_end() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (pos_ == sub) fail("empty language subtag");
      }
      lit.language = std::string(s_.substr(start, pos_ - start));
    }
    return lit;
  }

  static bool is_absolute(std::string_view iri) {
    if (iri.empty() || !std::isalpha(static_cast<unsigned char>(iri[0]))) return false;
    for (std::size_t i = 1; i < iri.size(); ++i) {
      const unsigned char c = static_cast<unsigned char>(iri[i]);
      if (c == ':') return true;
      if (!(std::isalnum(c) || c == '+' || c == '-' || c == '.')) return false;
    }
    return false;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses a single line. Returns nullopt for blank and comment-only lines.
/// Throws ParseError("malformed statement", line_no) on grammar violations.
inline std::optional<Triple> parse_line(std::string_view line, std::size_t line_no) {
  detail::LineScanner sc(line);
  sc.skip_ws();
  if (sc.at_end() || sc.peek() == '#') return std::nullopt;
  try {
    Triple t;
    if (sc.peek() == '<') {
      t.subject = Iri{sc.read_iri()};
    } else if (sc.peek() == '_') {
      t.subject = BlankNode{sc.read_blank()};
    } else {
      sc.fail("subject must be an IRI or blank node");
    }
    sc.skip_ws();
    if (sc.peek() != '<') sc.fail("predicate must be an IRI");
    t.predicate = Iri{sc.read_iri()};
    sc.skip_ws();
    switch (sc.peek()) {
      case '<': t.object = Iri{sc.read_iri()}; break;
      case '_': t.object = BlankNode{sc.read_blank()}; break;
      case '"': t.object = sc.read_literal(); break;
      default: sc.fail("missing object");
    }
    sc.skip_ws();
    if (sc.peek() != '.') sc.fail("missing terminating '.'");
    sc.expect('.');
    sc.skip_ws();
    if (!sc.at_end() && sc.peek() != '#') sc.fail("trailing content after '.'");
    return t;
  } catch (const detail::Malformed& m) {
    throw ParseError("malformed statement", line_no, m.detail);
  }
}

struct ParseStats {
  std::size_t lines = 0;
  std::size_t statements = 0;
  std::size_t skipped = 0;  // malformed lines ignored in lenient mode
};

enum class Strictness { kLenient, kStrict };

/// Feeds every statement of `in` to `sink(const Triple&)` in input order.
template <typename Sink>
ParseStats parse_ntriples(std::istream& in, Strictness strictness, Sink&& sink) {
  ParseStats stats;
  std::string line;
  while (std::getline(in, line)) {
    ++stats.lines;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    try {
      if (auto t = parse_line(line, stats.lines)) {
        ++stats.statements;
        sink(*t);
      }
    } catch (const ParseError&) {
      if (strictness == Strictness::kStrict) throw;
      ++stats.skipped;
    }
  }
  return stats;
}

/// File variant; ".gz" files are decompressed on the fly.
template <typename Sink>
ParseStats parse_ntriples_file(const std::string& path, Strictness strictness, Sink&& sink) {
  ParseStats stats;
  LineReader reader(path);
  std::string line;
  while (reader.next(line)) {
    ++stats.lines;
    try {
      if (auto t = parse_line(line, stats.lines)) {
        ++stats.statements;
        sink(*t);
      }
    } catch (const ParseError&) {
      if (strictness == Strictness::kStrict) throw;
      ++stats.skipped;
    }
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Canonical serialization

inline std::string escape_iri(std::string_view iri) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(iri.size());
  for (char c : iri) {
    const unsigned char u = static_cast<unsigned char>(c);
    if (u <= 0x20 || c == '<' || c == '>' || c == '"' || c == '{' || c == '}' || c == '|' ||
        c == '^' || c == '`' || c == '\\') {
      out += "\\u00";
      out.push_back(kHex[u >> 4]);
      out.push_back(kHex[u & 0xF]);
    } else {
      out.push_back(c);
    }
  }
  return out;
}

inline std::string escape_literal(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string to_ntriples(const Triple& t) {
  std::string out;
  auto term = [&out](const auto& v) {
    using T = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<T, Iri>) {
      out += '<' + escape_iri(v.value) + '>';
    } else if constexpr (std::is_same_v<T, BlankNode>) {
      out += "_:" + v.label;
    } else {
      out += '"' + escape_literal(v.lexical) + '"';
      if (v.language) {
        out += '@' + *v.language;
      } else if (v.datatype) {
        out += "^^<" + escape_iri(*v.datatype) + '>';
      }
    }
  };
  std::visit(term, t.subject);
  out += ' ';
  term(t.predicate);
  out += ' ';
  std::visit(term, t.object);
  out += " .";
  return out;
}

}  // namespace kgvec::rdf
