#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "embprobe/error.hpp"

namespace embprobe {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// A vocabulary paired with one dense vector per token.
///
/// Tokens are unique, V >= 1, D >= 1 and every entry is finite. The object is
/// immutable once constructed, so it can be shared freely between readers.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix(std::vector<std::string> tokens, RowMatrix vectors,
                  std::string source_tag = {})
      : tokens_(std::move(tokens)),
        vectors_(std::move(vectors)),
        source_tag_(std::move(source_tag)) {
    if (tokens_.empty()) throw Error("embedding matrix needs at least one token");
    if (vectors_.cols() < 1) throw Error("embedding dimension must be at least 1");
    if (static_cast<std::size_t>(vectors_.rows()) != tokens_.size()) {
      throw Error("embedding matrix has " + std::to_string(tokens_.size()) +
                  " tokens but " + std::to_string(vectors_.rows()) + " rows");
    }
    if (!vectors_.allFinite()) throw Error("embedding matrix contains non-finite values");
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (tokens_[i].empty()) throw Error("empty token at row " + std::to_string(i));
      if (!index_.emplace(tokens_[i], i).second) {
        throw Error("duplicate token '" + tokens_[i] + "'");
      }
    }
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors_.cols()); }

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const RowMatrix& vectors() const noexcept { return vectors_; }
  const std::string& source_tag() const noexcept { return source_tag_; }

  std::optional<std::size_t> find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(std::string_view token) const { return find(token).has_value(); }

  Eigen::Ref<const Vector> row(std::size_t i) const { return vectors_.row(i).transpose(); }

  Vector row(std::string_view token) const {
    auto i = find(token);
    if (!i) throw Error("token '" + std::string(token) + "' not in vocabulary");
    return vectors_.row(*i).transpose();
  }

  /// New matrix made of the given rows, in the given order.
  EmbeddingMatrix select(std::span<const std::size_t> rows, std::string tag = {}) const {
    std::vector<std::string> toks;
    toks.reserve(rows.size());
    RowMatrix out(static_cast<Eigen::Index>(rows.size()), vectors_.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      toks.push_back(tokens_.at(rows[r]));
      out.row(static_cast<Eigen::Index>(r)) = vectors_.row(static_cast<Eigen::Index>(rows[r]));
    }
    return EmbeddingMatrix(std::move(toks), std::move(out),
                           tag.empty() ? source_tag_ : std::move(tag));
  }

 private:
  std::vector<std::string> tokens_;
  RowMatrix vectors_;
  std::string source_tag_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class VectorFormat { Auto, Text, Binary };

inline VectorFormat parse_format(std::string_view s) {
  if (s == "auto") return VectorFormat::Auto;
  if (s == "text") return VectorFormat::Text;
  if (s == "binary") return VectorFormat::Binary;
  throw Error("unknown vector format '" + std::string(s) + "' (expected text|binary|auto)");
}

/// `.bin` means binary, anything else (`.txt`, `.vec`, ...) is text.
inline VectorFormat sniff_format(const std::filesystem::path& path) {
  return path.extension() == ".bin" ? VectorFormat::Binary : VectorFormat::Text;
}

namespace detail {

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    if (pos >= line.size()) break;
    auto end = line.find(' ', pos);
    if (end == std::string_view::npos) end = line.size();
    fields.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline std::pair<std::size_t, std::size_t> parse_header(std::string_view line,
                                                        const std::string& source) {
  auto fields = split_spaces(line);
  std::size_t v = 0;
  std::size_t d = 0;
  if (fields.size() != 2 || !parse_number(fields[0], v) || !parse_number(fields[1], d)) {
    throw ParseError(source, 1, "malformed header, expected \"V D\"");
  }
  if (d == 0) throw ParseError(source, 1, "dimension must be at least 1");
  return {v, d};
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::out : std::ios::out);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

inline void check_writable_tokens(const EmbeddingMatrix& m) {
  for (const auto& t : m.tokens()) {
    if (t.find_first_of(" \t\n\r") != std::string::npos) {
      throw Error("token '" + t + "' contains whitespace and cannot be written");
    }
  }
}

}  // namespace detail

/// Reads the whitespace-delimited text format: a "V D" header followed by V
/// lines of "token v1 ... vD".
inline EmbeddingMatrix load_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  const std::string source = path.string();

  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
  detail::strip_cr(line);
  const auto [v, d] = detail::parse_header(line, source);

  std::vector<std::string> tokens;
  std::unordered_set<std::string> seen;
  std::vector<double> values;
  tokens.reserve(v);
  values.reserve(v * d);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    auto fields = detail::split_spaces(line);
    if (fields.empty()) continue;
    if (tokens.size() == v) {
      throw ParseError(source, lineno, "expected " + std::to_string(v) + " rows, found more");
    }
    if (fields.size() != d + 1) {
      throw ParseError(source, lineno,
                       "expected " + std::to_string(d) + " values, found " +
                           std::to_string(fields.size() - 1));
    }
    std::string token(fields[0]);
    if (!seen.insert(token).second) {
      throw ParseError(source, lineno, "duplicate token '" + token + "'");
    }
    for (std::size_t j = 1; j <= d; ++j) {
      double x = 0.0;
      if (!detail::parse_number(fields[j], x)) {
        throw ParseError(source, lineno, "non-numeric value '" + std::string(fields[j]) + "'");
      }
      if (!std::isfinite(x)) {
        throw ParseError(source, lineno, "non-finite value '" + std::string(fields[j]) + "'");
      }
      values.push_back(x);
    }
    tokens.push_back(std::move(token));
  }
  if (tokens.size() != v) {
    throw ParseError(source, lineno,
                     "expected " + std::to_string(v) + " rows, found " +
                         std::to_string(tokens.size()));
  }
  if (v == 0) throw ParseError(source, 1, "vocabulary is empty");
  RowMatrix mat = Eigen::Map<RowMatrix>(values.data(), static_cast<Eigen::Index>(v),
                                        static_cast<Eigen::Index>(d));
  return EmbeddingMatrix(std::move(tokens), std::move(mat), source);
}

/// Reads the classic binary layout: text header "V D\n", then per token the
/// token bytes terminated by a space and D little-endian float32 values,
/// optionally followed by a newline.
inline EmbeddingMatrix load_binary(const std::filesystem::path& path) {
  constexpr std::size_t kMaxTokenBytes = 10000;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  const std::string source = path.string();

  std::string header;
  if (!std::getline(in, header) || header.empty()) {
    throw ParseError(source, 1, "missing header");
  }
  detail::strip_cr(header);
  const auto [v, d] = detail::parse_header(header, source);
  if (v == 0) throw ParseError(source, 1, "vocabulary is empty");

  std::vector<std::string> tokens;
  std::unordered_set<std::string> seen;
  RowMatrix mat(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(d));
  std::vector<unsigned char> buf(4 * d);
  for (std::size_t r = 0; r < v; ++r) {
    const std::size_t record = r + 1;
    std::string token;
    int c;
    while ((c = in.get()) == '\n') {
    }
    while (c != EOF && c != ' ') {
      token.push_back(static_cast<char>(c));
      if (token.size() > kMaxTokenBytes) {
        throw ParseError(source, record, "token longer than 10000 bytes, file is corrupt");
      }
      c = in.get();
    }
    if (c == EOF) {
      throw ParseError(source, record,
                       "truncated payload: expected " + std::to_string(v) + " records, found " +
                           std::to_string(r));
    }
    if (token.empty()) throw ParseError(source, record, "empty token");
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      throw ParseError(source, record, "truncated payload in vector of '" + token + "'");
    }
    for (std::size_t j = 0; j < d; ++j) {
      const std::uint32_t bits = static_cast<std::uint32_t>(buf[4 * j]) |
                                 (static_cast<std::uint32_t>(buf[4 * j + 1]) << 8) |
                                 (static_cast<std::uint32_t>(buf[4 * j + 2]) << 16) |
                                 (static_cast<std::uint32_t>(buf[4 * j + 3]) << 24);
      const float x = std::bit_cast<float>(bits);
      if (!std::isfinite(x)) {
        throw ParseError(source, record, "non-finite value in vector of '" + token + "'");
      }
      mat(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = x;
    }
    if (!seen.insert(token).second) {
      throw ParseError(source, record, "duplicate token '" + token + "'");
    }
    tokens.push_back(std::move(token));
  }
  return EmbeddingMatrix(std::move(tokens), std::move(mat), source);
}

/// Values are written with `precision + 1` significant digits, so the relative
/// error after reloading is below 10^-precision; 17 reproduces doubles exactly.
inline void write_text(const EmbeddingMatrix& m, const std::filesystem::path& path,
                       int precision = 6) {
  if (precision < 1 || precision > 17) throw Error("precision must be in [1, 17]");
  detail::check_writable_tokens(m);
  auto out = detail::open_out(path, false);
  out << m.size() << ' ' << m.dim() << '\n';
  char buf[64];
  const auto& vec = m.vectors();
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << m.tokens()[i];
    for (std::size_t j = 0; j < m.dim(); ++j) {
      auto res = std::to_chars(buf, buf + sizeof buf,
                               vec(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                               std::chars_format::general, precision + 1);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
  if (!out) throw Error("I/O failure writing '" + path.string() + "'");
}

inline void write_binary(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  detail::check_writable_tokens(m);
  auto out = detail::open_out(path, true);
  out << m.size() << ' ' << m.dim() << '\n';
  const auto& vec = m.vectors();
  std::vector<unsigned char> buf(4 * m.dim());
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << m.tokens()[i] << ' ';
    for (std::size_t j = 0; j < m.dim(); ++j) {
      const auto x = static_cast<float>(
          vec(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      if (!std::isfinite(x)) throw Error("value overflows float32 for token '" + m.tokens()[i] + "'");
      const auto bits = std::bit_cast<std::uint32_t>(x);
      for (int b = 0; b < 4; ++b) buf[4 * j + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    out << '\n';
  }
  if (!out) throw Error("I/O failure writing '" + path.string() + "'");
}

inline EmbeddingMatrix load_embeddings(const std::filesystem::path& path,
                                       VectorFormat format = VectorFormat::Auto) {
  if (format == VectorFormat::Auto) format = sniff_format(path);
  return format == VectorFormat::Binary ? load_binary(path) : load_text(path);
}

inline void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path,
                             VectorFormat format = VectorFormat::Auto, int precision = 6) {
  if (format == VectorFormat::Auto) format = sniff_format(path);
  if (format == VectorFormat::Binary) {
    write_binary(m, path);
  } else {
    write_text(m, path, precision);
  }
}

/// Rows of `m` whose token is in `keep`, in the original order.
template <typename Set>
  requires requires(const Set& s, const std::string& t) { s.contains(t); }
EmbeddingMatrix intersect(const EmbeddingMatrix& m, const Set& keep) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (keep.contains(m.tokens()[i])) rows.push_back(i);
  }
  if (rows.empty()) throw Error("vocabulary intersection is empty");
  return m.select(rows);
}

inline EmbeddingMatrix intersect(const EmbeddingMatrix& m, std::span<const std::string> keep) {
  return intersect(m, std::unordered_set<std::string>(keep.begin(), keep.end()));
}

}  // namespace embprobe
