#pragma once

// Minimal comma-separated text helpers: no quoting, '.' decimal separator,
// shortest round-trip number formatting.

#include <charconv>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "bivwind/errors.hpp"

namespace bivwind::csv {

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string format(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format(long long v) { return std::to_string(v); }

/// Error prefix naming the source line.
inline std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line) + ": ";
}

inline double parse_double(std::string_view text, std::string_view field, std::string_view source,
                           std::size_t line) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || text.empty()) {
    throw InputError(where(source, line) + "field '" + std::string(field) + "': cannot parse '" +
                     std::string(text) + "' as a number");
  }
  return v;
}

inline long long parse_int(std::string_view text, std::string_view field, std::string_view source,
                           std::size_t line) {
  long long v = 0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || text.empty()) {
    throw InputError(where(source, line) + "field '" + std::string(field) + "': cannot parse '" +
                     std::string(text) + "' as an integer");
  }
  return v;
}

/// Line-oriented reader that checks the header and column count.
class Reader {
 public:
  Reader(std::istream& in, std::string source, std::string_view expected_header)
      : in_(in), source_(std::move(source)), columns_(split(expected_header).size()) {
    std::string header;
    if (!next_line(header)) throw InputError(source_ + ": missing header");
    if (header != expected_header) {
      throw InputError(source_ + ": unexpected header '" + header + "', expected '" + std::string(expected_header) +
                       "'");
    }
  }

  /// Reads the next non-empty row; returns false at end of input.
  bool next(std::vector<std::string_view>& fields) {
    while (next_line(buffer_)) {
      if (buffer_.empty()) continue;
      fields = split(buffer_);
      if (fields.size() != columns_) {
        throw InputError(where(source_, line_) + "expected " + std::to_string(columns_) + " fields, got " +
                         std::to_string(fields.size()));
      }
      return true;
    }
    return false;
  }

  std::size_t line() const noexcept { return line_; }
  const std::string& source() const noexcept { return source_; }

  double number(std::string_view text, std::string_view field) const {
    return parse_double(text, field, source_, line_);
  }
  long long integer(std::string_view text, std::string_view field) const {
    return parse_int(text, field, source_, line_);
  }
  [[noreturn]] void fail(const std::string& what) const { throw InputError(where(source_, line_) + what); }

 private:
  bool next_line(std::string& out) {
    if (!std::getline(in_, out)) return false;
    ++line_;
    if (!out.empty() && out.back() == '\r') out.pop_back();
    return true;
  }

  std::istream& in_;
  std::string source_;
  std::size_t columns_;
  std::size_t line_ = 0;
  std::string buffer_;
};

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace bivwind::csv
