#pragma once

// RFC-4180 CSV output: CRLF line endings, header row, fields quoted when they
// contain a comma, quote or line break. Doubles use the shortest round-trip
// representation.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mfvi {

using CsvField = std::variant<std::string, double, std::int64_t, std::uint64_t>;

inline std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& os, std::vector<std::string> header)
      : os_(os), columns_(header.size()) {
    if (header.empty()) throw std::invalid_argument("CsvWriter: empty header");
    std::vector<CsvField> h(header.begin(), header.end());
    write(h);
  }

  void row(const std::vector<CsvField>& fields) {
    if (fields.size() != columns_) {
      throw std::invalid_argument("CsvWriter: row has " + std::to_string(fields.size()) +
                                  " fields, header has " + std::to_string(columns_));
    }
    write(fields);
  }

 private:
  void write(const std::vector<CsvField>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) os_ << ',';
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::string>) {
              os_ << csv_escape(v);
            } else if constexpr (std::is_same_v<T, double>) {
              os_ << format_double(v);
            } else {
              os_ << v;
            }
          },
          fields[i]);
    }
    os_ << "\r\n";
  }

  std::ostream& os_;
  std::size_t columns_;
};

/// Splits CSV text into records. Accepts CRLF or LF endings.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw std::invalid_argument("parse_csv: unterminated quote");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace mfvi
