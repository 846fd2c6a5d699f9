#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cachecast {

// RFC 4180 quoting: quote only when needed, escape '"' by doubling.
inline std::string csv_quote(std::string_view field) {
  bool needs_quote = field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quote) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Incremental RFC 4180 record reader. Quoted fields may span physical lines;
// line() reports the physical line on which the current record started.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // Returns false at clean EOF. Throws std::runtime_error on malformed input.
  bool next_record(std::vector<std::string>& fields) {
    fields.clear();
    int c = in_.get();
    // Skip blank lines between records.
    while (c == '\n' || c == '\r') {
      if (c == '\n') ++physical_line_;
      c = in_.get();
    }
    if (c == std::istream::traits_type::eof()) return false;

    record_line_ = physical_line_;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    while (true) {
      if (c == std::istream::traits_type::eof()) {
        if (in_quotes) fail("unterminated quoted field");
        fields.push_back(std::move(field));
        return true;
      }
      char ch = static_cast<char>(c);
      if (in_quotes) {
        if (ch == '"') {
          int peek = in_.peek();
          if (peek == '"') {
            in_.get();
            field.push_back('"');
          } else {
            in_quotes = false;
          }
        } else {
          if (ch == '\n') ++physical_line_;
          field.push_back(ch);
        }
      } else if (ch == '"') {
        if (!field.empty() || field_was_quoted) fail("stray quote inside field");
        in_quotes = true;
        field_was_quoted = true;
      } else if (ch == ',') {
        fields.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
      } else if (ch == '\n' || ch == '\r') {
        if (ch == '\r' && in_.peek() == '\n') in_.get();
        ++physical_line_;
        fields.push_back(std::move(field));
        return true;
      } else {
        if (field_was_quoted) fail("data after closing quote");
        field.push_back(ch);
      }
      c = in_.get();
    }
  }

  std::size_t line() const { return record_line_; }

 private:
  [[noreturn]] void fail(const std::string& why) {
    throw std::runtime_error("csv line " + std::to_string(physical_line_) +
                             ": " + why);
  }

  std::istream& in_;
  std::size_t physical_line_ = 1;
  std::size_t record_line_ = 1;
};

}  // namespace cachecast
