#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cachecast/csv.hpp"
#include "cachecast/time.hpp"

namespace cachecast {

enum class Outcome { Hit, Miss, Unknown };

inline const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Hit: return "hit";
    case Outcome::Miss: return "miss";
    default: return "unknown";
  }
}

inline std::optional<Outcome> outcome_from_name(std::string_view s) {
  if (s == "hit") return Outcome::Hit;
  if (s == "miss") return Outcome::Miss;
  if (s == "unknown") return Outcome::Unknown;
  return std::nullopt;
}

// One file request. transfer_seconds and node_id are present exactly when the
// outcome is known (Hit or Miss); generator output carries Unknown.
struct AccessRecord {
  TimeMs ts = 0;
  std::string file_id;
  std::string file_class;
  std::uint64_t size_bytes = 0;
  Outcome outcome = Outcome::Unknown;
  std::optional<double> transfer_seconds;
  std::optional<std::string> node_id;

  bool operator==(const AccessRecord&) const = default;
};

struct TraceMeta {
  std::string source;
  int schema_version = 1;

  bool operator==(const TraceMeta&) const = default;
};

struct Trace {
  std::vector<AccessRecord> records;
  TraceMeta meta;

  bool operator==(const Trace&) const = default;
};

enum class TraceFormat { JsonLines, Csv };

struct ParseError : std::runtime_error {
  enum class Kind { MalformedLine, NonMonotonicTimestamp, InvariantViolation };

  ParseError(Kind k, std::size_t line_no, std::string field_name,
             const std::string& message)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + message),
        kind(k),
        line(line_no),
        field(std::move(field_name)) {}

  Kind kind;
  std::size_t line;
  std::string field;
};

struct Violation {
  std::size_t record_index;
  std::string field;
  std::string rule;
};

namespace detail {

// Shortest round-trip decimal form; the one canonical float representation.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_u64(std::uint64_t v) {
  char buf[24];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::uint64_t> parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline void append_json_string(std::string& out, std::string_view s) {
  out.push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          static constexpr char kHex[] = "0123456789abcdef";
          out += "\\u00";
          out.push_back(kHex[(c >> 4) & 0xf]);
          out.push_back(kHex[c & 0xf]);
        } else {
          out.push_back(c);
        }
    }
  }
  out.push_back('"');
}

// Checks a single record's field invariants; returns the offending field and
// rule, independent of where the record came from.
inline std::optional<Violation> check_record(const AccessRecord& r,
                                             std::size_t index) {
  if (r.file_id.empty())
    return Violation{index, "file_id", "file_id must be non-empty"};
  if (r.size_bytes < 1)
    return Violation{index, "size_bytes", "size_bytes must be >= 1"};
  const bool unknown = r.outcome == Outcome::Unknown;
  if (unknown && r.transfer_seconds.has_value())
    return Violation{index, "transfer_seconds",
                     "transfer_seconds must be absent when outcome is unknown"};
  if (unknown && r.node_id.has_value())
    return Violation{index, "node_id",
                     "node_id must be absent when outcome is unknown"};
  if (!unknown && !r.transfer_seconds.has_value())
    return Violation{index, "transfer_seconds",
                     "transfer_seconds required when outcome is known"};
  if (!unknown && !r.node_id.has_value())
    return Violation{index, "node_id", "node_id required when outcome is known"};
  if (r.transfer_seconds.has_value() && !(*r.transfer_seconds > 0.0))
    return Violation{index, "transfer_seconds", "transfer_seconds must be > 0"};
  if (r.node_id.has_value() && r.node_id->empty())
    return Violation{index, "node_id", "node_id must be non-empty when present"};
  return std::nullopt;
}

}  // namespace detail

// Canonical JSONL form, fixed field order, optionals omitted when unknown.
inline std::string record_to_jsonl(const AccessRecord& r) {
  std::string out;
  out.reserve(128);
  out += "{\"ts\":\"";
  out += format_rfc3339(r.ts);
  out += "\",\"file_id\":";
  detail::append_json_string(out, r.file_id);
  out += ",\"file_class\":";
  detail::append_json_string(out, r.file_class);
  out += ",\"size_bytes\":";
  out += detail::format_u64(r.size_bytes);
  out += ",\"outcome\":\"";
  out += outcome_name(r.outcome);
  out += "\"";
  if (r.transfer_seconds) {
    out += ",\"transfer_seconds\":";
    out += detail::format_double(*r.transfer_seconds);
  }
  if (r.node_id) {
    out += ",\"node_id\":";
    detail::append_json_string(out, *r.node_id);
  }
  out += "}";
  return out;
}

inline std::string record_to_csv(const AccessRecord& r) {
  std::string out;
  out.reserve(128);
  out += format_rfc3339(r.ts);
  out += ',';
  out += csv_quote(r.file_id);
  out += ',';
  out += csv_quote(r.file_class);
  out += ',';
  out += detail::format_u64(r.size_bytes);
  out += ',';
  out += outcome_name(r.outcome);
  out += ',';
  if (r.transfer_seconds) out += detail::format_double(*r.transfer_seconds);
  out += ',';
  if (r.node_id) out += csv_quote(*r.node_id);
  return out;
}

inline constexpr std::string_view kTraceCsvHeader =
    "ts,file_id,file_class,size_bytes,outcome,transfer_seconds,node_id";

inline void write_trace(const Trace& trace, TraceFormat format,
                        std::ostream& out) {
  if (format == TraceFormat::Csv) out << kTraceCsvHeader << '\n';
  for (const auto& r : trace.records) {
    out << (format == TraceFormat::JsonLines ? record_to_jsonl(r)
                                             : record_to_csv(r))
        << '\n';
  }
}

inline std::string write_trace_string(const Trace& trace, TraceFormat format) {
  std::ostringstream out;
  write_trace(trace, format, out);
  return out.str();
}

namespace detail {

inline AccessRecord record_from_json_line(std::string_view line,
                                          std::size_t line_no) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw ParseError(ParseError::Kind::MalformedLine, line_no, "",
                     "not a JSON object");

  auto require = [&](const char* key) -> const nlohmann::json& {
    auto it = j.find(key);
    if (it == j.end())
      throw ParseError(ParseError::Kind::MalformedLine, line_no, key,
                       std::string("missing field ") + key);
    return *it;
  };

  AccessRecord r;
  const auto& ts = require("ts");
  if (!ts.is_string())
    throw ParseError(ParseError::Kind::MalformedLine, line_no, "ts",
                     "ts must be a string");
  auto parsed = parse_rfc3339(ts.get_ref<const std::string&>());
  if (!parsed)
    throw ParseError(ParseError::Kind::MalformedLine, line_no, "ts",
                     "ts is not RFC 3339 UTC");
  r.ts = *parsed;

  const auto& fid = require("file_id");
  if (!fid.is_string())
    throw ParseError(ParseError::Kind::MalformedLine, line_no, "file_id",
                     "file_id must be a string");
  r.file_id = fid.get<std::string>();

  const auto& fclass = require("file_class");
  if (!fclass.is_string())
    throw ParseError(ParseError::Kind::MalformedLine, line_no, "file_class",
                     "file_class must be a string");
  r.file_class = fclass.get<std::string>();

  const auto& size = require("size_bytes");
  if (!size.is_number_unsigned() && !size.is_number_integer())
    throw ParseError(ParseError::Kind::MalformedLine, line_no, "size_bytes",
                     "size_bytes must be an integer");
  if (size.is_number_integer() && size.get<std::int64_t>() < 0)
    throw ParseError(ParseError::Kind::InvariantViolation, line_no,
                     "size_bytes", "size_bytes must be >= 1");
  r.size_bytes = size.get<std::uint64_t>();

  const auto& outcome = require("outcome");
  if (!outcome.is_string())
    throw ParseError(ParseError::Kind::MalformedLine, line_no, "outcome",
                     "outcome must be a string");
  auto oc = outcome_from_name(outcome.get_ref<const std::string&>());
  if (!oc)
    throw ParseError(ParseError::Kind::MalformedLine, line_no, "outcome",
                     "outcome must be hit|miss|unknown");
  r.outcome = *oc;

  if (auto it = j.find("transfer_seconds"); it != j.end() && !it->is_null()) {
    if (!it->is_number())
      throw ParseError(ParseError::Kind::MalformedLine, line_no,
                       "transfer_seconds", "transfer_seconds must be a number");
    r.transfer_seconds = it->get<double>();
  }
  if (auto it = j.find("node_id"); it != j.end() && !it->is_null()) {
    if (!it->is_string())
      throw ParseError(ParseError::Kind::MalformedLine, line_no, "node_id",
                       "node_id must be a string");
    r.node_id = it->get<std::string>();
  }
  return r;
}

inline AccessRecord record_from_csv_fields(const std::vector<std::string>& f,
                                           std::size_t line_no) {
  if (f.size() != 7)
    throw ParseError(ParseError::Kind::MalformedLine, line_no, "",
                     "expected 7 fields, got " + std::to_string(f.size()));
  AccessRecord r;
  auto parsed = parse_rfc3339(f[0]);
  if (!parsed)
    throw ParseError(ParseError::Kind::MalformedLine, line_no, "ts",
                     "ts is not RFC 3339 UTC");
  r.ts = *parsed;
  r.file_id = f[1];
  r.file_class = f[2];
  auto size = parse_u64(f[3]);
  if (!size)
    throw ParseError(ParseError::Kind::MalformedLine, line_no, "size_bytes",
                     "size_bytes must be a non-negative integer");
  r.size_bytes = *size;
  auto oc = outcome_from_name(f[4]);
  if (!oc)
    throw ParseError(ParseError::Kind::MalformedLine, line_no, "outcome",
                     "outcome must be hit|miss|unknown");
  r.outcome = *oc;
  if (!f[5].empty()) {
    auto t = parse_double(f[5]);
    if (!t)
      throw ParseError(ParseError::Kind::MalformedLine, line_no,
                       "transfer_seconds", "transfer_seconds must be a number");
    r.transfer_seconds = *t;
  }
  if (!f[6].empty()) r.node_id = f[6];
  return r;
}

}  // namespace detail

// Streaming single-pass parse; parser state is bounded by one record.
// Validates record invariants and timestamp monotonicity as it goes.
inline Trace parse_trace(std::istream& in, TraceFormat format,
                         std::string source = "") {
  Trace trace;
  trace.meta.source = std::move(source);

  auto admit = [&](AccessRecord&& r, std::size_t line_no) {
    if (auto v = detail::check_record(r, trace.records.size()))
      throw ParseError(ParseError::Kind::InvariantViolation, line_no, v->field,
                       v->rule);
    if (!trace.records.empty() && r.ts < trace.records.back().ts)
      throw ParseError(ParseError::Kind::NonMonotonicTimestamp, line_no, "ts",
                       "timestamps must be non-decreasing");
    trace.records.push_back(std::move(r));
  };

  if (format == TraceFormat::JsonLines) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      admit(detail::record_from_json_line(line, line_no), line_no);
    }
  } else {
    CsvReader reader(in);
    std::vector<std::string> fields;
    bool saw_header = false;
    while (true) {
      bool more;
      try {
        more = reader.next_record(fields);
      } catch (const std::runtime_error& e) {
        throw ParseError(ParseError::Kind::MalformedLine, reader.line(), "",
                         e.what());
      }
      if (!more) break;
      if (!saw_header) {
        saw_header = true;
        std::string joined;
        for (std::size_t i = 0; i < fields.size(); ++i) {
          if (i) joined += ',';
          joined += fields[i];
        }
        if (joined != kTraceCsvHeader)
          throw ParseError(ParseError::Kind::MalformedLine, reader.line(), "",
                           "bad CSV header: " + joined);
        continue;
      }
      admit(detail::record_from_csv_fields(fields, reader.line()),
            reader.line());
    }
  }
  return trace;
}

inline Trace parse_trace_string(std::string_view text, TraceFormat format,
                                std::string source = "") {
  std::istringstream in{std::string(text)};
  return parse_trace(in, format, std::move(source));
}

// Non-throwing full scan; returns every rule violation with its location.
inline std::vector<Violation> validate_trace(const Trace& trace) {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    if (auto v = detail::check_record(trace.records[i], i)) out.push_back(*v);
    if (i > 0 && trace.records[i].ts < trace.records[i - 1].ts)
      out.push_back(Violation{i, "ts", "timestamps must be non-decreasing"});
  }
  if (trace.meta.schema_version != 1)
    out.push_back(Violation{0, "schema_version", "schema_version must be 1"});
  return out;
}

}  // namespace cachecast
