#pragma once

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "situseq/error.hpp"

namespace situseq::csv {

struct Row {
  std::size_t line = 0;  // 1-based physical line where the record starts
  std::vector<std::string> fields;
};

// RFC-4180 reader: quoted fields, doubled quotes, embedded newlines, CRLF or LF.
// A trailing newline does not produce an empty record; blank lines are skipped.
inline std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  std::size_t i = 0, line = 1;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  while (i < text.size()) {
    Row row;
    row.line = line;
    std::string field;
    bool in_quotes = false, field_was_quoted = false, end_of_record = false;
    while (i < text.size() && !end_of_record) {
      const char c = text[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field += '"';
            i += 2;
          } else {
            in_quotes = false;
            ++i;
          }
        } else {
          if (c == '\n') ++line;
          field += c;
          ++i;
        }
        continue;
      }
      switch (c) {
        case '"':
          if (!field.empty() || field_was_quoted)
            throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": stray quote inside unquoted field");
          in_quotes = field_was_quoted = true;
          ++i;
          break;
        case ',':
          row.fields.push_back(std::move(field));
          field.clear();
          field_was_quoted = false;
          ++i;
          break;
        case '\r':
          ++i;
          break;
        case '\n':
          ++i;
          ++line;
          end_of_record = true;
          break;
        default:
          if (field_was_quoted)
            throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": characters after closing quote");
          field += c;
          ++i;
      }
    }
    if (in_quotes) throw Error(ErrorKind::parse, "line " + std::to_string(row.line) + ": unterminated quoted field");
    row.fields.push_back(std::move(field));
    if (row.fields.size() == 1 && row.fields[0].empty() && !field_was_quoted) continue;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::validation, "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::validation, "cannot write file: " + path);
  out << content;
}

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += quote(fields[i]);
  }
  line += '\n';
  return line;
}

}  // namespace situseq::csv
