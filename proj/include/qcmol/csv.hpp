#pragma once

// Minimal RFC-4180 reader and writer: quoted fields, doubled quotes, CRLF.

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "qcmol/error.hpp"

namespace qcmol::csv {

using Row = std::vector<std::string>;

/// Reads every record; quoted fields may span lines.
inline std::vector<Row> read_all(std::istream& in) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  char c;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_row();
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get(c);
      end_row();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

/// Header-indexed table.
struct Table {
  Row header;
  std::vector<Row> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  }

  int require_column(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw FormatError("missing CSV column '" + name + "'");
    return c;
  }
};

inline Table read_table(std::istream& in) {
  auto rows = read_all(in);
  if (rows.empty()) throw FormatError("CSV file has no header row");
  Table t;
  t.header = std::move(rows.front());
  t.rows.assign(std::make_move_iterator(rows.begin() + 1), std::make_move_iterator(rows.end()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r].size() != t.header.size())
      throw FormatError("CSV row " + std::to_string(r + 1) + " has " + std::to_string(t.rows[r].size()) +
                        " fields, header has " + std::to_string(t.header.size()));
  }
  return t;
}

inline std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string s = "\"";
  for (char c : field) {
    if (c == '"') s += '"';
    s += c;
  }
  return s + '"';
}

inline void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << quote(row[i]);
  }
  out << '\n';
}

}  // namespace qcmol::csv
