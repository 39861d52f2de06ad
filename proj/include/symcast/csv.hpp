#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "symcast/errors.hpp"

namespace symcast {

// Minimal strict CSV: comma-separated, no quoting (none of the project's
// schemas need it). Field values containing commas, quotes, or newlines are
// rejected on write so every file stays parseable by this reader.

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line per row
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  require_data(in.good(), "cannot open file: " + path);
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      table.header = split_csv_line(line);
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    require_data(fields.size() == table.header.size(),
                 path + ":" + std::to_string(line_no) + ": expected " +
                     std::to_string(table.header.size()) + " fields, got " +
                     std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  require_data(line_no >= 1, path + ": missing header line");
  return table;
}

inline void expect_header(const CsvTable& table,
                          const std::vector<std::string>& expected,
                          const std::string& path) {
  if (table.header != expected) {
    std::string want;
    for (std::size_t i = 0; i < expected.size(); ++i)
      want += (i ? "," : "") + expected[i];
    throw DataError(path + ": bad header, expected '" + want + "'");
  }
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path), path_(path) {
    require_data(out_.good(), "cannot write file: " + path);
  }

  void write_row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::string& f = fields[i];
      require_data(f.find_first_of(",\"\n\r") == std::string::npos,
                   path_ + ": field value not representable in strict CSV: '" +
                       f + "'");
      if (i) out_ << ',';
      out_ << f;
    }
    out_ << '\n';
  }

  void close() {
    out_.close();
    require_data(out_.good(), "write failed: " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

inline long long parse_int_field(const std::string& s,
                                 const std::string& context) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw DataError(context + ": not an integer: '" + s + "'");
  }
  require_data(pos == s.size() && !s.empty(),
               context + ": not an integer: '" + s + "'");
  return v;
}

inline double parse_double_field(const std::string& s,
                                 const std::string& context) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw DataError(context + ": not a number: '" + s + "'");
  }
  require_data(pos == s.size() && !s.empty(),
               context + ": not a number: '" + s + "'");
  return v;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace symcast
