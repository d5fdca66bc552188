#pragma once

#include <string>
#include <vector>

// Shared helpers for delimiter-separated inputs (annotation tables, metadata
// CSVs). Quoting follows the usual CSV convention: a field may be wrapped in
// double quotes, with "" as an escaped quote.
namespace sthreads::tabular {

inline std::string trim(const std::string& s) {
  std::size_t begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  std::size_t end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

// Splits one row on the delimiter, honoring double-quoted fields so that
// delimiters inside dialogue text or character names survive.
inline std::vector<std::string> split_row(const std::string& line,
                                          char delimiter) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == delimiter) {
      fields.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

}  // namespace sthreads::tabular
