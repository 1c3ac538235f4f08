#pragma once

// Minimal CSV helpers for the flat manifest/report tables used here.
// Fields are split on commas; quoting is not supported, so field values
// must not contain commas or newlines.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wildreid::csv {

inline std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string join_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  return out;
}

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace wildreid::csv
