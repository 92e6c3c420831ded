#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "prefrec/common.hpp"

namespace prefrec {

// Minimal strict TSV reading. Rows are split on '\t'; a malformed row is a
// hard error carrying the file name and 1-based line number.
struct TsvRow {
  std::vector<std::string> fields;
  int64_t line_no = 0;
};

std::string read_file(const std::filesystem::path& path);

// Calls fn for every line (including the first); trailing '\r' is stripped.
void for_each_tsv_row(const std::filesystem::path& path,
                      const std::function<void(const TsvRow&)>& fn);

int64_t parse_int(const std::string& s, const std::filesystem::path& file, int64_t line_no,
                  const char* what);
double parse_double(const std::string& s, const std::filesystem::path& file, int64_t line_no,
                    const char* what);

// Splits a comma-separated list field.
std::vector<std::string> split_commas(const std::string& s);

std::string join_commas(const std::vector<std::string>& parts);

void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace prefrec
