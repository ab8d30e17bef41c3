#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace physio::io {

struct CsvRow {
  std::size_t line = 0;  // 1-based line number in the file
  std::vector<std::string> fields;
};

struct CsvTable {
  std::filesystem::path path;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;

  // Column index of name; throws SchemaError naming the file.
  std::size_t column(std::string_view name) const;
  double number(const CsvRow& row, std::size_t col) const;
  int integer(const CsvRow& row, std::size_t col) const;
};

// Comma-separated, header row mandatory, no quoting. Blank lines are skipped.
CsvTable read_csv(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
// Writes atomically enough for our purposes: truncate + write.
void write_text(const std::filesystem::path& path, std::string_view text);

// printf-style %.<digits>g / %.<digits>f formatting with the C locale.
std::string fmt_g(double v, int digits = 17);
std::string fmt_f(double v, int decimals);

}  // namespace physio::io
