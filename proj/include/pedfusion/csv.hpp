#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pedfusion::csv {

/// Shortest text that parses back to the same double.
std::string format_double(double value);
std::string format_optional(const std::optional<double>& value);

double parse_double(std::string_view field, const std::string& where);
std::optional<double> parse_optional(std::string_view field, const std::string& where);
bool parse_flag(std::string_view field, const std::string& where);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::filesystem::path source;

  /// "file:row" for diagnostics; row 1 is the header.
  std::string where(std::size_t row_index) const;
};

/// Reads a comma-separated file and checks that the header matches exactly
/// and that every row has the header's field count. Throws kSchemaError.
Table read_table(const std::filesystem::path& path, const std::vector<std::string>& expected_header);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace pedfusion::csv
