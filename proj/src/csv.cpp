#include "pedfusion/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pedfusion/error.hpp"

namespace pedfusion::csv {

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error(ErrorCode::kInvalidArgument, "cannot format number");
  return std::string(buf, end);
}

std::string format_optional(const std::optional<double>& value) {
  return value ? format_double(*value) : std::string();
}

double parse_double(std::string_view field, const std::string& where) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw Error(ErrorCode::kSchemaError,
                where + ": expected a number, got '" + std::string(field) + "'");
  }
  return value;
}

std::optional<double> parse_optional(std::string_view field, const std::string& where) {
  if (field.empty()) return std::nullopt;
  return parse_double(field, where);
}

bool parse_flag(std::string_view field, const std::string& where) {
  if (field == "1") return true;
  if (field == "0") return false;
  throw Error(ErrorCode::kSchemaError, where + ": expected 0 or 1, got '" + std::string(field) + "'");
}

std::string Table::where(std::size_t row_index) const {
  return source.string() + ":" + std::to_string(row_index + 2);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

}  // namespace

Table read_table(const std::filesystem::path& path, const std::vector<std::string>& expected_header) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  Table table;
  table.source = path;
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kSchemaError, path.string() + ":1: missing header");
  }
  table.header = split(line);
  if (table.header != expected_header) {
    std::string want;
    for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
    throw Error(ErrorCode::kSchemaError, path.string() + ":1: header must be '" + want + "'");
  }
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split(line);
    if (fields.size() != expected_header.size()) {
      throw Error(ErrorCode::kSchemaError,
                  table.where(table.rows.size()) + ": expected " +
                      std::to_string(expected_header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace pedfusion::csv
