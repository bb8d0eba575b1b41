#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace pgdro::io {

std::string read_file(const std::string& path);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view contents);

// Shortest decimal that parses back to the same double.
std::string format_double(double value);
void append_double(std::string& out, double value);

// Strict parse of a whole cell; throws IoError with the cell coordinates.
double parse_double(std::string_view cell, std::size_t line, std::size_t column,
                    std::string_view source);
long long parse_integer(std::string_view cell, std::size_t line, std::size_t column,
                        std::string_view source);

// Splits on commas and trims surrounding spaces and a trailing '\r'. No
// quoting: none of our files carry quoted fields.
std::vector<std::string_view> split_csv_line(std::string_view line);

// Non-empty lines with their 1-based line numbers.
struct Line {
  std::size_t number;
  std::string_view text;
};
std::vector<Line> csv_lines(std::string_view text);

}  // namespace pgdro::io
