#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gammacontam::csv {

struct Table {
  std::vector<std::string> header;  // empty when the file has none
  std::vector<std::vector<double>> rows;
};

/// Parses a numeric CSV. When `has_header` is unset the first line is
/// treated as a header iff one of its cells fails to parse as a number.
/// Blank lines and lines starting with '#' are skipped.
/// Throws InputError naming the offending line on ragged rows or
/// non-numeric cells.
Table read(const std::filesystem::path& path,
           std::optional<bool> has_header = std::nullopt);

Table parse(const std::string& text, std::optional<bool> has_header,
            const std::string& source = "<string>");

std::optional<double> parse_number(std::string_view cell);

/// Shortest round-trip decimal representation.
std::string format_number(double value);

}  // namespace gammacontam::csv
