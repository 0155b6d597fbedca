#include "gammacontam/csv.hpp"

#include "gammacontam/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gammacontam::csv {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

}  // namespace

std::optional<double> parse_number(std::string_view cell) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) return std::nullopt;
  return value;
}

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

Table parse(const std::string& text, std::optional<bool> has_header,
            const std::string& source) {
  Table table;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty() || trim(line).front() == '#') continue;
    const auto cells = split(line);
    if (first) {
      first = false;
      bool header = false;
      if (has_header.has_value()) {
        header = *has_header;
      } else {
        for (auto c : cells)
          if (!parse_number(c)) header = true;
      }
      width = cells.size();
      if (header) {
        for (auto c : cells) table.header.emplace_back(c);
        continue;
      }
    }
    if (cells.size() != width) {
      throw InputError(source + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(width) + " cells, found " +
                       std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(width);
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const auto v = parse_number(cells[j]);
      if (!v) {
        throw InputError(source + ":" + std::to_string(line_no) + ": column " +
                         std::to_string(j + 1) + " is not numeric: '" +
                         std::string(cells[j]) + "'");
      }
      row.push_back(*v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

Table read(const std::filesystem::path& path, std::optional<bool> has_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), has_header, path.string());
}

}  // namespace gammacontam::csv
