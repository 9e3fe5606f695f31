#include "pinnflow/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pinnflow/errors.hpp"

namespace pinnflow {

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string checksum_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t parse_checksum_hex(const std::string& text) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out, 16);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) throw ParseError("bad checksum '" + text + "'");
  return out;
}

void write_text_file(const std::string& path, const std::string& contents) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << contents;
  if (!out) throw Error("write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

CsvTable read_csv_table(const std::string& path) {
  std::istringstream in(read_text_file(path));
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header");
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) table.header.push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
      row.push_back(v);
    }
    if (row.size() != table.header.size()) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(table.header.size()) +
                       " columns");
    }
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) table.values(r, c) = rows[r][c];
  }
  return table;
}

}  // namespace pinnflow
