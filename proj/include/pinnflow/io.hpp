#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pinnflow {

/// Shortest text that round-trips the double exactly.
std::string format_double(double x);

std::string checksum_hex(std::uint64_t value);
std::uint64_t parse_checksum_hex(const std::string& text);

void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

/// Numeric CSV with one header row.
CsvTable read_csv_table(const std::string& path);

}  // namespace pinnflow
