#pragma once

#include <string>
#include <vector>

namespace uqsim {

// Shortest decimal form that round-trips a double (17 significant digits).
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Minimal comma-separated reader; no quoting (none of our fields need it).
CsvTable read_csv(const std::string& path);

void write_lines(const std::string& path, const std::vector<std::string>& lines);

double parse_double(const std::string& s);

}  // namespace uqsim
