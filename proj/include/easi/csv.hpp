#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "easi/types.hpp"

namespace easi::csv {

// Minimal reader for the comma-separated schemas used here: UTF-8, '.'
// decimal, no quoting or thousands separators. Empty cells are allowed.
class Table {
public:
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> data;

  std::size_t rows() const { return data.size(); }
  bool has_column(const std::string& name) const { return index_.count(name) > 0; }
  std::size_t column(const std::string& name) const;

  const std::string& cell(std::size_t row, const std::string& name) const;
  bool empty_cell(std::size_t row, const std::string& name) const;
  double num(std::size_t row, const std::string& name) const;

  void build_index();

private:
  std::map<std::string, std::size_t> index_;
};

Table read(const std::string& path);
Table parse(const std::string& text, const std::string& origin = "<string>");

// Stream manipulator: >= 15 significant digits on every numeric output file.
std::ostream& full_precision(std::ostream& os);

}  // namespace easi::csv
