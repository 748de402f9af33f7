#include "easi/csv.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace easi::csv {

void Table::build_index() {
  index_.clear();
  for (std::size_t i = 0; i < header.size(); ++i) index_[header[i]] = i;
}

std::size_t Table::column(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw SchemaError("csv: missing column " + name);
  return it->second;
}

const std::string& Table::cell(std::size_t row, const std::string& name) const {
  return data.at(row).at(column(name));
}

bool Table::empty_cell(std::size_t row, const std::string& name) const {
  return cell(row, name).empty();
}

double Table::num(std::size_t row, const std::string& name) const {
  const std::string& s = cell(row, name);
  if (s.empty()) throw SchemaError("csv: empty numeric cell in column " + name);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw SchemaError("csv: bad number '" + s + "' in column " + name);
  return v;
}

Table parse(const std::string& text, const std::string& origin) {
  Table t;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && is.eof()) break;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t pos = line.find(',', start);
      if (pos == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != t.header.size())
        throw SchemaError(origin + ": row with " + std::to_string(fields.size()) +
                          " fields, header has " + std::to_string(t.header.size()));
      t.data.push_back(std::move(fields));
    }
  }
  if (first) throw SchemaError(origin + ": empty csv");
  t.build_index();
  return t;
}

Table read(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str(), path);
}

std::ostream& full_precision(std::ostream& os) {
  os << std::setprecision(17);
  return os;
}

}  // namespace easi::csv
