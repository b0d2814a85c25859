#include "gdopt/csv.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace gdopt {

CsvBuilder::CsvBuilder(std::vector<std::string> columns)
    : n_cols_(columns.size()) {
  if (columns.empty()) throw std::invalid_argument("CsvBuilder: no columns");
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) header_ += ",";
    header_ += columns[i];
  }
  header_ += "\n";
}

void CsvBuilder::comment(const std::string& line) {
  comments_ += "# " + line + "\n";
}

void CsvBuilder::begin_row() {
  if (in_row_ && col_in_row_ != n_cols_)
    throw std::logic_error("CsvBuilder: previous row incomplete");
  if (in_row_) body_ += "\n";
  in_row_ = true;
  col_in_row_ = 0;
}

void CsvBuilder::separator() {
  if (!in_row_) throw std::logic_error("CsvBuilder: add outside a row");
  if (col_in_row_ >= n_cols_) throw std::logic_error("CsvBuilder: too many cells");
  if (col_in_row_) body_ += ",";
  ++col_in_row_;
}

void CsvBuilder::add(double v) {
  separator();
  body_ += format_double(v);
}

void CsvBuilder::add(int v) { add(static_cast<std::int64_t>(v)); }

void CsvBuilder::add(std::int64_t v) {
  separator();
  body_ += std::to_string(v);
}

void CsvBuilder::add(std::uint64_t v) {
  separator();
  body_ += std::to_string(v);
}

void CsvBuilder::add(const std::string& v) {
  separator();
  body_ += v;
}

std::string CsvBuilder::str() const {
  if (in_row_ && col_in_row_ != n_cols_)
    throw std::logic_error("CsvBuilder: last row incomplete");
  std::string out = comments_ + header_ + body_;
  if (in_row_) out += "\n";
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc | std::ios::binary);
    if (!f) throw std::runtime_error("write_file_atomic: cannot open " + tmp);
    f << content;
    if (!f) throw std::runtime_error("write_file_atomic: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace gdopt
