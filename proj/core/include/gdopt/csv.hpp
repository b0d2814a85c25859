#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gdopt {

/// CSV with a fixed column set: comma separators, "." decimal point,
/// LF line endings, doubles at full precision (%.17g). Optional leading
/// comment lines carry run metadata such as the config hash.
class CsvBuilder {
 public:
  explicit CsvBuilder(std::vector<std::string> columns);

  void comment(const std::string& line);
  void begin_row();
  void add(double v);
  void add(int v);
  void add(std::int64_t v);
  void add(std::uint64_t v);
  void add(const std::string& v);

  std::string str() const;

 private:
  void separator();
  std::size_t n_cols_;
  std::size_t col_in_row_ = 0;
  bool in_row_ = false;
  std::string comments_;
  std::string header_;
  std::string body_;
};

std::string format_double(double v);

/// Writes via a temporary file and rename so readers never see a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

/// FNV-1a over the given text; used to stamp outputs with their config.
std::uint64_t fnv1a64(const std::string& text);

}  // namespace gdopt
