#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace mfac {

// Plain CSV: header row, '.' decimals, LF line ends, doubles with 17
// significant digits so values round-trip exactly.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);

  void header(const std::vector<std::string>& names);
  CsvWriter& field(double v);
  CsvWriter& field(long long v);
  CsvWriter& field(const std::string& v);
  CsvWriter& empty_field();
  void end_row();

 private:
  void sep();

  std::ofstream out_;
  bool row_started_ = false;
};

std::string format_double(double v);

// Hex SHA-256 of a file's bytes, or of a string.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_text(const std::string& text);

// Writes text to path via a temporary sibling and rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

std::string read_text(const std::filesystem::path& path);

// UTC timestamp in ISO-8601.
std::string utc_now();

}  // namespace mfac
