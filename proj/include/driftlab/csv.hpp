#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace driftlab {

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double x);

// Minimal CSV text builder; cell values here never need quoting.
class CsvBuilder {
public:
  explicit CsvBuilder(const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);
  const std::string& text() const { return text_; }

private:
  void append(const std::vector<std::string>& cells);
  std::size_t n_cols_ = 0;
  std::string text_;
};

std::uint64_t fnv1a64(std::string_view data);

// Whole-file helpers; both throw std::runtime_error naming the path on failure.
// write_text_file creates missing parent directories.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace driftlab
