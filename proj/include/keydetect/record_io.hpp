#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace keydetect {

// Line-oriented "key value..." records shared by the model file formats.
// Numbers are written in shortest round-trip form.

void write_record(std::ostream& out, std::string_view key, std::span<const double> values);
void write_record(std::ostream& out, std::string_view key, std::string_view value);
// "key n v1 ... vn"
void write_array(std::ostream& out, std::string_view key, std::span<const double> values);

class RecordReader {
 public:
  // `what` prefixes error messages, e.g. "model file".
  RecordReader(std::istream& in, std::string what);

  // Next non-empty line split on whitespace; FormatError at end of input.
  std::vector<std::string> next();
  bool at_end();
  std::size_t line() const { return line_; }

  // Reads a line whose first token is `key` and returns the remaining tokens.
  std::vector<std::string> expect(std::string_view key);
  std::vector<std::string> expect(std::string_view key, std::size_t value_count);
  std::string expect_string(std::string_view key);
  double expect_double(std::string_view key);
  long long expect_int(std::string_view key);
  std::vector<double> expect_array(std::string_view key);
  std::vector<double> expect_array(std::string_view key, std::size_t count);

  double to_double(const std::string& token);
  long long to_int(const std::string& token);
  [[noreturn]] void fail(const std::string& message) const;

 private:
  std::istream& in_;
  std::string what_;
  std::size_t line_ = 0;
  bool peeked_ = false;
  std::vector<std::string> peek_;
};

}  // namespace keydetect
