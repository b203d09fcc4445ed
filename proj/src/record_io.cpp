#include "keydetect/record_io.hpp"

#include <istream>
#include <ostream>

#include "keydetect/errors.hpp"
#include "keydetect/text.hpp"

namespace keydetect {

void write_record(std::ostream& out, std::string_view key, std::span<const double> values) {
  out << key;
  for (double v : values) out << ' ' << format_double(v);
  out << '\n';
}

void write_record(std::ostream& out, std::string_view key, std::string_view value) {
  out << key << ' ' << value << '\n';
}

void write_array(std::ostream& out, std::string_view key, std::span<const double> values) {
  out << key << ' ' << values.size();
  for (double v : values) out << ' ' << format_double(v);
  out << '\n';
}

RecordReader::RecordReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

void RecordReader::fail(const std::string& message) const {
  throw FormatError(what_ + " line " + std::to_string(line_) + ": " + message);
}

bool RecordReader::at_end() {
  if (peeked_) return false;
  std::string raw;
  while (std::getline(in_, raw)) {
    ++line_;
    const auto tokens = split_ws(raw);
    if (tokens.empty()) continue;
    peek_.assign(tokens.begin(), tokens.end());
    peeked_ = true;
    return false;
  }
  return true;
}

std::vector<std::string> RecordReader::next() {
  if (at_end()) fail("unexpected end of input");
  peeked_ = false;
  return std::move(peek_);
}

std::vector<std::string> RecordReader::expect(std::string_view key) {
  auto tokens = next();
  if (tokens.front() != key) fail("expected '" + std::string(key) + "', found '" + tokens.front() + "'");
  tokens.erase(tokens.begin());
  return tokens;
}

std::vector<std::string> RecordReader::expect(std::string_view key, std::size_t value_count) {
  auto tokens = expect(key);
  if (tokens.size() != value_count) {
    fail("'" + std::string(key) + "' needs " + std::to_string(value_count) + " values, got " +
         std::to_string(tokens.size()));
  }
  return tokens;
}

std::string RecordReader::expect_string(std::string_view key) { return expect(key, 1)[0]; }
double RecordReader::expect_double(std::string_view key) { return to_double(expect(key, 1)[0]); }
long long RecordReader::expect_int(std::string_view key) { return to_int(expect(key, 1)[0]); }

std::vector<double> RecordReader::expect_array(std::string_view key) {
  const auto tokens = expect(key);
  if (tokens.empty()) fail("'" + std::string(key) + "' is missing its length");
  const long long n = to_int(tokens[0]);
  if (n < 0 || static_cast<std::size_t>(n) + 1 != tokens.size()) {
    fail("'" + std::string(key) + "' declares " + tokens[0] + " values, has " +
         std::to_string(tokens.size() - 1));
  }
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n));
  for (std::size_t i = 1; i < tokens.size(); ++i) values.push_back(to_double(tokens[i]));
  return values;
}

std::vector<double> RecordReader::expect_array(std::string_view key, std::size_t count) {
  auto values = expect_array(key);
  if (values.size() != count) {
    fail("'" + std::string(key) + "' should hold " + std::to_string(count) + " values, has " +
         std::to_string(values.size()));
  }
  return values;
}

double RecordReader::to_double(const std::string& token) {
  const auto v = parse_double(token);
  if (!v) fail("'" + token + "' is not a number");
  return *v;
}

long long RecordReader::to_int(const std::string& token) {
  const auto v = parse_int(token);
  if (!v) fail("'" + token + "' is not an integer");
  return *v;
}

}  // namespace keydetect
