#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace rcd {

/// Shortest round-trippable text for a double: 17 significant digits.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes comma-separated rows. Fields are written verbatim; callers only
/// pass numbers and identifiers without commas or quotes.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  CsvWriter& header(const std::vector<std::string_view>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (i) out_ << ',';
      out_ << names[i];
    }
    out_ << '\n';
    return *this;
  }

  CsvWriter& field(std::string_view s) {
    sep();
    out_ << s;
    return *this;
  }
  CsvWriter& field(const char* s) { return field(std::string_view(s)); }
  CsvWriter& field(const std::string& s) { return field(std::string_view(s)); }
  CsvWriter& field(double v) { return field(std::string_view(format_double(v))); }
  CsvWriter& field(int v) { return field(std::string_view(std::to_string(v))); }
  CsvWriter& field(long long v) { return field(std::string_view(std::to_string(v))); }
  CsvWriter& field(std::size_t v) { return field(std::string_view(std::to_string(v))); }
  CsvWriter& field(bool v) { return field(std::string_view(v ? "1" : "0")); }

  void end_row() {
    out_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }

  std::ostream& out_;
  bool first_ = true;
};

}  // namespace rcd
