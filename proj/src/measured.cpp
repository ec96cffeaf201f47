#include "pigeon/measured.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "pigeon/errors.hpp"

namespace pigeon {

namespace {

template <typename T>
T parse_number(const std::string& field, std::size_t line) {
  T value{};
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw DataError(fmt::format("line {}: cannot parse '{}' as a number", line, field));
  return value;
}

}  // namespace

int parse_csv_int(const std::string& field, std::size_t line) { return parse_number<int>(field, line); }
double parse_csv_double(const std::string& field, std::size_t line) { return parse_number<double>(field, line); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    std::string f = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto b = f.find_first_not_of(" \t\r");
    const auto e = f.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? std::string{} : f.substr(b, e - b + 1));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::vector<MeasuredZ> read_measured_csv(std::istream& in) {
  std::vector<MeasuredZ> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line.front() == '#') continue;
    const auto f = split_csv_line(line);
    if (!header_seen) {
      if (f != std::vector<std::string>{"set_id", "re", "re_sigma", "im", "im_sigma"})
        throw DataError(fmt::format("line {}: expected header set_id,re,re_sigma,im,im_sigma", lineno));
      header_seen = true;
      continue;
    }
    if (f.size() != 5) throw DataError(fmt::format("line {}: expected 5 fields, got {}", lineno, f.size()));
    rows.push_back({parse_number<int>(f[0], lineno), parse_number<double>(f[1], lineno),
                    parse_number<double>(f[2], lineno), parse_number<double>(f[3], lineno),
                    parse_number<double>(f[4], lineno)});
  }
  if (!header_seen) throw DataError("empty MeasuredZ CSV");
  return rows;
}

std::vector<MeasuredZ> read_measured_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  return read_measured_csv(in);
}

void write_measured_csv(std::ostream& out, std::span<const MeasuredZ> rows, bool header) {
  if (header) out << "set_id,re,re_sigma,im,im_sigma\n";
  for (const auto& r : rows)
    fmt::print(out, "{},{:.6g},{:.6g},{:.6g},{:.6g}\n", r.set_id, r.re, r.re_sigma, r.im, r.im_sigma);
}

}  // namespace pigeon
