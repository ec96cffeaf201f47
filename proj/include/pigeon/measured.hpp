#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pigeon/weakval.hpp"

namespace pigeon {

/// A single-spin Z weak value with independent standard deviations on each component.
struct MeasuredZ {
  int set_id = 0;
  double re = 0.0;
  double re_sigma = 0.0;
  double im = 0.0;
  double im_sigma = 0.0;

  WeakValue value() const { return {re, im}; }
};

/// CSV with header "set_id,re,re_sigma,im,im_sigma". Blank lines and lines starting with '#'
/// are skipped. Throws DataError on malformed rows.
std::vector<MeasuredZ> read_measured_csv(std::istream& in);
std::vector<MeasuredZ> read_measured_csv(const std::filesystem::path& path);
void write_measured_csv(std::ostream& out, std::span<const MeasuredZ> rows, bool header = true);

/// Splits one CSV line on commas, trimming surrounding whitespace.
std::vector<std::string> split_csv_line(const std::string& line);
/// Whole-field number parsing; DataError mentions `line`.
int parse_csv_int(const std::string& field, std::size_t line);
double parse_csv_double(const std::string& field, std::size_t line);

}  // namespace pigeon
