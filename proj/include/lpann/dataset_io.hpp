#pragma once

#include <iosfwd>
#include <string>

#include "lpann/geometry.hpp"

namespace lpann {

/// Text dataset: first line "n d p", then n lines of d whitespace-separated decimals.
struct Dataset {
  PointSet points;
  double p = 2;
};

/// Parse errors carry `source` and the 1-based line number.
Dataset read_dataset(std::istream& in, const std::string& source);
Dataset read_dataset_file(const std::string& path);
void write_dataset(std::ostream& out, const PointSet& points, double p);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

std::string read_file(const std::string& path);
/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace lpann
