#include "lpann/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <system_error>
#include <vector>

#include "lpann/error.hpp"

namespace lpann {

namespace {

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
T parse_number(std::string_view tok, const std::string& where) {
  T value{};
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw parse_error(where + ": cannot parse '" + std::string(tok) + "'");
  return value;
}

}  // namespace

Dataset read_dataset(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto where = [&] { return source + ":" + std::to_string(line_no); };

  std::vector<std::string_view> head;
  while (head.empty()) {
    if (!std::getline(in, line)) throw parse_error(source + ": missing header line \"n d p\"");
    ++line_no;
    head = tokens(line);
  }
  if (head.size() != 3) throw parse_error(where() + ": header must be \"n d p\"");
  const auto n = parse_number<std::size_t>(head[0], where());
  const auto d = parse_number<std::size_t>(head[1], where());
  const auto p = parse_number<double>(head[2], where());
  if (d == 0) throw parse_error(where() + ": dimension must be positive");
  if (!std::isfinite(p) || p < 1.0) throw parse_error(where() + ": p must be finite and >= 1");

  Dataset ds;
  ds.p = p;
  ds.points = PointSet(d);
  ds.points.reserve(n);
  std::vector<double> row(d);
  std::size_t read = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = tokens(line);
    if (toks.empty()) continue;
    if (read == n) throw parse_error(where() + ": more than the declared " + std::to_string(n) + " points");
    if (toks.size() != d)
      throw parse_error(where() + ": expected " + std::to_string(d) + " values, found " + std::to_string(toks.size()));
    for (std::size_t i = 0; i < d; ++i) {
      row[i] = parse_number<double>(toks[i], where());
      if (!std::isfinite(row[i])) throw parse_error(where() + ": non-finite value");
    }
    ds.points.push_back(row);
    ++read;
  }
  if (read != n)
    throw parse_error(source + ": declared " + std::to_string(n) + " points, found " + std::to_string(read));
  return ds;
}

Dataset read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "' for reading");
  return read_dataset(in, path);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw numeric_range_error("cannot format value");
  return std::string(buf, ptr);
}

void write_dataset(std::ostream& out, const PointSet& points, double p) {
  out << points.size() << ' ' << points.dim() << ' ' << format_double(p) << '\n';
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto row = points[i];
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out << ' ';
      out << format_double(row[k]);
    }
    out << '\n';
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw io_error("failed writing '" + path + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw io_error("cannot replace '" + path + "': " + ec.message());
  }
}

}  // namespace lpann
