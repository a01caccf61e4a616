#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "lpann/oracle.hpp"

namespace lpann::cli {

struct GenOptions {
  std::size_t n = 0;
  std::size_t d = 0;
  double p = 4;
  std::string dist = "gaussian";
  std::uint64_t seed = 0;
  std::string out;
};

std::string generate_dataset_text(const GenOptions& opt);
void cmd_gen(const GenOptions& opt);

struct BuildOptions {
  std::string input;
  double r = 1;
  double delta = 1;
  std::uint64_t seed = 0;
  bool clamp_to_log_dim = true;
  std::string out;
};

/// Builds and writes the index; returns the summary printed on standard output.
nlohmann::json cmd_build(const BuildOptions& opt);

struct QueryOptions {
  std::string index;
  std::string query_file;
};

/// One line per query: "id distance", or "-1 inf" when the index reports nothing.
void cmd_query(const QueryOptions& opt, std::ostream& out);

struct BenchSpec {
  std::vector<std::size_t> n_grid;
  std::size_t d = 32;
  double p = 4;
  double r = 0.01;
  double rho = 0.009;
  Distribution distribution = Distribution::gaussian;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  double delta = 1;
  bool clamp_to_log_dim = true;
};

/// Validates a bench spec; every violation is listed in the thrown usage error.
BenchSpec parse_bench_spec(const nlohmann::json& j);
nlohmann::json run_bench(const BenchSpec& spec);
void cmd_bench(const std::string& spec_path, const std::string& out_path);

/// Report with every "timing" object removed, for reproducibility comparisons.
nlohmann::json strip_timing(nlohmann::json report);

/// Entry point of the lpann tool. Returns the process exit code:
/// 0 success, 2 usage or parse error, 3 I/O error, 4 numeric-range error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lpann::cli
