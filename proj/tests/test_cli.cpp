#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "lpann/commands.hpp"
#include "lpann/dataset_io.hpp"
#include "lpann/error.hpp"
#include "lpann/recursive_ann.hpp"
#include "schema_check.hpp"

using namespace lpann;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("lpann_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& file) const { return (path / file).string(); }
};

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = lpann::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Runs the installed binary, for exit-status checks through a real process.
int spawn(const std::string& args, const std::string& err_file) {
  const std::string cmd = std::string(LPANN_CLI_PATH) + " " + args + " >/dev/null 2>" + err_file;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json schema() { return json::parse(read_file(LPANN_SCHEMA_PATH)); }

}  // namespace

TEST_CASE("gen writes a small file") {
  TempDir dir("gen_small");
  REQUIRE(run_cli({"gen", "--n", "1", "--d", "1", "--p", "4", "--seed", "3", "--out", dir / "a.txt"}).code == 0);
  const std::string text = read_file(dir / "a.txt");
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  CHECK(text.rfind("1 1 4\n", 0) == 0);
}

TEST_CASE("gen is deterministic and parses back") {
  TempDir dir("gen_det");
  for (const char* name : {"a.txt", "b.txt"})
    REQUIRE(run_cli({"gen", "--n", "1000", "--d", "32", "--dist", "gaussian", "--seed", "9", "--out", dir / name}).code == 0);
  REQUIRE(run_cli({"gen", "--n", "1000", "--d", "32", "--seed", "10", "--out", dir / "c.txt"}).code == 0);
  CHECK(read_file(dir / "a.txt") == read_file(dir / "b.txt"));
  CHECK(read_file(dir / "a.txt") != read_file(dir / "c.txt"));
  const Dataset ds = read_dataset_file(dir / "a.txt");
  CHECK(ds.points.size() == 1000);
  CHECK(ds.points.dim() == 32);
  for (const std::string dist : {"uniform", "clustered"})
    CHECK(run_cli({"gen", "--n", "5", "--d", "2", "--dist", dist, "--out", dir / "d.txt"}).code == 0);
}

TEST_CASE("gen argument and I/O errors") {
  TempDir dir("gen_err");
  CHECK(run_cli({"gen", "--n", "5", "--d", "2", "--dist", "cauchy", "--out", dir / "x.txt"}).code == 2);
  CHECK(run_cli({"gen", "--n", "0", "--d", "2", "--out", dir / "x.txt"}).code == 2);
  CHECK(run_cli({"gen", "--d", "2", "--out", dir / "x.txt"}).code == 2);
  const Result r = run_cli({"gen", "--n", "5", "--d", "2", "--out", "/nonexistent-dir/sub/x.txt"});
  CHECK(r.code == 3);
  CHECK(r.err.find("/nonexistent-dir/sub/x.txt") != std::string::npos);
}

TEST_CASE("help and missing subcommand") {
  CHECK(run_cli({"--help"}).code == 0);
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"frobnicate"}).code == 2);
}

TEST_CASE("build reports bound and space; malformed input names the line") {
  TempDir dir("build");
  REQUIRE(run_cli({"gen", "--n", "200", "--d", "8", "--seed", "1", "--out", dir / "ds.txt"}).code == 0);
  const Result r = run_cli({"build", "--input", dir / "ds.txt", "--r", "0.2", "--seed", "4", "--out", dir / "ds.idx"});
  REQUIRE(r.code == 0);
  const json summary = json::parse(r.out);
  CHECK(summary.contains("approximation_bound"));
  CHECK(summary["space"]["total"].get<std::size_t>() > 200);

  std::ofstream(dir / "bad.txt") << "2 3 4\n1 2 3\n1 2 oops\n";
  const Result bad = run_cli({"build", "--input", dir / "bad.txt", "--r", "1", "--out", dir / "bad.idx"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("bad.txt:3") != std::string::npos);
  CHECK(run_cli({"build", "--input", dir / "missing.txt", "--r", "1", "--out", dir / "m.idx"}).code == 3);
  CHECK(run_cli({"build", "--input", dir / "ds.txt", "--r", "-1", "--out", dir / "m.idx"}).code == 2);
}

TEST_CASE("query answers match the in-memory scheme; zero-distance queries return the planted id") {
  TempDir dir("query");
  REQUIRE(run_cli({"gen", "--n", "300", "--d", "8", "--p", "4", "--seed", "2", "--out", dir / "ds.txt"}).code == 0);
  REQUIRE(run_cli({"build", "--input", dir / "ds.txt", "--r", "0.3", "--seed", "6", "--out", dir / "ds.idx"}).code == 0);
  const Dataset ds = read_dataset_file(dir / "ds.txt");

  const std::vector<Index> planted{0, 17, 123, 299};
  PointSet rho0(8);
  for (Index id : planted) rho0.push_back(ds.points[id]);
  {
    std::ofstream q(dir / "rho0.txt");
    write_dataset(q, rho0, 4);
  }
  const Result r0 = run_cli({"query", "--index", dir / "ds.idx", "--query-file", dir / "rho0.txt"});
  REQUIRE(r0.code == 0);
  std::istringstream lines(r0.out);
  for (Index id : planted) {
    Index got;
    std::string dist;
    lines >> got >> dist;
    CHECK(got == id);
    CHECK(dist == "0");
  }

  Rng rng(5);
  PointSet queries(8);
  std::normal_distribution<double> g(0.0, 0.05);
  for (std::size_t i = 0; i < 50; ++i) {
    Vector v(ds.points[i * 5].begin(), ds.points[i * 5].end());
    for (double& c : v) c += g(rng);
    queries.push_back(v);
  }
  {
    std::ofstream q(dir / "q.txt");
    write_dataset(q, queries, 2);
  }
  const Result r = run_cli({"query", "--index", dir / "ds.idx", "--query-file", dir / "q.txt"});
  REQUIRE(r.code == 0);
  SchemeConfig cfg;
  cfg.p = 4;
  cfg.r = 0.3;
  cfg.seed = 6;
  const LpScheme mem = LpScheme::preprocess(ds.points, cfg);
  std::ostringstream expected;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto a = mem.query(queries[i]);
    if (a)
      expected << a->id << ' ' << format_double(a->distance) << '\n';
    else
      expected << "-1 inf\n";
  }
  CHECK(r.out == expected.str());

  PointSet wide(3);
  wide.push_back(std::vector<double>{1, 2, 3});
  {
    std::ofstream q(dir / "wide.txt");
    write_dataset(q, wide, 4);
  }
  const Result mismatch = run_cli({"query", "--index", dir / "ds.idx", "--query-file", dir / "wide.txt"});
  CHECK(mismatch.code == 2);
  CHECK(mismatch.err.find('3') != std::string::npos);
  CHECK(mismatch.err.find('8') != std::string::npos);
}

TEST_CASE("process exit codes") {
  TempDir dir("exit");
  CHECK(spawn("gen --n 3 --d 2 --out " + (dir / "ok.txt"), dir / "err") == 0);
  CHECK(spawn("gen --n 3", dir / "err") == 2);
  CHECK(spawn("gen --n 3 --d 2 --out /nonexistent-dir/x.txt", dir / "err") == 3);
  std::ofstream(dir / "huge.txt") << "2 2 4\n1e300 1e300\n-1e300 -1e300\n";
  CHECK(spawn("build --input " + (dir / "huge.txt") + " --r 1 --out " + (dir / "h.idx"), dir / "err") == 4);
  CHECK(spawn("query --index " + (dir / "none.idx") + " --query-file " + (dir / "ok.txt"), dir / "err") == 3);
}

TEST_CASE("bench spec violations are enumerated") {
  const json spec = {{"n_grid", {250, 0}}, {"p", 1}, {"r", 0.1}, {"trials", 3}, {"colour", "red"}};
  try {
    lpann::cli::parse_bench_spec(spec);
    FAIL("expected a usage error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(e.kind() == ErrorKind::usage);
    CHECK(msg.find("n_grid") != std::string::npos);
    CHECK(msg.find("'d'") != std::string::npos);
    CHECK(msg.find("'p'") != std::string::npos);
    CHECK(msg.find("colour") != std::string::npos);
  }
  const lpann::cli::BenchSpec ok = lpann::cli::parse_bench_spec({{"n", 100}, {"d", 8}, {"p", 4}, {"r", 0.5}, {"trials", 2}});
  CHECK(ok.n_grid == std::vector<std::size_t>{100});
  CHECK(ok.rho == doctest::Approx(0.45));
  CHECK_THROWS_AS(lpann::cli::parse_bench_spec({{"n", 100}, {"d", 8}, {"p", 4}, {"r", 0.5}, {"trials", 2}, {"rho", 0.6}}), Error);
}

TEST_CASE("bench report is schema-valid and reproducible") {
  TempDir dir("bench");
  const json spec = {{"n_grid", {250, 500}}, {"d", 16}, {"p", 4}, {"r", 0.05}, {"trials", 4}, {"seed", 5}};
  std::ofstream(dir / "spec.json") << spec.dump();
  REQUIRE(run_cli({"bench", "--spec", dir / "spec.json", "--out", dir / "a.json"}).code == 0);
  REQUIRE(run_cli({"bench", "--spec", dir / "spec.json", "--out", dir / "b.json"}).code == 0);
  const json a = json::parse(read_file(dir / "a.json"));
  const json b = json::parse(read_file(dir / "b.json"));
  const auto errors = schema_check::validate(schema(), a);
  for (const auto& e : errors) MESSAGE(e);
  CHECK(errors.empty());
  CHECK(a["runs"].size() == 2);
  CHECK(a["config"]["working_p"] == 4);
  CHECK(a["ladder"].size() == 4);  // k = 3 for d = 16
  CHECK(a["space"]["fit_slope"].is_null());
  CHECK(lpann::cli::strip_timing(a) == lpann::cli::strip_timing(b));
  CHECK_FALSE(lpann::cli::strip_timing(a).contains("timing"));

  // The checker itself rejects a broken report.
  json broken = a;
  broken["success_rate"] = 2;
  broken.erase("ladder");
  CHECK(schema_check::validate(schema(), broken).size() == 2);

  std::ofstream(dir / "bad.json") << "{\"n\": ";
  CHECK(run_cli({"bench", "--spec", dir / "bad.json", "--out", dir / "c.json"}).code == 2);
}
