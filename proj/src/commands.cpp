#include "lpann/commands.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "lpann/dataset_io.hpp"
#include "lpann/error.hpp"
#include "lpann/random.hpp"
#include "lpann/recursive_ann.hpp"

namespace lpann::cli {

using json = nlohmann::json;

std::string generate_dataset_text(const GenOptions& opt) {
  if (opt.n == 0 || opt.d == 0) throw usage_error("--n and --d must be >= 1");
  NormParam{opt.p};
  Rng rng(derive_seed(opt.seed, {seed_tag::dataset}));
  const PointSet points = sample_points(opt.n, opt.d, parse_distribution(opt.dist), rng);
  std::ostringstream ss;
  write_dataset(ss, points, opt.p);
  return ss.str();
}

void cmd_gen(const GenOptions& opt) { write_file_atomic(opt.out, generate_dataset_text(opt)); }

json cmd_build(const BuildOptions& opt) {
  const Dataset ds = read_dataset_file(opt.input);
  SchemeConfig cfg;
  cfg.p = ds.p;
  cfg.r = opt.r;
  cfg.delta = opt.delta;
  cfg.seed = opt.seed;
  cfg.clamp_to_log_dim = opt.clamp_to_log_dim;
  const LpScheme scheme = LpScheme::preprocess(ds.points, cfg);
  std::ostringstream bytes;
  scheme.save(bytes);
  write_file_atomic(opt.out, bytes.str());
  return {{"approximation_bound", to_json(scheme.bound())}, {"space", to_json(space_usage(scheme))}};
}

void cmd_query(const QueryOptions& opt, std::ostream& out) {
  std::ifstream in(opt.index, std::ios::binary);
  if (!in) throw io_error("cannot open '" + opt.index + "' for reading");
  const LpScheme scheme = LpScheme::load(in);
  const Dataset queries = read_dataset_file(opt.query_file);
  if (queries.points.dim() != scheme.dim())
    throw usage_error("query file has dimension " + std::to_string(queries.points.dim()) + " but the index has dimension " +
                      std::to_string(scheme.dim()));
  for (std::size_t i = 0; i < queries.points.size(); ++i) {
    auto a = scheme.query(queries.points[i]);
    if (a)
      out << a->id << ' ' << format_double(a->distance) << '\n';
    else
      out << "-1 inf\n";
  }
}

// ---------------------------------------------------------------------------
// Bench

BenchSpec parse_bench_spec(const json& j) {
  std::vector<std::string> errors;
  BenchSpec spec;
  if (!j.is_object()) throw usage_error("bench spec must be a JSON object");

  auto number = [&](const char* key, bool required, auto& target, auto check, const char* rule) {
    using T = std::decay_t<decltype(target)>;
    if (!j.contains(key)) {
      if (required) errors.push_back(std::string("missing required field '") + key + "'");
      return;
    }
    const json& v = j.at(key);
    bool ok = std::is_floating_point_v<T> ? v.is_number() : v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
    if (ok) {
      target = v.get<T>();
      ok = check(target);
    }
    if (!ok) errors.push_back(std::string("field '") + key + "' " + rule);
  };

  static const std::set<std::string> known = {"n",     "n_grid", "d",     "p",    "r",       "rho",
                                              "distribution", "trials", "seed", "delta", "clamp_to_log_dim"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) errors.push_back("unknown field '" + key + "'");

  if (j.contains("n_grid")) {
    const json& g = j.at("n_grid");
    if (!g.is_array() || g.empty()) {
      errors.push_back("field 'n_grid' must be a non-empty array of positive integers");
    } else {
      for (const json& v : g) {
        if (!v.is_number_unsigned() || v.get<std::size_t>() == 0) {
          errors.push_back("field 'n_grid' must be a non-empty array of positive integers");
          break;
        }
        spec.n_grid.push_back(v.get<std::size_t>());
      }
    }
    if (j.contains("n")) errors.push_back("give either 'n' or 'n_grid', not both");
  } else if (j.contains("n")) {
    std::size_t n = 0;
    number("n", true, n, [](std::size_t v) { return v > 0; }, "must be a positive integer");
    if (n > 0) spec.n_grid = {n};
  } else {
    errors.push_back("missing required field 'n_grid' (or 'n')");
  }
  number("d", true, spec.d, [](std::size_t v) { return v > 0; }, "must be a positive integer");
  number("p", true, spec.p, [](double v) { return std::isfinite(v) && v >= 2.0; }, "must be a number >= 2");
  number("r", true, spec.r, [](double v) { return std::isfinite(v) && v > 0.0; }, "must be a positive number");
  spec.rho = 0.9 * spec.r;
  number("rho", false, spec.rho, [](double v) { return std::isfinite(v) && v >= 0.0; }, "must be a non-negative number");
  if (spec.rho > spec.r) errors.push_back("field 'rho' must not exceed 'r'");
  number("trials", true, spec.trials, [](std::size_t v) { return v > 0; }, "must be a positive integer");
  number("seed", false, spec.seed, [](std::uint64_t) { return true; }, "must be a non-negative integer");
  number("delta", false, spec.delta, [](double v) { return v > 0.0 && v <= 1.0; }, "must lie in (0, 1]");
  if (j.contains("distribution")) {
    try {
      spec.distribution = parse_distribution(j.at("distribution").get<std::string>());
    } catch (const std::exception&) {
      errors.push_back("field 'distribution' must be one of gaussian, uniform, clustered");
    }
  }
  if (j.contains("clamp_to_log_dim")) {
    if (j.at("clamp_to_log_dim").is_boolean())
      spec.clamp_to_log_dim = j.at("clamp_to_log_dim").get<bool>();
    else
      errors.push_back("field 'clamp_to_log_dim' must be a boolean");
  }
  if (!errors.empty()) {
    std::string msg = "invalid bench spec:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw usage_error(msg);
  }
  return spec;
}

json run_bench(const BenchSpec& spec) {
  SchemeConfig cfg;
  cfg.p = spec.p;
  cfg.r = spec.r;
  cfg.delta = spec.delta;
  cfg.seed = spec.seed;
  cfg.clamp_to_log_dim = spec.clamp_to_log_dim;
  const ApproximationBound bound = approximation_bound(cfg, spec.d);
  const NormPlan plan = plan_norm(cfg, spec.d);

  json runs = json::array();
  std::vector<std::pair<double, double>> space_points;
  std::vector<double> all_ratios;
  std::size_t successes = 0, total_trials = 0;
  double build_ms = 0, query_us = 0;
  std::optional<SpaceReport> last_space;
  std::set<std::size_t> distinct_n;

  for (std::size_t g = 0; g < spec.n_grid.size(); ++g) {
    TrialSpec ts;
    ts.n = spec.n_grid[g];
    ts.d = spec.d;
    ts.p = spec.p;
    ts.r = spec.r;
    ts.rho = spec.rho;
    ts.distribution = spec.distribution;
    ts.trials = spec.trials;
    ts.seed = derive_seed(spec.seed, {seed_tag::trial, g});
    const TrialReport rep = run_trials(lp_scheme_builder(cfg), ts, bound.c_p);
    successes += rep.successes;
    total_trials += rep.trials.size();
    for (const auto& t : rep.trials)
      if (t.ratio) all_ratios.push_back(*t.ratio);
    build_ms += rep.mean_build_ms * static_cast<double>(rep.trials.size());
    query_us += rep.mean_query_us * static_cast<double>(rep.trials.size());
    json run = {{"n", ts.n},
                {"trials", rep.trials.size()},
                {"successes", rep.successes},
                {"success_rate", rep.success_rate},
                {"ratio_quantiles", rep.ratio_quantiles ? json{{"p50", rep.ratio_quantiles->p50},
                                                               {"p90", rep.ratio_quantiles->p90},
                                                               {"p99", rep.ratio_quantiles->p99},
                                                               {"max", rep.ratio_quantiles->max}}
                                                        : json(nullptr)},
                {"space_total", rep.space ? json(rep.space->total) : json(nullptr)}};
    runs.push_back(std::move(run));
    if (rep.space) {
      space_points.emplace_back(static_cast<double>(ts.n), static_cast<double>(rep.space->total));
      last_space = rep.space;
    }
    distinct_n.insert(ts.n);
  }

  json ratio_q = nullptr;
  if (!all_ratios.empty()) {
    const Quantiles q = quantiles(all_ratios);
    ratio_q = {{"p50", q.p50}, {"p90", q.p90}, {"p99", q.p99}, {"max", q.max}};
  }
  json space = {{"per_level", json::array()}, {"total", nullptr}, {"fit_slope", nullptr}};
  if (last_space) {
    const json s = to_json(*last_space);
    space["per_level"] = s.at("per_level");
    space["total"] = s.at("total");
  }
  if (distinct_n.size() >= 3 && space_points.size() == spec.n_grid.size()) space["fit_slope"] = fit_scaling(space_points);

  const double trials_d = static_cast<double>(total_trials);
  return {{"config",
           {{"n_grid", spec.n_grid},
            {"d", spec.d},
            {"p", spec.p},
            {"r", spec.r},
            {"rho", spec.rho},
            {"distribution", to_string(spec.distribution)},
            {"trials", spec.trials},
            {"seed", spec.seed},
            {"delta", spec.delta},
            {"clamp_to_log_dim", spec.clamp_to_log_dim},
            {"working_p", plan.working_p},
            {"beta", plan.beta},
            {"level_copies", plan.level_copies},
            {"primitive_copies", cfg.amplification.primitive_copies}}},
          {"approximation_bound", to_json(bound)},
          {"ladder", bound.levels.back().ladder},
          {"success_rate", static_cast<double>(successes) / trials_d},
          {"ratio_quantiles", ratio_q},
          {"space", std::move(space)},
          {"runs", std::move(runs)},
          {"timing", {{"build_ms", build_ms / trials_d}, {"mean_query_us", query_us / trials_d}}}};
}

void cmd_bench(const std::string& spec_path, const std::string& out_path) {
  json j;
  try {
    j = json::parse(read_file(spec_path));
  } catch (const json::parse_error& e) {
    throw parse_error(spec_path + ": " + e.what());
  }
  const json report = run_bench(parse_bench_spec(j));
  write_file_atomic(out_path, report.dump(2) + "\n");
}

json strip_timing(json report) {
  if (report.is_object()) {
    report.erase("timing");
    for (auto& [_, v] : report.items()) v = strip_timing(v);
  } else if (report.is_array()) {
    for (auto& v : report) v = strip_timing(v);
  }
  return report;
}

// ---------------------------------------------------------------------------
// CLI

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"l_p approximate near-neighbor index: generate, build, query, bench"};
  app.name("lpann");
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset file");
  gen_cmd->add_option("--n", gen.n, "Number of points")->required();
  gen_cmd->add_option("--d", gen.d, "Dimension")->required();
  gen_cmd->add_option("--p", gen.p, "Norm exponent written to the header");
  gen_cmd->add_option("--dist", gen.dist, "gaussian | uniform | clustered");
  gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_option("--out", gen.out, "Output path")->required();

  BuildOptions build;
  bool no_clamp = false;
  auto* build_cmd = app.add_subcommand("build", "Build an index from a dataset file");
  build_cmd->add_option("--input", build.input, "Dataset file")->required();
  build_cmd->add_option("--r", build.r, "Near-neighbor radius")->required();
  build_cmd->add_option("--delta", build.delta, "Space/approximation knob in (0, 1]");
  build_cmd->add_option("--seed", build.seed, "Random seed");
  build_cmd->add_flag("--no-clamp", no_clamp, "Do not clamp p to log2(d)");
  build_cmd->add_option("--out", build.out, "Index output path")->required();

  QueryOptions query;
  auto* query_cmd = app.add_subcommand("query", "Query an index with points from a dataset file");
  query_cmd->add_option("--index", query.index, "Index file")->required();
  query_cmd->add_option("--query-file", query.query_file, "Queries in dataset format (p ignored)")->required();

  std::string spec_path, report_path;
  auto* bench_cmd = app.add_subcommand("bench", "Run a planted-instance benchmark campaign");
  bench_cmd->add_option("--spec", spec_path, "Bench spec JSON")->required();
  bench_cmd->add_option("--out", report_path, "Report JSON output path")->required();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "lpann: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*gen_cmd) {
      cmd_gen(gen);
    } else if (*build_cmd) {
      build.clamp_to_log_dim = !no_clamp;
      out << cmd_build(build).dump(2) << '\n';
    } else if (*query_cmd) {
      cmd_query(query, out);
    } else if (*bench_cmd) {
      cmd_bench(spec_path, report_path);
    }
  } catch (const Error& e) {
    err << "lpann: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "lpann: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace lpann::cli
