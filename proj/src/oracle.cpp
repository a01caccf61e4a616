#include "lpann/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "lpann/error.hpp"
#include "lpann/parallel.hpp"

namespace lpann {

using json = nlohmann::json;

Distribution parse_distribution(const std::string& name) {
  if (name == "gaussian") return Distribution::gaussian;
  if (name == "uniform" || name == "uniform-cube") return Distribution::uniform_cube;
  if (name == "clustered") return Distribution::clustered;
  throw usage_error("unknown distribution '" + name + "' (expected gaussian, uniform or clustered)");
}

std::string to_string(Distribution dist) {
  switch (dist) {
    case Distribution::gaussian:
      return "gaussian";
    case Distribution::uniform_cube:
      return "uniform";
    case Distribution::clustered:
      return "clustered";
  }
  return "gaussian";
}

PointSet sample_points(std::size_t n, std::size_t d, Distribution dist, Rng& rng) {
  if (d == 0) throw usage_error("dimension must be positive");
  std::vector<double> coords(n * d);
  std::normal_distribution<double> gauss(0.0, 1.0);
  switch (dist) {
    case Distribution::gaussian:
      for (double& c : coords) c = gauss(rng);
      break;
    case Distribution::uniform_cube: {
      std::uniform_real_distribution<double> unif(-1.0, 1.0);
      for (double& c : coords) c = unif(rng);
      break;
    }
    case Distribution::clustered: {
      constexpr std::size_t kCenters = 16;
      constexpr double kSpread = 8.0;
      std::vector<double> centers(kCenters * d);
      for (double& c : centers) c = kSpread * gauss(rng);
      std::uniform_int_distribution<std::size_t> pick(0, kCenters - 1);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = pick(rng);
        for (std::size_t k = 0; k < d; ++k) coords[i * d + k] = centers[c * d + k] + gauss(rng);
      }
      break;
    }
  }
  return PointSet(d, std::move(coords));
}

NearestNeighbor exact_nn(const PointSet& dataset, std::span<const double> q, const NormParam& p) {
  if (dataset.empty()) throw usage_error("exact_nn on an empty dataset");
  NearestNeighbor best{0, lp_distance(dataset[0], q, p)};
  for (std::size_t i = 1; i < dataset.size(); ++i) {
    const double dist = lp_distance(dataset[i], q, p);
    if (dist < best.distance) best = {static_cast<Index>(i), dist};
  }
  return best;
}

PlantedInstance make_planted_instance(const TrialSpec& spec) {
  if (spec.n == 0) throw usage_error("planted instance needs n >= 1");
  if (!(spec.rho >= 0.0 && spec.rho <= spec.r)) throw usage_error("planted distance rho must lie in [0, r]");
  const NormParam norm(spec.p);
  Rng rng(derive_seed(spec.seed, {seed_tag::dataset}));
  PlantedInstance inst;
  inst.dataset = sample_points(spec.n, spec.d, spec.distribution, rng);
  inst.planted = static_cast<Index>(std::uniform_int_distribution<std::size_t>(0, spec.n - 1)(rng));

  const auto planted = inst.dataset[inst.planted];
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector dir(spec.d);
  double norm_dir = 0.0;
  while (norm_dir == 0.0) {
    for (double& c : dir) c = gauss(rng);
    norm_dir = lp_norm(dir, norm);
  }
  inst.query.resize(spec.d);
  for (std::size_t i = 0; i < spec.d; ++i) inst.query[i] = planted[i] + spec.rho * dir[i] / norm_dir;
  return inst;
}

// ---------------------------------------------------------------------------
// Builders

namespace {

class LpSchemeIndex final : public AnnIndex {
 public:
  explicit LpSchemeIndex(LpScheme scheme) : scheme_(std::move(scheme)) {}
  std::optional<Answer> query(std::span<const double> q) const override {
    auto a = scheme_.query(q);
    if (!a) return std::nullopt;
    return Answer{a->id, a->distance};
  }
  std::optional<SpaceReport> space() const override { return space_usage(scheme_); }

 private:
  LpScheme scheme_;
};

class L2Index final : public AnnIndex {
 public:
  L2Index(std::shared_ptr<const PointSet> points, L2Scheme scheme) : points_(std::move(points)), scheme_(std::move(scheme)) {}
  std::optional<Answer> query(std::span<const double> q) const override {
    auto a = scheme_.query(q);
    if (!a) return std::nullopt;
    return Answer{*a, lp_distance((*points_)[*a], q, NormParam(2.0))};
  }

 private:
  std::shared_ptr<const PointSet> points_;
  L2Scheme scheme_;
};

}  // namespace

Builder lp_scheme_builder(const SchemeConfig& config) {
  return [config](const PointSet& dataset, std::uint64_t seed) -> std::unique_ptr<AnnIndex> {
    SchemeConfig cfg = config;
    cfg.seed = seed;
    return std::make_unique<LpSchemeIndex>(LpScheme::preprocess(dataset, cfg));
  };
}

Builder l2_builder(double r, double delta_fail) {
  return [r, delta_fail](const PointSet& dataset, std::uint64_t seed) -> std::unique_ptr<AnnIndex> {
    auto points = std::make_shared<const PointSet>(dataset);
    auto scheme = L2Scheme::build(points, r, delta_fail, seed);
    return std::make_unique<L2Index>(std::move(points), std::move(scheme));
  };
}

// ---------------------------------------------------------------------------
// Trials

Quantiles quantiles(std::vector<double> values) {
  if (values.empty()) throw usage_error("quantiles of an empty sample");
  std::sort(values.begin(), values.end());
  auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
    return values[std::clamp<std::size_t>(k, 1, values.size()) - 1];
  };
  return {rank(0.5), rank(0.9), rank(0.99), values.back()};
}

TrialReport run_trials(const Builder& builder, const TrialSpec& spec, double c_target) {
  if (spec.trials == 0) throw usage_error("trial count must be positive");
  TrialReport report;
  report.spec = spec;
  report.c_target = c_target;
  report.trials.resize(spec.trials);
  std::vector<std::optional<SpaceReport>> spaces(spec.trials);
  const NormParam norm(spec.p);

  parallel_for(spec.trials, [&](std::size_t i) {
    TrialOutcome& out = report.trials[i];
    out.trial = i;
    TrialSpec ts = spec;
    ts.seed = derive_seed(spec.seed, {seed_tag::trial, i});
    const PlantedInstance inst = make_planted_instance(ts);
    out.exact_distance = exact_nn(inst.dataset, inst.query, norm).distance;

    std::unique_ptr<AnnIndex> index;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      index = builder(inst.dataset, derive_seed(spec.seed, {seed_tag::build, i}));
    } catch (const std::exception& e) {
      out.build_error = e.what();
      return;
    }
    const auto t1 = std::chrono::steady_clock::now();
    auto answer = index->query(inst.query);
    const auto t2 = std::chrono::steady_clock::now();
    out.build_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    out.query_us = std::chrono::duration<double, std::micro>(t2 - t1).count();
    if (i == 0) spaces[0] = index->space();
    if (!answer) return;
    out.returned = answer->id;
    out.returned_distance = answer->distance;
    out.success = answer->distance <= c_target * spec.r;
    if (out.exact_distance > 0.0)
      out.ratio = answer->distance / out.exact_distance;
    else if (answer->distance == 0.0)
      out.ratio = 1.0;
  });

  std::vector<double> ratios;
  double build_total = 0, query_total = 0;
  for (const auto& t : report.trials) {
    if (t.success) ++report.successes;
    if (t.ratio) ratios.push_back(*t.ratio);
    build_total += t.build_ms;
    query_total += t.query_us;
  }
  report.success_rate = static_cast<double>(report.successes) / static_cast<double>(spec.trials);
  if (!ratios.empty()) report.ratio_quantiles = quantiles(std::move(ratios));
  report.space = spaces[0];
  report.mean_build_ms = build_total / static_cast<double>(spec.trials);
  report.mean_query_us = query_total / static_cast<double>(spec.trials);
  return report;
}

double fit_scaling(const std::vector<std::pair<double, double>>& points) {
  std::set<double> distinct;
  for (const auto& [n, m] : points) {
    if (!(n > 0.0) || !(m > 0.0)) throw usage_error("scaling fit needs positive n and measurements");
    distinct.insert(n);
  }
  if (distinct.size() < 3) throw usage_error("scaling fit needs at least 3 distinct n values");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [n, m] : points) {
    const double x = std::log(n), y = std::log(m);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double k = static_cast<double>(points.size());
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json quantiles_json(const std::optional<Quantiles>& q) {
  if (!q) return nullptr;
  return {{"p50", q->p50}, {"p90", q->p90}, {"p99", q->p99}, {"max", q->max}};
}

}  // namespace

json to_json(const ApproximationBound& bound) {
  json levels = json::array();
  for (const auto& lb : bound.levels)
    levels.push_back(
        {{"t", lb.t}, {"c0_hat", lb.c0_hat}, {"k", lb.k}, {"beta_eff", lb.beta_eff}, {"ladder", lb.ladder}, {"c_t", lb.c_t}});
  return {{"requested_p", bound.requested_p}, {"working_p", bound.working_p}, {"holder_factor", bound.holder_factor},
          {"beta", bound.beta},               {"c_working", bound.c_working}, {"c_p", bound.c_p},
          {"levels", std::move(levels)}};
}

json to_json(const SpaceReport& space) {
  json per_level = json::array();
  for (const auto& l : space.per_level)
    per_level.push_back({{"t", l.t}, {"ladder_index", l.ladder_index}, {"stored_points", l.stored_points}});
  return {{"per_level", std::move(per_level)},
          {"total", space.total},
          {"substructures", space.substructures},
          {"primitive_copies", space.primitive_copies},
          {"level_copies", space.level_copies}};
}

json TrialReport::to_json(bool include_timing) const {
  json trials_json = json::array();
  for (const auto& t : trials) {
    json j = {{"trial", t.trial},
              {"returned", t.returned ? json(*t.returned) : json(nullptr)},
              {"returned_distance", t.returned ? json(t.returned_distance) : json(nullptr)},
              {"exact_distance", t.exact_distance},
              {"ratio", t.ratio ? json(*t.ratio) : json(nullptr)},
              {"success", t.success}};
    if (!t.build_error.empty()) j["build_error"] = t.build_error;
    if (include_timing) j["timing"] = {{"build_ms", t.build_ms}, {"query_us", t.query_us}};
    trials_json.push_back(std::move(j));
  }
  json out = {{"spec",
               {{"n", spec.n},
                {"d", spec.d},
                {"p", spec.p},
                {"r", spec.r},
                {"rho", spec.rho},
                {"distribution", lpann::to_string(spec.distribution)},
                {"trials", spec.trials},
                {"seed", spec.seed}}},
              {"c_target", c_target},
              {"successes", successes},
              {"success_rate", success_rate},
              {"ratio_quantiles", quantiles_json(ratio_quantiles)},
              {"space", space ? lpann::to_json(*space) : json(nullptr)},
              {"trials", std::move(trials_json)}};
  if (include_timing) out["timing"] = {{"build_ms", mean_build_ms}, {"mean_query_us", mean_query_us}};
  return out;
}

}  // namespace lpann
