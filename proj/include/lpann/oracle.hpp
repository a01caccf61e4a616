#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lpann/geometry.hpp"
#include "lpann/random.hpp"
#include "lpann/recursive_ann.hpp"

namespace lpann {

enum class Distribution { gaussian, uniform_cube, clustered };

Distribution parse_distribution(const std::string& name);
std::string to_string(Distribution dist);

/// gaussian: N(0, 1) coordinates. uniform-cube: U[-1, 1]. clustered: 16 centers drawn
/// N(0, 8^2), points are a uniformly chosen center plus N(0, 1) noise.
PointSet sample_points(std::size_t n, std::size_t d, Distribution dist, Rng& rng);

struct NearestNeighbor {
  Index id = 0;
  double distance = 0;
};

/// Exhaustive scan; ties go to the lowest id.
NearestNeighbor exact_nn(const PointSet& dataset, std::span<const double> q, const NormParam& p);

struct TrialSpec {
  std::size_t n = 1000;
  std::size_t d = 32;
  double p = 4;
  double r = 1;
  double rho = 0.9;  // planted distance, <= r
  Distribution distribution = Distribution::gaussian;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
};

struct PlantedInstance {
  PointSet dataset;
  Vector query;
  Index planted = 0;
};

/// n - 1 background points plus one planted point at a uniformly random id; the query
/// sits at l_p distance rho from the planted point along a random Gaussian direction.
PlantedInstance make_planted_instance(const TrialSpec& spec);

/// What run_trials needs from an index under test.
class AnnIndex {
 public:
  struct Answer {
    Index id = 0;
    double distance = 0;
  };
  virtual ~AnnIndex() = default;
  virtual std::optional<Answer> query(std::span<const double> q) const = 0;
  virtual std::optional<SpaceReport> space() const { return std::nullopt; }
};

using Builder = std::function<std::unique_ptr<AnnIndex>(const PointSet& dataset, std::uint64_t seed)>;

/// Builds LpSchemes with `config` (its seed replaced per build).
Builder lp_scheme_builder(const SchemeConfig& config);
/// Builds a single L2Scheme; answers carry l_2 distances.
Builder l2_builder(double r, double delta_fail);

struct TrialOutcome {
  std::size_t trial = 0;
  std::optional<Index> returned;
  double returned_distance = 0;  // meaningful when returned
  double exact_distance = 0;
  std::optional<double> ratio;   // returned / exact; 1 when both are zero
  bool success = false;          // returned within c_target * r
  std::string build_error;
  double build_ms = 0;           // timing, excluded from equality
  double query_us = 0;           // timing, excluded from equality
};

struct Quantiles {
  double p50 = 0, p90 = 0, p99 = 0, max = 0;
};

struct TrialReport {
  TrialSpec spec;
  double c_target = 0;
  std::vector<TrialOutcome> trials;
  std::size_t successes = 0;
  double success_rate = 0;
  std::optional<Quantiles> ratio_quantiles;  // over trials with a finite ratio
  std::optional<SpaceReport> space;          // from the first trial's build
  double mean_build_ms = 0;
  double mean_query_us = 0;

  /// JSON form; timing fields only when include_timing.
  nlohmann::json to_json(bool include_timing = true) const;
};

/// One planted instance, build and query per trial; per-trial seeds derive from spec.seed.
/// Build failures are recorded and count as non-success.
TrialReport run_trials(const Builder& builder, const TrialSpec& spec, double c_target);

/// Nearest-rank quantiles of a non-empty sample.
Quantiles quantiles(std::vector<double> values);

/// Least-squares slope of log(measurement) against log(n). Needs >= 3 distinct n and
/// positive measurements.
double fit_scaling(const std::vector<std::pair<double, double>>& points);

nlohmann::json to_json(const ApproximationBound& bound);
nlohmann::json to_json(const SpaceReport& space);

}  // namespace lpann
