#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "lpann/base_schemes.hpp"
#include "lpann/geometry.hpp"
#include "lpann/sparse_cover.hpp"

namespace lpann {

struct AmplificationPolicy {
  /// Independent copies of each 2/3-success primitive (coarse base, l2 leaf).
  std::size_t primitive_copies = 3;
  /// Independent copies of every norm level above l2; 0 means ceil(log2(3 log2 p)).
  std::size_t level_copies = 0;

  bool operator==(const AmplificationPolicy&) const = default;
};

struct SchemeConfig {
  double p = 4.0;
  double r = 1.0;
  /// Space/approximation knob; the cover parameter is beta = log2(p) / delta.
  double delta = 1.0;
  std::uint64_t seed = 0;
  /// Clamp p to log2(d) before rounding down to a power of two.
  bool clamp_to_log_dim = true;
  AmplificationPolicy amplification;

  bool operator==(const SchemeConfig&) const = default;
};

/// How a requested p is realized: the scheme runs in l_{working_p}, working_p a power of
/// two <= p, and the answer bound picks up the Hoelder factor d^(1/working_p - 1/p).
struct NormPlan {
  double requested_p = 0;
  double working_p = 0;
  double holder_factor = 1;
  double beta = 0;
  std::size_t level_copies = 1;
};

NormPlan plan_norm(const SchemeConfig& config, std::size_t d);

/// Approximation after one refinement step from l_p through an l_t scheme:
/// (p/t)^(t/p) c_t^(t/p) (4 beta_eff c_base)^(1 - t/p).
double c_new(double p, double t, double c_t, double beta_eff, double c_base);

/// Number of refinement steps for an initial approximation c0_hat: ceil(log2 log2 c0_hat).
std::size_t ladder_length(double c0_hat);

struct LevelBound {
  double t = 0;
  double c0_hat = 0;
  std::size_t k = 0;
  double beta_eff = 0;
  std::vector<double> ladder;  // c_hat_0 .. c_hat_k
  double c_t = 0;
};

struct ApproximationBound {
  double requested_p = 0;
  double working_p = 0;
  double holder_factor = 1;
  double beta = 0;
  double c_working = 0;  // bound in l_{working_p}
  double c_p = 0;        // c_working * holder_factor
  std::vector<LevelBound> levels;  // t = 2, 4, ..., working_p
};

enum class BoundConstants {
  /// Constants of this implementation: cover diameter 2 (2 ceil(beta) - 1) radius, c_2 = 2, and
  /// each ladder step keeps the better of the two iterates.
  implemented,
  /// Idealized constants: diameter beta * radius, beta = log2 p, and the per-level
  /// closed form c_t <= 16 beta c_{t/2}, giving (16 beta)^(log2 p).
  literal,
};

ApproximationBound approximation_bound(const SchemeConfig& config, std::size_t d,
                                       BoundConstants constants = BoundConstants::implemented);

class LevelScheme;

struct LadderCluster {
  MazurMapSpec map;                    // l_t -> l_{t/2}, C0 = cover.diameter_bound
  std::unique_ptr<LevelScheme> child;  // null for singleton clusters
};

struct LadderLevel {
  std::size_t index = 0;    // j >= 1
  double base_approx = 0;   // c_hat_{j-1}
  double new_approx = 0;    // c_hat_j
  double beta_eff = 0;      // cover.diameter_bound / cover.radius
  SparseCover cover;        // radius 2 c_hat_{j-1} r
  std::vector<LadderCluster> clusters;
};

/// One independent repetition of a norm level.
struct SchemeCopy {
  std::vector<L2Scheme> l2;          // t == 2
  std::vector<CoarseScheme> coarse;  // t > 2
  std::vector<LadderLevel> ladder;   // t > 2
};

struct TraceStep {
  std::size_t ladder_index = 0;
  Index input = 0;  // iterate x_{j-1} used for the cover lookup
  std::size_t cluster = 0;
  Index center = 0;
  std::optional<Index> candidate;  // lifted child answer
  Index kept = 0;                  // x_j
};

struct LevelTrace {
  std::size_t copy = 0;
  std::optional<Index> base;
  std::vector<TraceStep> steps;
};

struct BuildContext {
  double beta = 2;
  std::size_t primitive_copies = 3;
  std::size_t level_copies = 1;
  std::vector<LevelBound> bounds;  // implemented bounds, by t = 2, 4, ...

  const LevelBound& bound(double t) const;
};

/// Amplified (c_t, r)-ANN scheme for l_t over a fixed point set. t == 2 is the l2 leaf;
/// larger t is the coarse base plus a ladder of cover-and-Mazur refinement steps whose
/// children are LevelSchemes for l_{t/2}.
class LevelScheme {
 public:
  static LevelScheme build(std::shared_ptr<const PointSet> points, double t, double r, const BuildContext& ctx,
                           std::uint64_t seed);
  /// Assembles a scheme from already-built parts (used by the index loader).
  static LevelScheme assemble(std::shared_ptr<const PointSet> points, double t, double r, double approx,
                              std::vector<SchemeCopy> copies);

  /// Local id of the answer, or none when every copy fails.
  std::optional<Index> query(std::span<const double> q, LevelTrace* trace = nullptr) const;

  double norm() const noexcept { return t_; }
  double radius() const noexcept { return r_; }
  double approximation() const noexcept { return approx_; }
  const PointSet& points() const noexcept { return *points_; }
  const std::shared_ptr<const PointSet>& shared_points() const noexcept { return points_; }
  const std::vector<SchemeCopy>& copies() const noexcept { return copies_; }

 private:
  std::optional<Index> query_copy(const SchemeCopy& copy, std::span<const double> q, LevelTrace* trace) const;

  double t_ = 2;
  double r_ = 0;
  double approx_ = 0;
  NormParam norm_{2.0};
  std::shared_ptr<const PointSet> points_;
  std::vector<SchemeCopy> copies_;
};

struct QueryAnswer {
  Index id = 0;           // original dataset id (lowest id among coincident points)
  double distance = 0;    // in the requested l_p
  bool exact_hit = false; // query coincided with a stored point
  LevelTrace trace;       // top-level ids translated to original ids
};

struct LadderSpace {
  double t = 0;
  std::size_t depth = 0;
  std::size_t ladder_index = 0;
  std::size_t sparsity = 0;        // recorded by the cover
  std::size_t cluster_points = 0;  // points stored by the per-cluster structures
};

struct LevelSpace {
  double t = 0;
  std::size_t ladder_index = 0;  // 0: point storage and base schemes
  std::size_t stored_points = 0;
};

struct SpaceReport {
  std::vector<LevelSpace> per_level;
  std::vector<LadderSpace> ladders;
  std::size_t total = 0;
  std::size_t substructures = 0;
  std::size_t primitive_copies = 0;
  std::size_t level_copies = 0;
};

/// The full l_p near-neighbor index.
class LpScheme {
 public:
  static LpScheme preprocess(const PointSet& dataset, const SchemeConfig& config);

  std::optional<QueryAnswer> query(std::span<const double> q) const;

  const SchemeConfig& config() const noexcept { return config_; }
  const NormPlan& plan() const noexcept { return plan_; }
  const ApproximationBound& bound() const noexcept { return bound_; }
  double c_p() const noexcept { return bound_.c_p; }
  std::size_t dim() const noexcept { return root_->points().dim(); }
  std::size_t size() const noexcept { return original_size_; }
  const LevelScheme& root() const noexcept { return *root_; }
  /// Original id of a root-level local id.
  Index original_id(Index local) const { return original_ids_.at(local); }
  const std::vector<Index>& original_ids() const noexcept { return original_ids_; }

  void save(std::ostream& out) const;
  static LpScheme load(std::istream& in);

 private:
  void index_exact();

  SchemeConfig config_;
  NormPlan plan_;
  ApproximationBound bound_;
  std::size_t original_size_ = 0;
  std::vector<Index> original_ids_;
  std::unordered_map<std::uint64_t, std::vector<Index>> exact_;
  std::unique_ptr<LevelScheme> root_;
};

SpaceReport space_usage(const LpScheme& scheme);

/// Nearest-neighbor search through near-neighbor schemes over a geometric ladder of
/// radii r_min (1 + c_slack)^j, r_min half the smallest nonzero pairwise distance, up to
/// the dataset diameter. Returned distance is within c_p (1 + c_slack) of optimal with the
/// schemes' success probability.
class NnsIndex {
 public:
  NnsIndex(const PointSet& dataset, double p, double c_slack, const SchemeConfig& base);

  Index search(std::span<const double> q) const;

  const std::vector<double>& radii() const noexcept { return radii_; }
  double approximation() const noexcept { return approximation_; }

 private:
  PointSet dataset_;
  NormParam norm_;
  std::vector<double> radii_;
  std::vector<LpScheme> schemes_;
  double approximation_ = 0;
};

Index nns_search(const PointSet& dataset, double p, double c_slack, std::span<const double> q, std::uint64_t seed = 0);

}  // namespace lpann
