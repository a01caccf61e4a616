#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "lpann/geometry.hpp"

namespace lpann {

/// Collision probability of one p-stable (Gaussian) bucket hash of width w for two
/// points at l_2 distance c, as a function of u = w / c.
double pstable_collision_probability(double u);

/// (2, r)-ANN for l_2: L tables, each keyed by k concatenated Gaussian-projection
/// buckets of width w = 4r. Candidates are distance-checked; a query never returns a
/// point farther than 2r from q.
class L2Scheme {
 public:
  static constexpr double kApprox = 2.0;

  struct Params {
    std::size_t k = 1;
    std::size_t tables = 1;
    std::size_t max_probe = 3;
    double w = 0;
    double r = 0;
    double delta_fail = 0;
    std::uint64_t seed = 0;
  };

  /// Serialized form: projections (tables*k*d), offsets (tables*k), bucket key of every
  /// point in every table (n*tables, point-major).
  struct Parts {
    Params params;
    std::vector<double> projections;
    std::vector<double> offsets;
    std::vector<std::uint64_t> keys;
  };

  static L2Scheme build(std::shared_ptr<const PointSet> points, double r, double delta_fail, std::uint64_t seed);
  static L2Scheme from_parts(std::shared_ptr<const PointSet> points, Parts parts);

  /// First scanned candidate within 2r (l_2), at most max_probe candidates per table.
  std::optional<Index> query(std::span<const double> q) const;

  const Params& params() const noexcept { return parts_.params; }
  const Parts& parts() const noexcept { return parts_; }
  std::size_t size() const noexcept { return points_->size(); }
  /// Stored point references, one per point per table.
  std::size_t stored_points() const noexcept { return points_->size() * parts_.params.tables; }

 private:
  std::uint64_t bucket_key(std::span<const double> v, std::size_t table) const;
  void index_keys();

  std::shared_ptr<const PointSet> points_;
  Parts parts_;
  std::vector<std::unordered_map<std::uint64_t, std::vector<Index>>> buckets_;
};

/// Coarse poly(d)-approximate l_p scheme: G randomly shifted grids of cell side
/// s = 4 d r, one stored representative per occupied cell. Any point sharing the query's
/// cell is within the cell diameter s d^(1/p) = c0 r, c0 = 4 d^(1 + 1/p).
class CoarseScheme {
 public:
  struct Params {
    double p = 2;
    double r = 0;
    double side = 0;
    double c0 = 0;
    std::size_t grids = 1;
    std::uint64_t seed = 0;
  };

  struct Parts {
    Params params;
    std::vector<double> shifts;                    // grids * d
    std::vector<std::vector<Index>> representatives;  // per grid, ascending id
  };

  static double approximation(std::size_t d, double p) { return 4.0 * std::pow(static_cast<double>(d), 1.0 + 1.0 / p); }

  static CoarseScheme build(std::shared_ptr<const PointSet> points, const NormParam& p, double r, std::uint64_t seed);
  static CoarseScheme from_parts(std::shared_ptr<const PointSet> points, Parts parts);

  /// l_p-closest representative over the query's cells in all grids, re-verified to be
  /// within c0 r.
  std::optional<Index> query(std::span<const double> q) const;

  const Params& params() const noexcept { return parts_.params; }
  const Parts& parts() const noexcept { return parts_; }
  double c0() const noexcept { return parts_.params.c0; }
  std::size_t stored_points() const noexcept;

  /// Whether a and b fall in the same cell of grid g.
  bool same_cell(std::size_t g, std::span<const double> a, std::span<const double> b) const;

 private:
  std::uint64_t cell_key(std::size_t g, std::span<const double> v) const;
  void index_cells();

  std::shared_ptr<const PointSet> points_;
  Parts parts_;
  NormParam norm_{2.0};
  std::vector<std::unordered_map<std::uint64_t, Index>> cells_;
};

/// Index of the l_p-closest non-empty answer among independent copies; ties keep the
/// earliest copy.
template <class Scheme>
std::optional<Index> best_of(const std::vector<Scheme>& copies, const PointSet& points, std::span<const double> q,
                             const NormParam& p) {
  std::optional<Index> best;
  double best_d = 0;
  for (const auto& s : copies) {
    auto a = s.query(q);
    if (!a) continue;
    double dist = lp_distance(points[*a], q, p);
    if (!best || dist < best_d) {
      best = a;
      best_d = dist;
    }
  }
  return best;
}

}  // namespace lpann
