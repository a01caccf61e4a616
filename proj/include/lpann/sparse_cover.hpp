#pragma once

#include <cstddef>
#include <vector>

#include "lpann/geometry.hpp"

namespace lpann {

struct Cluster {
  std::vector<Index> members;  // ascending
  Index center = 0;            // designated center, always a member

  bool operator==(const Cluster&) const = default;
};

/// A (beta, radius)-sparse neighborhood cover of a finite l_p point set.
///
/// For every point x, clusters[covering_ref[x]] contains every point within `radius`
/// of x. Every cluster has l_p diameter at most `diameter_bound`.
struct SparseCover {
  std::vector<Cluster> clusters;
  std::vector<std::size_t> covering_ref;
  double beta = 0;
  double radius = 0;
  double diameter_bound = 0;

  /// Total cluster membership count, sum over clusters of |S|.
  std::size_t sparsity() const;

  bool operator==(const SparseCover&) const = default;
};

/// diameter_bound / radius for build_sparse_cover: 2 (2 ceil(beta) - 1).
double cover_diameter_factor(double beta);

/// Ball carving in phases. A phase starts with the pool of uncovered points and scans
/// them in id order; for each v still in the pool it finds the smallest j >= 0 with
///   |P(v, 2 radius (j+1))| <= n^(1/beta) |P(v, 2 radius j)|,
/// P(v, s) being the pool points within s of v, so j < beta. The kernel P(v, 2 radius j)
/// becomes covered, the cluster centered at v is every point within radius of a kernel
/// point, and P(v, 2 radius (j+1)) leaves the pool for the rest of the phase. Clusters of
/// one phase are disjoint and each phase covers at least a 1/n^(1/beta) fraction of what
/// remains. Deterministic; O(n^2 d).
SparseCover build_sparse_cover(const PointSet& points, const NormParam& p, double radius, double beta);

/// The cluster index that covers the radius-ball around point x.
std::size_t cover_lookup(const SparseCover& cover, Index x);

struct CoverReport {
  bool cover_ok = false;
  double max_diameter = 0;
  std::size_t sparsity = 0;
};

/// Exhaustive check of the cover property plus measured cluster diameters.
CoverReport verify_cover(const SparseCover& cover, const PointSet& points, const NormParam& p);

}  // namespace lpann
