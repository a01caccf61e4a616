#include "lpann/sparse_cover.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lpann/error.hpp"

namespace lpann {

std::size_t SparseCover::sparsity() const {
  std::size_t total = 0;
  for (const auto& c : clusters) total += c.members.size();
  return total;
}

double cover_diameter_factor(double beta) { return 2.0 * (2.0 * std::ceil(beta) - 1.0); }

SparseCover build_sparse_cover(const PointSet& points, const NormParam& p, double radius, double beta) {
  const std::size_t n = points.size();
  if (n == 0) throw usage_error("sparse cover of an empty point set");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw usage_error("cover radius must be positive");
  if (!(beta > 1.0) || !std::isfinite(beta)) throw usage_error("cover beta must be > 1");

  SparseCover cover;
  cover.beta = beta;
  cover.radius = radius;
  cover.diameter_bound = cover_diameter_factor(beta) * radius;
  cover.covering_ref.assign(n, 0);

  const double growth = std::pow(static_cast<double>(n), 1.0 / beta);
  const auto max_j = static_cast<std::size_t>(std::ceil(beta)) - 1;
  const double step = 2.0 * radius;

  std::vector<char> covered(n, 0), pool(n, 0);
  std::vector<double> dist(n);
  std::vector<Index> kernel;
  std::size_t remaining = n;

  while (remaining > 0) {
    for (std::size_t i = 0; i < n; ++i) pool[i] = !covered[i];
    for (std::size_t v = 0; v < n; ++v) {
      if (!pool[v]) continue;
      for (std::size_t i = 0; i < n; ++i) dist[i] = lp_distance(points[v], points[i], p);
      auto pool_ball = [&](std::size_t j) {
        const double rad = step * static_cast<double>(j);
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) count += pool[i] && dist[i] <= rad;
        return count;
      };
      std::size_t j = 0;
      std::size_t inner = pool_ball(0);
      while (j < max_j) {
        const std::size_t outer = pool_ball(j + 1);
        if (static_cast<double>(outer) <= growth * static_cast<double>(inner)) break;
        inner = outer;
        ++j;
      }

      const double kernel_rad = step * static_cast<double>(j);
      const double pool_rad = step * static_cast<double>(j + 1);
      const std::size_t ci = cover.clusters.size();
      kernel.clear();
      for (std::size_t i = 0; i < n; ++i) {
        if (!pool[i]) continue;
        if (dist[i] <= kernel_rad) {
          kernel.push_back(static_cast<Index>(i));
          covered[i] = 1;
          cover.covering_ref[i] = ci;
          --remaining;
        }
        if (dist[i] <= pool_rad) pool[i] = 0;
      }

      Cluster cluster;
      cluster.center = static_cast<Index>(v);
      const double reach = kernel_rad + radius;
      for (std::size_t x = 0; x < n; ++x) {
        if (dist[x] > reach * (1.0 + 1e-12)) continue;
        for (Index u : kernel) {
          if (lp_distance(points[u], points[x], p) <= radius) {
            cluster.members.push_back(static_cast<Index>(x));
            break;
          }
        }
      }
      cover.clusters.push_back(std::move(cluster));
    }
  }
  return cover;
}

std::size_t cover_lookup(const SparseCover& cover, Index x) {
  if (x >= cover.covering_ref.size())
    throw usage_error("unknown point id " + std::to_string(x) + " in cover of " + std::to_string(cover.covering_ref.size()) +
                      " points");
  return cover.covering_ref[x];
}

CoverReport verify_cover(const SparseCover& cover, const PointSet& points, const NormParam& p) {
  CoverReport report;
  report.sparsity = cover.sparsity();
  report.cover_ok = cover.covering_ref.size() == points.size();
  for (const auto& c : cover.clusters) {
    if (c.members.empty() || !std::binary_search(c.members.begin(), c.members.end(), c.center)) report.cover_ok = false;
    if (!c.members.empty()) report.max_diameter = std::max(report.max_diameter, subset_diameter(points, c.members, p));
  }
  if (!report.cover_ok) return report;
  for (std::size_t x = 0; x < points.size() && report.cover_ok; ++x) {
    const std::size_t ci = cover.covering_ref[x];
    if (ci >= cover.clusters.size()) {
      report.cover_ok = false;
      break;
    }
    const auto& members = cover.clusters[ci].members;
    for (std::size_t z = 0; z < points.size(); ++z) {
      if (lp_distance(points[x], points[z], p) <= cover.radius &&
          !std::binary_search(members.begin(), members.end(), static_cast<Index>(z))) {
        report.cover_ok = false;
        break;
      }
    }
  }
  return report;
}

}  // namespace lpann
