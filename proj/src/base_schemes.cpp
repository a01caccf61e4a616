#include "lpann/base_schemes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "lpann/error.hpp"
#include "lpann/random.hpp"

namespace lpann {

namespace {

std::uint64_t combine(std::uint64_t h, std::int64_t v) {
  return splitmix64(h ^ (static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

std::int64_t bucket_of(double x) {
  double f = std::floor(x);
  if (!(std::fabs(f) < 4.0e18)) throw numeric_range_error("bucket coordinate out of range");
  return static_cast<std::int64_t>(f);
}

void check_dim(std::span<const double> q, std::size_t d) {
  if (q.size() != d)
    throw usage_error("query has dimension " + std::to_string(q.size()) + ", index has dimension " + std::to_string(d));
}

}  // namespace

double pstable_collision_probability(double u) {
  if (!(u > 0.0)) return 0.0;
  const double phi_neg = 0.5 * std::erfc(u / std::numbers::sqrt2);
  return 1.0 - 2.0 * phi_neg - 2.0 / (std::sqrt(2.0 * std::numbers::pi) * u) * (1.0 - std::exp(-u * u / 2.0));
}

// ---------------------------------------------------------------------------
// L2Scheme

L2Scheme L2Scheme::build(std::shared_ptr<const PointSet> points, double r, double delta_fail, std::uint64_t seed) {
  if (!points || points->empty()) throw usage_error("l2 scheme over an empty point set");
  if (!(r > 0.0) || !std::isfinite(r)) throw usage_error("l2 scheme radius must be positive");
  if (!(delta_fail > 0.0 && delta_fail < 1.0)) throw usage_error("l2 scheme failure probability must be in (0, 1)");

  const std::size_t n = points->size();
  const std::size_t d = points->dim();
  Params params;
  params.k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(n)))));
  params.w = 4.0 * r;
  params.r = r;
  params.delta_fail = delta_fail;
  params.seed = seed;
  const double p1 = std::pow(pstable_collision_probability(4.0), static_cast<double>(params.k));
  params.tables = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::log(delta_fail) / std::log1p(-p1))));
  params.max_probe = 3 * params.tables;

  L2Scheme s;
  s.points_ = std::move(points);
  s.parts_.params = params;
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, params.w);
  s.parts_.projections.resize(params.tables * params.k * d);
  for (double& a : s.parts_.projections) a = gauss(rng);
  s.parts_.offsets.resize(params.tables * params.k);
  for (double& b : s.parts_.offsets) b = unif(rng);

  s.parts_.keys.resize(n * params.tables);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < params.tables; ++t) s.parts_.keys[i * params.tables + t] = s.bucket_key((*s.points_)[i], t);
  s.index_keys();
  return s;
}

L2Scheme L2Scheme::from_parts(std::shared_ptr<const PointSet> points, Parts parts) {
  const auto& pr = parts.params;
  const std::size_t d = points->dim();
  if (pr.k == 0 || pr.tables == 0 || !(pr.w > 0.0) || parts.projections.size() != pr.tables * pr.k * d ||
      parts.offsets.size() != pr.tables * pr.k || parts.keys.size() != points->size() * pr.tables)
    throw parse_error("inconsistent l2 scheme block sizes");
  L2Scheme s;
  s.points_ = std::move(points);
  s.parts_ = std::move(parts);
  s.index_keys();
  return s;
}

void L2Scheme::index_keys() {
  const std::size_t L = parts_.params.tables;
  buckets_.assign(L, {});
  for (std::size_t i = 0; i < points_->size(); ++i)
    for (std::size_t t = 0; t < L; ++t) buckets_[t][parts_.keys[i * L + t]].push_back(static_cast<Index>(i));
}

std::uint64_t L2Scheme::bucket_key(std::span<const double> v, std::size_t table) const {
  const auto& pr = parts_.params;
  const std::size_t d = v.size();
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::size_t j = 0; j < pr.k; ++j) {
    const double* a = parts_.projections.data() + (table * pr.k + j) * d;
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += a[i] * v[i];
    h = combine(h, bucket_of((dot + parts_.offsets[table * pr.k + j]) / pr.w));
  }
  return h;
}

std::optional<Index> L2Scheme::query(std::span<const double> q) const {
  check_dim(q, points_->dim());
  static const NormParam l2{2.0};
  const auto& pr = parts_.params;
  const double limit = kApprox * pr.r;
  for (std::size_t t = 0; t < pr.tables; ++t) {
    auto it = buckets_[t].find(bucket_key(q, t));
    if (it == buckets_[t].end()) continue;
    std::size_t scanned = 0;
    for (Index id : it->second) {
      if (scanned++ >= pr.max_probe) break;
      if (lp_distance((*points_)[id], q, l2) <= limit) return id;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// CoarseScheme

CoarseScheme CoarseScheme::build(std::shared_ptr<const PointSet> points, const NormParam& p, double r, std::uint64_t seed) {
  if (!points || points->empty()) throw usage_error("coarse scheme over an empty point set");
  if (!(r > 0.0) || !std::isfinite(r)) throw usage_error("coarse scheme radius must be positive");
  if (p.value() < 2.0) throw usage_error("coarse scheme requires p >= 2");
  const std::size_t n = points->size();
  const std::size_t d = points->dim();

  Parts parts;
  parts.params.p = p.value();
  parts.params.r = r;
  parts.params.side = 4.0 * static_cast<double>(d) * r;
  parts.params.c0 = approximation(d, p.value());
  parts.params.grids = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(8.0 * std::log(static_cast<double>(n)))));
  parts.params.seed = seed;

  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, parts.params.side);
  parts.shifts.resize(parts.params.grids * d);
  for (double& s : parts.shifts) s = unif(rng);

  CoarseScheme s;
  s.points_ = std::move(points);
  s.parts_ = std::move(parts);
  s.norm_ = p;
  // Representatives: lowest id per occupied cell.
  s.parts_.representatives.resize(s.parts_.params.grids);
  s.cells_.assign(s.parts_.params.grids, {});
  for (std::size_t g = 0; g < s.parts_.params.grids; ++g) {
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, inserted] = s.cells_[g].try_emplace(s.cell_key(g, (*s.points_)[i]), static_cast<Index>(i));
      if (inserted) s.parts_.representatives[g].push_back(static_cast<Index>(i));
    }
  }
  return s;
}

CoarseScheme CoarseScheme::from_parts(std::shared_ptr<const PointSet> points, Parts parts) {
  const auto& pr = parts.params;
  if (pr.grids == 0 || !(pr.side > 0.0) || parts.shifts.size() != pr.grids * points->dim() ||
      parts.representatives.size() != pr.grids)
    throw parse_error("inconsistent coarse scheme block sizes");
  CoarseScheme s;
  s.points_ = std::move(points);
  s.parts_ = std::move(parts);
  s.norm_ = NormParam(s.parts_.params.p);
  s.index_cells();
  return s;
}

void CoarseScheme::index_cells() {
  cells_.assign(parts_.params.grids, {});
  for (std::size_t g = 0; g < parts_.params.grids; ++g)
    for (Index id : parts_.representatives[g]) {
      if (id >= points_->size()) throw parse_error("coarse representative id out of range");
      cells_[g].emplace(cell_key(g, (*points_)[id]), id);
    }
}

std::uint64_t CoarseScheme::cell_key(std::size_t g, std::span<const double> v) const {
  const double* shift = parts_.shifts.data() + g * v.size();
  std::uint64_t h = 0x13198a2e03707344ULL ^ g;
  for (std::size_t i = 0; i < v.size(); ++i) h = combine(h, bucket_of((v[i] + shift[i]) / parts_.params.side));
  return h;
}

bool CoarseScheme::same_cell(std::size_t g, std::span<const double> a, std::span<const double> b) const {
  const double* shift = parts_.shifts.data() + g * a.size();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::floor((a[i] + shift[i]) / parts_.params.side) != std::floor((b[i] + shift[i]) / parts_.params.side))
      return false;
  return true;
}

std::size_t CoarseScheme::stored_points() const noexcept {
  std::size_t total = 0;
  for (const auto& reps : parts_.representatives) total += reps.size();
  return total;
}

std::optional<Index> CoarseScheme::query(std::span<const double> q) const {
  check_dim(q, points_->dim());
  const double limit = parts_.params.c0 * parts_.params.r;
  std::optional<Index> best;
  double best_d = 0;
  for (std::size_t g = 0; g < parts_.params.grids; ++g) {
    auto it = cells_[g].find(cell_key(g, q));
    if (it == cells_[g].end()) continue;
    const Index id = it->second;
    if (!same_cell(g, (*points_)[id], q)) continue;  // 64-bit key collision
    const double dist = lp_distance((*points_)[id], q, norm_);
    if (dist > limit) continue;
    if (!best || dist < best_d || (dist == best_d && id < *best)) {
      best = id;
      best_d = dist;
    }
  }
  return best;
}

}  // namespace lpann
