#include "lpann/recursive_ann.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <string>

#include "lpann/error.hpp"
#include "lpann/parallel.hpp"
#include "lpann/random.hpp"

namespace lpann {

namespace {

constexpr double kLeafDeltaFail = 1.0 / 3.0;

std::uint64_t coordinate_hash(std::span<const double> v) {
  std::uint64_t h = 0x452821e638d01377ULL;
  for (double c : v) {
    if (c == 0.0) c = 0.0;  // fold -0.0 into +0.0
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(c));
  }
  return h;
}

bool equal_coords(std::span<const double> a, std::span<const double> b) { return std::equal(a.begin(), a.end(), b.begin()); }

}  // namespace

// ---------------------------------------------------------------------------
// Norm plan and approximation bounds

NormPlan plan_norm(const SchemeConfig& config, std::size_t d) {
  if (!std::isfinite(config.p) || config.p < 2.0) throw usage_error("scheme requires p >= 2, got " + std::to_string(config.p));
  if (!(config.r > 0.0) || !std::isfinite(config.r)) throw usage_error("scheme radius must be positive");
  if (!(config.delta > 0.0 && config.delta <= 1.0)) throw usage_error("delta must be in (0, 1]");
  if (d == 0) throw usage_error("dimension must be positive");
  if (config.amplification.primitive_copies == 0) throw usage_error("primitive copy count must be positive");

  NormPlan plan;
  plan.requested_p = config.p;
  double p = config.p;
  if (config.clamp_to_log_dim) p = std::min(p, std::max(2.0, std::log2(static_cast<double>(d))));
  plan.working_p = std::exp2(std::floor(std::log2(p)));
  plan.holder_factor =
      plan.working_p == config.p ? 1.0 : std::pow(static_cast<double>(d), 1.0 / plan.working_p - 1.0 / config.p);
  plan.beta = std::log2(plan.working_p) / config.delta;
  if (plan.working_p > 2.0 && !(plan.beta > 1.0)) throw usage_error("cover beta must exceed 1");
  plan.level_copies = config.amplification.level_copies != 0
                          ? config.amplification.level_copies
                          : static_cast<std::size_t>(std::ceil(std::log2(3.0 * std::log2(plan.working_p))));
  plan.level_copies = std::max<std::size_t>(1, plan.level_copies);
  return plan;
}

double c_new(double p, double t, double c_t, double beta_eff, double c_base) {
  const double e = t / p;
  return std::pow(p / t, e) * std::pow(c_t, e) * std::pow(4.0 * beta_eff * c_base, 1.0 - e);
}

std::size_t ladder_length(double c0_hat) {
  if (!(c0_hat > 2.0)) return 0;
  return static_cast<std::size_t>(std::max(0.0, std::ceil(std::log2(std::log2(c0_hat)))));
}

ApproximationBound approximation_bound(const SchemeConfig& config, std::size_t d, BoundConstants constants) {
  const NormPlan plan = plan_norm(config, d);
  ApproximationBound out;
  out.requested_p = plan.requested_p;
  out.working_p = plan.working_p;
  out.holder_factor = plan.holder_factor;
  out.beta = plan.beta;

  const bool literal = constants == BoundConstants::literal;
  LevelBound leaf;
  leaf.t = 2.0;
  leaf.c_t = literal ? 16.0 * plan.beta : L2Scheme::kApprox;
  leaf.ladder = {leaf.c_t};
  out.levels.push_back(leaf);

  for (double t = 4.0; t <= plan.working_p; t *= 2.0) {
    const double c_child = out.levels.back().c_t;
    LevelBound lb;
    lb.t = t;
    lb.c0_hat = CoarseScheme::approximation(d, t);
    lb.k = ladder_length(lb.c0_hat);
    lb.beta_eff = literal ? plan.beta : cover_diameter_factor(plan.beta);
    lb.ladder.push_back(lb.c0_hat);
    for (std::size_t j = 1; j <= lb.k; ++j) {
      const double prev = lb.ladder.back();
      const double next = c_new(t, t / 2.0, c_child, lb.beta_eff, prev);
      lb.ladder.push_back(literal ? next : std::min(prev, next));
    }
    lb.c_t = literal ? 16.0 * plan.beta * c_child : lb.ladder.back();
    out.levels.push_back(std::move(lb));
  }
  out.c_working = out.levels.back().c_t;
  out.c_p = out.c_working * out.holder_factor;
  return out;
}

const LevelBound& BuildContext::bound(double t) const {
  for (const auto& b : bounds)
    if (b.t == t) return b;
  throw usage_error("no approximation bound for l_" + std::to_string(t));
}

// ---------------------------------------------------------------------------
// LevelScheme

LevelScheme LevelScheme::build(std::shared_ptr<const PointSet> points, double t, double r, const BuildContext& ctx,
                               std::uint64_t seed) {
  if (!points || points->empty()) throw usage_error("scheme over an empty point set");
  LevelScheme s;
  s.t_ = t;
  s.r_ = r;
  s.norm_ = NormParam(t);
  s.points_ = std::move(points);
  const LevelBound& bound = ctx.bound(t);
  s.approx_ = bound.c_t;

  const std::size_t n_copies = t == 2.0 ? 1 : ctx.level_copies;
  s.copies_.resize(n_copies);
  const PointSet& pts = *s.points_;
  const std::size_t d = pts.dim();

  // Covers depend only on the points and the ladder radii, so the copies share them.
  std::vector<SparseCover> covers;
  if (t > 2.0) {
    double prev = CoarseScheme::approximation(d, t);
    for (std::size_t j = 1; j <= bound.k; ++j) {
      covers.push_back(build_sparse_cover(pts, s.norm_, 2.0 * prev * r, ctx.beta));
      const double beta_eff = covers.back().diameter_bound / covers.back().radius;
      prev = std::min(prev, c_new(t, t / 2.0, ctx.bound(t / 2.0).c_t, beta_eff, prev));
    }
  }

  parallel_for(n_copies, [&](std::size_t c) {
    SchemeCopy& copy = s.copies_[c];
    const std::uint64_t cseed = derive_seed(seed, {seed_tag::level_copy, c});
    if (t == 2.0) {
      for (std::size_t i = 0; i < ctx.primitive_copies; ++i)
        copy.l2.push_back(L2Scheme::build(s.points_, r, kLeafDeltaFail, derive_seed(cseed, {seed_tag::l2, i})));
      return;
    }
    for (std::size_t i = 0; i < ctx.primitive_copies; ++i)
      copy.coarse.push_back(CoarseScheme::build(s.points_, s.norm_, r, derive_seed(cseed, {seed_tag::coarse, i})));

    const double child_t = t / 2.0;
    const double c_child = ctx.bound(child_t).c_t;
    double prev = copy.coarse.front().c0();
    for (std::size_t j = 1; j <= bound.k; ++j) {
      LadderLevel level;
      level.index = j;
      level.base_approx = prev;
      level.cover = covers[j - 1];
      level.beta_eff = level.cover.diameter_bound / level.cover.radius;
      level.new_approx = std::min(prev, c_new(t, child_t, c_child, level.beta_eff, prev));
      level.clusters.resize(level.cover.clusters.size());
      const MazurMapSpec map = make_mazur_spec(t, child_t, level.cover.diameter_bound);

      parallel_for(level.clusters.size(), [&](std::size_t ci) {
        const Cluster& cluster = level.cover.clusters[ci];
        LadderCluster& lc = level.clusters[ci];
        lc.map = map;
        if (cluster.members.size() == 1) return;
        auto images = std::make_shared<PointSet>(d);
        images->reserve(cluster.members.size());
        const auto center = pts[cluster.center];
        Vector diff(d), image(d);
        for (Index m : cluster.members) {
          const auto x = pts[m];
          for (std::size_t i = 0; i < d; ++i) diff[i] = x[i] - center[i];
          try {
            mazur_map_apply(map, diff, image);
          } catch (const Error& e) {
            throw Error(e.kind(), std::string(e.what()) + " (l_" + std::to_string(t) + " ladder level " +
                                      std::to_string(j) + ", cluster " + std::to_string(ci) + ", point " +
                                      std::to_string(m) + ")");
          }
          images->push_back(image);
        }
        lc.child = std::make_unique<LevelScheme>(
            build(std::move(images), child_t, r, ctx, derive_seed(cseed, {seed_tag::cluster, j, ci})));
      });
      prev = level.new_approx;
      copy.ladder.push_back(std::move(level));
    }
  });
  return s;
}

LevelScheme LevelScheme::assemble(std::shared_ptr<const PointSet> points, double t, double r, double approx,
                                  std::vector<SchemeCopy> copies) {
  LevelScheme s;
  s.t_ = t;
  s.r_ = r;
  s.approx_ = approx;
  s.norm_ = NormParam(t);
  s.points_ = std::move(points);
  s.copies_ = std::move(copies);
  return s;
}

std::optional<Index> LevelScheme::query_copy(const SchemeCopy& copy, std::span<const double> q, LevelTrace* trace) const {
  const PointSet& pts = *points_;
  if (t_ == 2.0) return best_of(copy.l2, pts, q, norm_);

  auto base = best_of(copy.coarse, pts, q, norm_);
  if (trace) trace->base = base;
  if (!base) return std::nullopt;

  Index cur = *base;
  double cur_d = lp_distance(pts[cur], q, norm_);
  const std::size_t d = pts.dim();
  Vector diff(d), image(d);
  for (const LadderLevel& level : copy.ladder) {
    const std::size_t ci = cover_lookup(level.cover, cur);
    const Cluster& cluster = level.cover.clusters[ci];
    const LadderCluster& lc = level.clusters[ci];
    std::optional<Index> candidate;
    if (!lc.child) {
      candidate = cluster.center;
    } else {
      const auto center = pts[cluster.center];
      for (std::size_t i = 0; i < d; ++i) diff[i] = q[i] - center[i];
      bool mapped = true;
      try {
        mazur_map_apply(lc.map, diff, image);
      } catch (const Error&) {
        mapped = false;  // query far outside the cluster's ball; this step fails
      }
      if (mapped) {
        if (auto a = lc.child->query(image)) candidate = cluster.members[*a];
      }
    }
    TraceStep step;
    step.ladder_index = level.index;
    step.input = cur;
    step.cluster = ci;
    step.center = cluster.center;
    step.candidate = candidate;
    if (candidate) {
      const double cd = lp_distance(pts[*candidate], q, norm_);
      if (cd < cur_d) {
        cur = *candidate;
        cur_d = cd;
      }
    }
    step.kept = cur;
    if (trace) trace->steps.push_back(step);
  }
  return cur;
}

std::optional<Index> LevelScheme::query(std::span<const double> q, LevelTrace* trace) const {
  if (q.size() != points_->dim())
    throw usage_error("query has dimension " + std::to_string(q.size()) + ", index has dimension " +
                      std::to_string(points_->dim()));
  std::optional<Index> best;
  double best_d = 0;
  LevelTrace scratch;
  for (std::size_t c = 0; c < copies_.size(); ++c) {
    scratch = LevelTrace{};
    scratch.copy = c;
    auto a = query_copy(copies_[c], q, trace ? &scratch : nullptr);
    if (!a) continue;
    const double dist = lp_distance((*points_)[*a], q, norm_);
    if (!best || dist < best_d) {
      best = a;
      best_d = dist;
      if (trace) *trace = scratch;
    }
  }
  if (!best && trace && !copies_.empty()) {
    *trace = LevelTrace{};
    query_copy(copies_.front(), q, trace);
  }
  return best;
}

// ---------------------------------------------------------------------------
// LpScheme

LpScheme LpScheme::preprocess(const PointSet& dataset, const SchemeConfig& config) {
  if (dataset.empty()) throw usage_error("cannot build an index over an empty dataset");
  const std::size_t d = dataset.dim();
  LpScheme s;
  s.config_ = config;
  s.plan_ = plan_norm(config, d);
  s.bound_ = approximation_bound(config, d);
  s.original_size_ = dataset.size();

  // Coincident points are stored once, under their lowest id.
  auto unique = std::make_shared<PointSet>(d);
  std::unordered_map<std::uint64_t, std::vector<Index>> seen;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto& bucket = seen[coordinate_hash(dataset[i])];
    bool dup = false;
    for (Index local : bucket)
      if (equal_coords((*unique)[local], dataset[i])) {
        dup = true;
        break;
      }
    if (dup) continue;
    bucket.push_back(static_cast<Index>(unique->size()));
    unique->push_back(dataset[i]);
    s.original_ids_.push_back(static_cast<Index>(i));
  }

  BuildContext ctx;
  ctx.beta = s.plan_.beta;
  ctx.primitive_copies = config.amplification.primitive_copies;
  ctx.level_copies = s.plan_.level_copies;
  ctx.bounds = s.bound_.levels;
  s.root_ = std::make_unique<LevelScheme>(LevelScheme::build(
      std::move(unique), s.plan_.working_p, config.r * s.plan_.holder_factor, ctx, derive_seed(config.seed, {seed_tag::build})));
  s.index_exact();
  return s;
}

void LpScheme::index_exact() {
  exact_.clear();
  const PointSet& pts = root_->points();
  for (std::size_t i = 0; i < pts.size(); ++i) exact_[coordinate_hash(pts[i])].push_back(static_cast<Index>(i));
}

std::optional<QueryAnswer> LpScheme::query(std::span<const double> q) const {
  const PointSet& pts = root_->points();
  if (q.size() != pts.dim())
    throw usage_error("query has dimension " + std::to_string(q.size()) + ", index has dimension " + std::to_string(pts.dim()));
  if (auto it = exact_.find(coordinate_hash(q)); it != exact_.end()) {
    for (Index local : it->second)
      if (equal_coords(pts[local], q)) {
        QueryAnswer a;
        a.id = original_ids_[local];
        a.exact_hit = true;
        return a;
      }
  }
  LevelTrace trace;
  auto local = root_->query(q, &trace);
  if (!local) return std::nullopt;
  QueryAnswer a;
  a.id = original_ids_[*local];
  a.distance = lp_distance(pts[*local], q, NormParam(config_.p));
  if (trace.base) trace.base = original_ids_[*trace.base];
  for (auto& step : trace.steps) {
    step.input = original_ids_[step.input];
    step.center = original_ids_[step.center];
    if (step.candidate) step.candidate = original_ids_[*step.candidate];
    step.kept = original_ids_[step.kept];
  }
  a.trace = std::move(trace);
  return a;
}

// ---------------------------------------------------------------------------
// Space accounting

namespace {

void account(const LevelScheme& node, std::size_t depth, std::map<std::pair<double, std::size_t>, std::size_t>& levels,
             SpaceReport& report) {
  const double t = node.norm();
  const std::size_t m = node.points().size();
  auto add = [&](std::size_t j, std::size_t count) {
    levels[{t, j}] += count;
    report.total += count;
  };
  add(0, m);
  ++report.substructures;
  for (const SchemeCopy& copy : node.copies()) {
    for (const auto& l2 : copy.l2) {
      add(0, l2.stored_points());
      ++report.substructures;
    }
    for (const auto& coarse : copy.coarse) {
      add(0, coarse.stored_points());
      ++report.substructures;
    }
    for (const LadderLevel& level : copy.ladder) {
      const std::size_t sparsity = level.cover.sparsity();
      add(level.index, sparsity);
      ++report.substructures;
      LadderSpace ls;
      ls.t = t;
      ls.depth = depth;
      ls.ladder_index = level.index;
      ls.sparsity = sparsity;
      for (const LadderCluster& lc : level.clusters) {
        if (lc.child) {
          ls.cluster_points += lc.child->points().size();
          account(*lc.child, depth + 1, levels, report);
        } else {
          ls.cluster_points += 1;
        }
      }
      report.ladders.push_back(ls);
    }
  }
}

}  // namespace

SpaceReport space_usage(const LpScheme& scheme) {
  SpaceReport report;
  report.primitive_copies = scheme.config().amplification.primitive_copies;
  report.level_copies = scheme.plan().level_copies;
  std::map<std::pair<double, std::size_t>, std::size_t> levels;
  account(scheme.root(), 0, levels, report);
  for (const auto& [key, count] : levels) report.per_level.push_back({key.first, key.second, count});
  return report;
}

// ---------------------------------------------------------------------------
// Nearest-neighbor wrapper

NnsIndex::NnsIndex(const PointSet& dataset, double p, double c_slack, const SchemeConfig& base)
    : dataset_(dataset), norm_(p) {
  if (dataset_.empty()) throw usage_error("cannot search an empty dataset");
  if (!(c_slack > 0.0) || !std::isfinite(c_slack)) throw usage_error("c_slack must be positive");
  double min_nonzero = std::numeric_limits<double>::infinity();
  double diameter = 0.0;
  for (std::size_t i = 0; i < dataset_.size(); ++i)
    for (std::size_t j = i + 1; j < dataset_.size(); ++j) {
      const double dist = lp_distance(dataset_[i], dataset_[j], norm_);
      diameter = std::max(diameter, dist);
      if (dist > 0.0) min_nonzero = std::min(min_nonzero, dist);
    }
  if (!std::isfinite(min_nonzero)) {
    radii_ = {1.0};
  } else {
    double r = min_nonzero / 2.0;
    for (;;) {
      radii_.push_back(r);
      if (r >= diameter) break;
      r *= 1.0 + c_slack;
    }
  }
  schemes_.reserve(radii_.size());
  for (std::size_t j = 0; j < radii_.size(); ++j) {
    SchemeConfig cfg = base;
    cfg.p = p;
    cfg.r = radii_[j];
    cfg.seed = derive_seed(base.seed, {seed_tag::radius, j});
    schemes_.push_back(LpScheme::preprocess(dataset_, cfg));
  }
  approximation_ = schemes_.front().c_p() * (1.0 + c_slack);
}

Index NnsIndex::search(std::span<const double> q) const {
  std::optional<QueryAnswer> best;
  auto attempt = [&](std::size_t j) -> std::optional<QueryAnswer> {
    auto a = schemes_[j].query(q);
    if (!a) return std::nullopt;
    if (!best || a->distance < best->distance) best = a;
    if (a->distance <= schemes_[j].c_p() * radii_[j]) return a;
    return std::nullopt;
  };
  std::size_t lo = 0;
  std::size_t hi = radii_.size() - 1;
  auto answer = attempt(hi);
  if (!answer) return best ? best->id : 0;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (auto a = attempt(mid)) {
      answer = a;
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return best->id;
}

Index nns_search(const PointSet& dataset, double p, double c_slack, std::span<const double> q, std::uint64_t seed) {
  SchemeConfig cfg;
  cfg.p = p;
  cfg.seed = seed;
  return NnsIndex(dataset, p, c_slack, cfg).search(q);
}

}  // namespace lpann
