// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "../schema_check.hpp"
#include "lpann/commands.hpp"
#include "lpann/dataset_io.hpp"
#include "lpann/oracle.hpp"
#include "lpann/recursive_ann.hpp"
#include "lpann/sparse_cover.hpp"

using namespace lpann;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double naive_lp(std::span<const double> x, std::span<const double> y, double p) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::pow(std::fabs(x[i] - y[i]), p);
  return std::pow(s, 1.0 / p);
}

// ---------------------------------------------------------------------------
// 1. Mazur distortion

Outcome mazur_distortion() {
  struct Case {
    double p, q, c0;
  };
  const std::size_t d = 16, pairs = 10000;
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t violations = 0;
  double worst_upper = -INFINITY, worst_lower = -INFINITY;
  for (const Case c : {Case{4, 2, 1}, Case{4, 2, 10}, Case{8, 4, 2}}) {
    const MazurMapSpec spec = make_mazur_spec(c.p, c.q, c.c0);
    auto sample = [&](std::size_t i) {
      Vector v(d);
      for (double& x : v) x = g(rng);
      const double norm = naive_lp(v, Vector(d, 0.0), c.p);
      // Every fourth point sits on the sphere, the rest spread over radii.
      const double rad = i % 4 == 0 ? c.c0 : c.c0 * u(rng);
      for (double& x : v) x *= rad / norm;
      return v;
    };
    const double slack = 1e-9 * c.c0;
    for (std::size_t i = 0; i < pairs; ++i) {
      const Vector x = sample(i), y = sample(i + 1);
      const double dp = naive_lp(x, y, c.p);
      const double dq = naive_lp(mazur_map_apply(spec, x), mazur_map_apply(spec, y), c.q);
      const double lower = (c.q / c.p) * std::pow(2 * c.c0, 1 - c.p / c.q) * std::pow(dp, c.p / c.q);
      violations += dq > dp + slack;
      violations += lower > dq + slack;
      worst_upper = std::max(worst_upper, (dq - dp) / c.c0);
      worst_lower = std::max(worst_lower, (lower - dq) / c.c0);
    }
  }
  return {violations == 0, fmt("3 x %zu pairs, violations %zu, max (upper-gap)/C0 %.3g, max (lower-gap)/C0 %.3g", pairs,
                               violations, worst_upper, worst_lower)};
}

// ---------------------------------------------------------------------------
// 2. Sparse covers

Outcome sparse_covers() {
  const NormParam p(4);
  bool ok = true;
  std::string detail;
  double c_sp = 0;
  for (std::size_t d : {8, 32}) {
    const std::vector<double> radii = d == 8 ? std::vector<double>{0.5, 1.0, 2.0} : std::vector<double>{1.5, 2.0, 2.5};
    for (double beta : {2.0, 3.0}) {
      for (double radius : radii) {
        std::vector<std::pair<double, double>> fit;
        std::size_t clusters_at_max = 0;
        for (std::size_t n : {250, 500, 1000, 2000}) {
          Rng rng(derive_seed(42, {n, d}));
          const PointSet pts = sample_points(n, d, Distribution::gaussian, rng);
          const SparseCover cover = build_sparse_cover(pts, p, radius, beta);
          const CoverReport rep = verify_cover(cover, pts, p);
          ok &= rep.cover_ok && rep.max_diameter <= cover.diameter_bound;
          fit.emplace_back(static_cast<double>(n), static_cast<double>(rep.sparsity));
          c_sp = std::max(c_sp, static_cast<double>(rep.sparsity) / std::pow(static_cast<double>(n), 1 + 1 / beta));
          clusters_at_max = cover.clusters.size();
        }
        const double slope = fit_scaling(fit);
        const double limit = 1 + 1 / beta + 0.15;
        ok &= slope <= limit;
        detail += fmt(" d=%zu,b=%g,R=%g:slope %.3f/%.3f (%zu clusters at n=2000);", d, beta, radius, slope, limit,
                      clusters_at_max);
      }
    }
  }
  return {ok, fmt("C_SP %.3f;", c_sp) + detail};
}

// ---------------------------------------------------------------------------
// 3. Base schemes

class CoarseIndex final : public AnnIndex {
 public:
  CoarseIndex(std::shared_ptr<const PointSet> pts, CoarseScheme s, double p) : pts_(std::move(pts)), s_(std::move(s)), p_(p) {}
  std::optional<Answer> query(std::span<const double> q) const override {
    auto a = s_.query(q);
    if (!a) return std::nullopt;
    return Answer{*a, lp_distance((*pts_)[*a], q, p_)};
  }

 private:
  std::shared_ptr<const PointSet> pts_;
  CoarseScheme s_;
  NormParam p_;
};

Outcome base_schemes() {
  TrialSpec l2;
  l2.n = 500;
  l2.d = 32;
  l2.p = 2;
  l2.r = 1.0;
  l2.rho = 0.9;
  l2.trials = 200;
  l2.seed = 301;
  const double delta_fail = 0.05;
  const TrialReport l2_rep = run_trials(l2_builder(l2.r, delta_fail), l2, 2.0);
  const bool l2_ok = l2_rep.success_rate >= 1 - delta_fail - 0.05;

  TrialSpec coarse = l2;
  coarse.p = 4;
  coarse.r = 0.01;
  coarse.rho = 0.009;
  coarse.seed = 302;
  const double c0 = CoarseScheme::approximation(coarse.d, coarse.p);
  const Builder builder = [&](const PointSet& data, std::uint64_t seed) -> std::unique_ptr<AnnIndex> {
    auto pts = std::make_shared<const PointSet>(data);
    return std::make_unique<CoarseIndex>(pts, CoarseScheme::build(pts, NormParam(coarse.p), coarse.r, seed), coarse.p);
  };
  const TrialReport c_rep = run_trials(builder, coarse, c0);
  bool within = true;
  for (const auto& t : c_rep.trials)
    if (t.returned) within &= t.returned_distance <= c0 * coarse.r;
  const bool coarse_ok = c_rep.success_rate >= 2.0 / 3.0 && within;
  return {l2_ok && coarse_ok,
          fmt("l2 success %.3f (need >= %.2f); coarse success %.3f (need >= 0.667), all answers within c0 r = %.4g: %s",
              l2_rep.success_rate, 1 - delta_fail - 0.05, c_rep.success_rate, c0 * coarse.r, within ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 4. End-to-end contract

Outcome end_to_end() {
  bool ok = true;
  std::string detail;
  for (double p : {4.0, 8.0}) {
    SchemeConfig cfg;
    cfg.p = p;
    cfg.r = 0.01;
    TrialSpec spec;
    spec.n = 1000;
    spec.d = 32;
    spec.p = p;
    spec.r = cfg.r;
    spec.rho = 0.9 * cfg.r;
    spec.trials = 300;
    spec.seed = 400 + static_cast<std::uint64_t>(p);
    const ApproximationBound bound = approximation_bound(cfg, spec.d);
    const TrialReport rep = run_trials(lp_scheme_builder(cfg), spec, bound.c_p);
    ok &= rep.success_rate >= 2.0 / 3.0;
    detail += fmt(" p=%g (working %g): c_p %.2f, success %.3f, p90 ratio %.4f;", p, bound.working_p, bound.c_p,
                  rep.success_rate, rep.ratio_quantiles ? rep.ratio_quantiles->p90 : NAN);
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 5. Claim-level containment

Outcome claim_containment() {
  TrialSpec spec;
  spec.n = 1000;
  spec.d = 32;
  spec.p = 4;
  spec.r = 0.01;
  spec.rho = 0.009;
  std::size_t eligible = 0, contained = 0;
  for (std::uint64_t t = 0; t < 60; ++t) {
    spec.seed = derive_seed(500, {t});
    const PlantedInstance inst = make_planted_instance(spec);
    SchemeConfig cfg;
    cfg.p = spec.p;
    cfg.r = spec.r;
    cfg.seed = derive_seed(501, {t});
    const LpScheme scheme = LpScheme::preprocess(inst.dataset, cfg);
    const LevelScheme& root = scheme.root();
    const PointSet& pts = root.points();
    const NormParam norm(root.norm());
    const double r = root.radius();
    const Index star = exact_nn(pts, inst.query, norm).id;
    const std::size_t d = pts.dim();
    // Walk every copy's ladder from its own base answer.
    for (const SchemeCopy& copy : root.copies()) {
      auto base = best_of(copy.coarse, pts, inst.query, norm);
      if (!base) continue;
      Index cur = *base;
      double cur_d = lp_distance(pts[cur], inst.query, norm);
      for (const LadderLevel& level : copy.ladder) {
        const std::size_t ci = cover_lookup(level.cover, cur);
        const Cluster& cluster = level.cover.clusters[ci];
        if (cur_d <= level.base_approx * r) {
          ++eligible;
          contained += std::binary_search(cluster.members.begin(), cluster.members.end(), star);
        }
        std::optional<Index> candidate;
        const LadderCluster& lc = level.clusters[ci];
        if (!lc.child) {
          candidate = cluster.center;
        } else {
          Vector diff(d);
          for (std::size_t i = 0; i < d; ++i) diff[i] = inst.query[i] - pts[cluster.center][i];
          if (auto a = lc.child->query(mazur_map_apply(lc.map, diff))) candidate = cluster.members[*a];
        }
        if (candidate) {
          const double cd = lp_distance(pts[*candidate], inst.query, norm);
          if (cd < cur_d) {
            cur = *candidate;
            cur_d = cd;
          }
        }
      }
    }
  }
  const double rate = eligible ? static_cast<double>(contained) / static_cast<double>(eligible) : 0.0;
  return {eligible > 0 && rate >= 0.95, fmt("%zu of %zu eligible lookups contain the exact nearest neighbor (%.4f, need >= 0.95)",
                                            contained, eligible, rate)};
}

// ---------------------------------------------------------------------------
// 6. Space growth

Outcome space_growth() {
  std::vector<std::pair<double, double>> fit;
  bool exact = true;
  std::string totals;
  for (std::size_t n : {250, 500, 1000, 2000}) {
    Rng rng(derive_seed(600, {n}));
    const PointSet pts = sample_points(n, 32, Distribution::gaussian, rng);
    SchemeConfig cfg;
    cfg.p = 4;
    cfg.r = 0.01;
    cfg.seed = 601;
    const LpScheme scheme = LpScheme::preprocess(pts, cfg);
    const SpaceReport space = space_usage(scheme);
    std::size_t ladder_sparsity = 0, ladder_counts = 0;
    for (const LadderSpace& ls : space.ladders) {
      exact &= ls.cluster_points == ls.sparsity;
      ladder_sparsity += ls.sparsity;
    }
    for (const LevelSpace& l : space.per_level)
      if (l.ladder_index > 0) ladder_counts += l.stored_points;
    exact &= ladder_counts == ladder_sparsity;
    fit.emplace_back(static_cast<double>(n), static_cast<double>(space.total));
    totals += fmt(" %zu:%zu", n, space.total);
  }
  const double slope = fit_scaling(fit);
  const double limit = 1 + 2 / std::log2(4.0) + 0.2;
  return {slope <= limit && exact, fmt("slope %.3f (limit %.2f), per-ladder counts equal sparsities: %s; totals", slope, limit,
                                       exact ? "yes" : "no") + totals};
}

// ---------------------------------------------------------------------------
// 7. Approximation calculator

Outcome calculator() {
  bool ok = true;
  std::string detail;
  for (double p : {4.0, 8.0, 16.0}) {
    SchemeConfig cfg;
    cfg.p = p;
    cfg.clamp_to_log_dim = false;
    const double got = approximation_bound(cfg, 64, BoundConstants::literal).c_working;
    const double closed = std::pow(16 * std::log2(p), std::log2(p));
    const double alt = std::pow(p, 4 + std::log2(std::log2(p)));
    const double err = std::max(std::fabs(got - closed) / closed, std::fabs(got - alt) / alt);
    ok &= err <= 1e-12;
    detail += fmt(" p=%g: %.10g vs %.10g (rel err %.2g);", p, got, closed, err);
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 8. Determinism

int spawn(const std::string& args) {
  const std::string cmd = std::string(LPANN_CLI_PATH) + " " + args;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "lpann_acceptance_bench";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const json spec = {{"n_grid", {250, 500, 1000}}, {"d", 16}, {"p", 4}, {"r", 0.05}, {"trials", 20}, {"seed", 8}};
  std::ofstream((dir / "spec.json").string()) << spec.dump();
  const std::string a = (dir / "a.json").string(), b = (dir / "b.json").string();
  if (spawn("bench --spec " + (dir / "spec.json").string() + " --out " + a) != 0 ||
      spawn("bench --spec " + (dir / "spec.json").string() + " --out " + b) != 0)
    return {false, "bench command failed"};
  const json ja = json::parse(read_file(a)), jb = json::parse(read_file(b));
  const bool same = lpann::cli::strip_timing(ja) == lpann::cli::strip_timing(jb);
  const auto errors = schema_check::validate(json::parse(read_file(LPANN_SCHEMA_PATH)), ja);
  fs::remove_all(dir);
  return {same && errors.empty(), fmt("reports identical excluding timing: %s; schema errors: %zu; success_rate %.3f",
                                      same ? "yes" : "no", errors.size(), ja["success_rate"].get<double>())};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0: no runtime limit
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "mazur distortion", 10, mazur_distortion},
      {2, "sparse cover", 120, sparse_covers},
      {3, "base scheme contracts", 60, base_schemes},
      {4, "end-to-end near-neighbor contract", 600, end_to_end},
      {5, "claim-level containment", 0, claim_containment},
      {6, "space growth", 0, space_growth},
      {7, "approximation calculator", 0, calculator},
      {8, "determinism", 0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs >= c.limit_s) {
      o.pass = false;
      o.detail += fmt(" runtime over %.0f s limit", c.limit_s);
    }
    failed += !o.pass;
    std::printf("%s [%d] %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
