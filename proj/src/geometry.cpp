#include "lpann/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lpann/error.hpp"

namespace lpann {

namespace {

constexpr int kMaxSquarings = 10;

double diff_sum(std::span<const double> x, std::span<const double> y, const NormParam& p, double scale) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += abs_pow((x[i] - y[i]) / scale, p);
  return s;
}

}  // namespace

NormParam::NormParam(double p) : p_(p) {
  if (!std::isfinite(p) || p < 1.0) throw usage_error("norm exponent must be finite and >= 1, got " + std::to_string(p));
  double v = 1.0;
  for (int m = 0; m <= kMaxSquarings; ++m, v *= 2.0) {
    if (v == p) {
      squarings_ = m;
      break;
    }
  }
}

double abs_pow(double a, const NormParam& p) {
  a = std::fabs(a);
  if (p.squarings_ >= 0) {
    for (int i = 0; i < p.squarings_; ++i) a *= a;
    return a;
  }
  return std::pow(a, p.p_);
}

double root(double s, const NormParam& p) {
  if (p.squarings_ >= 0) {
    for (int i = 0; i < p.squarings_; ++i) s = std::sqrt(s);
    return s;
  }
  return std::pow(s, 1.0 / p.p_);
}

PointSet::PointSet(std::size_t dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
  if (dim_ == 0 && !coords_.empty()) throw usage_error("point set with zero dimension");
  if (dim_ != 0 && coords_.size() % dim_ != 0) throw usage_error("coordinate count is not a multiple of the dimension");
  for (double c : coords_)
    if (!std::isfinite(c)) throw usage_error("non-finite coordinate in point set");
}

void PointSet::push_back(std::span<const double> v) {
  if (v.size() != dim_)
    throw usage_error("point has dimension " + std::to_string(v.size()) + ", expected " + std::to_string(dim_));
  for (double c : v)
    if (!std::isfinite(c)) throw usage_error("non-finite coordinate");
  coords_.insert(coords_.end(), v.begin(), v.end());
}

double lp_distance(std::span<const double> x, std::span<const double> y, const NormParam& p) {
  if (x.size() != y.size())
    throw usage_error("dimension mismatch: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  double s = diff_sum(x, y, p, 1.0);
  if (std::isfinite(s) && s > 0.0 && s >= 1e-280) return root(s, p);
  // Overflow or underflow of the power sum: rescale by the largest difference.
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::fabs(x[i] - y[i]));
  if (m == 0.0) return 0.0;
  if (!std::isfinite(m)) throw numeric_range_error("l_p distance overflows");
  double r = m * root(diff_sum(x, y, p, m), p);
  if (!std::isfinite(r)) throw numeric_range_error("l_p distance overflows");
  return r;
}

double lp_norm(std::span<const double> x, const NormParam& p) {
  static thread_local Vector zeros;
  zeros.assign(x.size(), 0.0);
  return lp_distance(x, zeros, p);
}

double mazur_scale_factor(double p, double q, double c0) {
  if (!(q >= 1.0 && q < p && std::isfinite(p)) || !(c0 > 0.0) || !std::isfinite(c0))
    throw usage_error("mazur scale factor requires 1 <= q < p < inf and C0 > 0");
  double ratio = p / q;
  if (ratio == 2.0) return 2.0 * c0;
  return ratio * std::pow(c0, ratio - 1.0);
}

MazurMapSpec make_mazur_spec(double p, double q, double c0) {
  return MazurMapSpec{p, q, c0, mazur_scale_factor(p, q, c0)};
}

void mazur_map_apply(const MazurMapSpec& spec, std::span<const double> v, std::span<double> out) {
  if (out.size() != v.size()) throw usage_error("mazur map output size mismatch");
  const double ratio = spec.p / spec.q;
  const bool square = ratio == 2.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    double a = v[i];
    double mag = square ? a * a : std::pow(std::fabs(a), ratio);
    double o = std::copysign(mag, a) / spec.scale;
    if (a == 0.0) o = 0.0;
    if (!std::isfinite(o)) throw numeric_range_error("mazur map produced a non-finite coordinate at index " + std::to_string(i));
    out[i] = o;
  }
}

Vector mazur_map_apply(const MazurMapSpec& spec, std::span<const double> v) {
  Vector out(v.size());
  mazur_map_apply(spec, v, out);
  return out;
}

double subset_diameter(const std::vector<Vector>& points, const NormParam& p) {
  if (points.empty()) throw usage_error("diameter of an empty point list");
  double best = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) best = std::max(best, lp_distance(points[i], points[j], p));
  return best;
}

double subset_diameter(const PointSet& points, std::span<const Index> ids, const NormParam& p) {
  if (ids.empty()) throw usage_error("diameter of an empty point list");
  double best = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j)
      best = std::max(best, lp_distance(points[ids[i]], points[ids[j]], p));
  return best;
}

}  // namespace lpann
