#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lpann {

using Index = std::uint32_t;
using Vector = std::vector<double>;

/// Norm exponent p of an l_p space. Always finite and >= 1.
class NormParam {
 public:
  explicit NormParam(double p);

  double value() const noexcept { return p_; }
  /// True when p is 2^m for a small m; distances then use exact squaring.
  bool is_power_of_two() const noexcept { return squarings_ >= 0; }

 private:
  friend double abs_pow(double a, const NormParam& p);
  friend double root(double s, const NormParam& p);

  double p_;
  int squarings_ = -1;  // m when p == 2^m, else -1
};

/// |a|^p, with exact repeated squaring when p is a power of two.
double abs_pow(double a, const NormParam& p);
/// s^(1/p) for s >= 0.
double root(double s, const NormParam& p);

/// Dense row-major point storage. Row i is the point with local id i.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t dim) : dim_(dim) {}
  PointSet(std::size_t dim, std::vector<double> coords);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const noexcept { return size() == 0; }

  std::span<const double> operator[](std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  /// Appends a point; rejects wrong length and non-finite coordinates.
  void push_back(std::span<const double> v);
  void reserve(std::size_t n) { coords_.reserve(n * dim_); }

  const std::vector<double>& coords() const noexcept { return coords_; }

  bool operator==(const PointSet&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

/// (sum_i |x_i - y_i|^p)^(1/p). Throws usage error on length mismatch and
/// numeric-range error if the result is not finite.
double lp_distance(std::span<const double> x, std::span<const double> y, const NormParam& p);
double lp_norm(std::span<const double> x, const NormParam& p);

/// (p/q) * C0^(p/q - 1): the factor the Mazur map M_{p,q} is scaled down by so that it
/// is non-expansive on the l_p ball of radius C0.
double mazur_scale_factor(double p, double q, double c0);

struct MazurMapSpec {
  double p = 0;
  double q = 0;
  double c0 = 0;
  double scale = 0;  // mazur_scale_factor(p, q, c0)
};

MazurMapSpec make_mazur_spec(double p, double q, double c0);

/// Coordinate-wise sign(v_i) |v_i|^(p/q) / scale. Inputs outside B(0, C0) are accepted.
Vector mazur_map_apply(const MazurMapSpec& spec, std::span<const double> v);
/// Same, written into out (out.size() == v.size()).
void mazur_map_apply(const MazurMapSpec& spec, std::span<const double> v, std::span<double> out);

/// Maximum pairwise l_p distance by exhaustive scan.
double subset_diameter(const std::vector<Vector>& points, const NormParam& p);
double subset_diameter(const PointSet& points, std::span<const Index> ids, const NormParam& p);

}  // namespace lpann
