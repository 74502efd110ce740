#pragma once

// Periodic B-spline spaces on non-uniform grids.
//
// A KnotGrid stores one period of simple knots t_0 < ... < t_{N-1} and the
// period P; all other knots follow from t_{kN+l} = t_l + kP. The periodized
// B-spline phi_j has support [t_j, t_{j+m}] (mod P) and coefficient row j.

#include <array>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mrwave {

/// Coefficient matrix: row k is the vector coefficient c_k.
using Coeffs = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kMaxOrder = 8;

/// Euclidean modulo for indices.
inline long wrap_index(long j, long n) {
  const long r = j % n;
  return r < 0 ? r + n : r;
}

class KnotGrid {
 public:
  KnotGrid() = default;
  /// `knots` holds one period t_0..t_{N-1}; requires t_{N-1} < t_0 + period.
  KnotGrid(std::vector<double> knots, double period, int order);

  static KnotGrid uniform(int intervals, double period, int order, double start = 0.0);

  int order() const { return order_; }
  int degree() const { return order_ - 1; }
  int size() const { return static_cast<int>(knots_.size()); }
  double period() const { return period_; }
  double start() const { return knots_.front(); }
  const std::vector<double>& knots() const { return knots_; }

  /// Extended knot t_j for any integer j.
  double knot(long j) const;

  /// Reduce t into [t_0, t_0 + P).
  double reduce(double t) const;

  /// Extended index i with t_i <= t < t_{i+1}; t may be any real.
  long interval(double t) const;

  /// Values (derivative order `deriv`) of the m B-splines that are nonzero on
  /// the interval containing t. Returns the extended index of the first one;
  /// values[r] belongs to basis (first + r).
  long basis(double t, int deriv, std::span<double> values) const;

  /// All derivatives 0..max_deriv: ders(k, r) = phi^{(k)}_{first+r}(t).
  long basis_derivatives(double t, int max_deriv, Eigen::Ref<Eigen::MatrixXd> ders) const;

  int coefficient_index(long j) const { return static_cast<int>(wrap_index(j, size())); }

  /// Greville abscissa of basis j: mean of t_{j+1}..t_{j+m-1}.
  double greville(long j) const;

  /// New grid with `extra` merged in. Throws on duplicates or out-of-range knots.
  KnotGrid with_knots(std::span<const double> extra) const;

  bool contains_knot(double t) const;

  bool operator==(const KnotGrid& other) const = default;

 private:
  std::vector<double> knots_;
  double period_ = 1.0;
  int order_ = 4;
};

class SplineCurve {
 public:
  SplineCurve() = default;
  SplineCurve(KnotGrid grid, Coeffs coeffs);

  /// Constant curve with value x everywhere.
  static SplineCurve constant(KnotGrid grid, const Eigen::VectorXd& x);

  const KnotGrid& grid() const { return grid_; }
  const Coeffs& coeffs() const { return coeffs_; }
  Coeffs& coeffs() { return coeffs_; }
  int dim() const { return static_cast<int>(coeffs_.cols()); }

  /// Sum_k c_k phi_k^{(deriv)}(t); deriv must be below the spline order.
  Eigen::VectorXd eval(double t, int deriv = 0) const;
  void eval_into(double t, Eigen::Ref<Eigen::VectorXd> out) const;

 private:
  KnotGrid grid_;
  Coeffs coeffs_;
};

/// Splitting points t̂_0..t̂_N with t̂_N = t̂_0 + P. Condition l integrates over
/// [points[l], points[l+1]].
struct SplittingPoints {
  std::vector<double> points;
  int size() const { return static_cast<int>(points.size()) - 1; }
};

enum class SplittingRule {
  greville_centered,  ///< interval l is centered on the Greville point of basis l
  greville,           ///< interval l spans consecutive Greville points
};

SplittingPoints splitting_points(const KnotGrid& grid,
                                 SplittingRule rule = SplittingRule::greville_centered);

enum class QuadratureRule { gauss2, simpson };

struct QuadNode {
  double t;
  double w;
};

/// Composite nodes on every knot subinterval of [a, b].
std::vector<QuadNode> quadrature_nodes(double a, double b, const KnotGrid& grid,
                                       QuadratureRule rule);

Eigen::VectorXd integrate(const std::function<Eigen::VectorXd(double)>& f, double a, double b,
                          const KnotGrid& grid, QuadratureRule rule = QuadratureRule::gauss2);

/// Single non-periodic B-spline N^m_index on an explicit knot vector.
double bspline_value(std::span<const double> knots, int order, int index, double t);

/// Blossom of the polynomial piece of `curve` on extended interval
/// `interval`, evaluated at the m-1 arguments `args`.
Eigen::VectorXd blossom(const SplineCurve& curve, long interval, std::span<const double> args);

/// Linear weights of a blossom: result = sum_r w[r] * c_{first + r}.
struct BlossomWeights {
  long first = 0;
  std::array<double, kMaxOrder> w{};
};
BlossomWeights blossom_weights(const KnotGrid& grid, long interval, std::span<const double> args);

/// Oslo row: fine coefficient j as a combination of coarse coefficients.
/// `fine` must contain every knot of `coarse`.
BlossomWeights oslo_row(const KnotGrid& coarse, const KnotGrid& fine, int j);

/// Knot insertion (Oslo algorithm); the represented function is unchanged.
SplineCurve insert_knots(const SplineCurve& curve, std::span<const double> new_knots);

/// Re-express `curve` on `target` (any grid with equal period and order) by the
/// blossom quasi-interpolant; exact whenever the curve lies in the target space.
SplineCurve project(const SplineCurve& curve, const KnotGrid& target);

}  // namespace mrwave
