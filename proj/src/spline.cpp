#include "mrwave/spline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mrwave {

namespace {

long floor_div(long a, long b) {
  long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Minimum separation between distinct knots, relative to the period.
constexpr double kKnotGap = 1e-13;

}  // namespace

KnotGrid::KnotGrid(std::vector<double> knots, double period, int order)
    : knots_(std::move(knots)), period_(period), order_(order) {
  if (order_ < 2 || order_ > kMaxOrder) {
    throw std::invalid_argument("spline order must be in [2, " + std::to_string(kMaxOrder) + "]");
  }
  if (!(period_ > 0.0) || !std::isfinite(period_)) {
    throw std::invalid_argument("period must be positive and finite");
  }
  if (static_cast<int>(knots_.size()) < order_) {
    throw std::invalid_argument("periodic grid needs at least `order` knots per period");
  }
  const double gap = kKnotGap * period_;
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (!std::isfinite(knots_[i])) throw std::invalid_argument("non-finite knot");
    const double next = i + 1 < knots_.size() ? knots_[i + 1] : knots_.front() + period_;
    if (!(next - knots_[i] > gap)) {
      throw std::invalid_argument("knots must be strictly increasing within one period");
    }
  }
}

KnotGrid KnotGrid::uniform(int intervals, double period, int order, double start) {
  std::vector<double> k(static_cast<std::size_t>(intervals));
  for (int i = 0; i < intervals; ++i) k[i] = start + period * i / intervals;
  return KnotGrid(std::move(k), period, order);
}

double KnotGrid::knot(long j) const {
  const long n = size();
  const long q = floor_div(j, n);
  return knots_[static_cast<std::size_t>(j - q * n)] + static_cast<double>(q) * period_;
}

double KnotGrid::reduce(double t) const {
  const double t0 = start();
  double r = t - std::floor((t - t0) / period_) * period_;
  if (r >= t0 + period_) r -= period_;
  if (r < t0) r = t0;
  return r;
}

long KnotGrid::interval(double t) const {
  const double t0 = start();
  long k = static_cast<long>(std::floor((t - t0) / period_));
  double r = t - static_cast<double>(k) * period_;
  if (r >= t0 + period_) {
    r -= period_;
    ++k;
  }
  if (r < t0) {
    r += period_;
    --k;
    if (r >= t0 + period_) {  // t sits a rounding error below a period boundary
      r = t0;
      ++k;
    }
  }
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), r);
  const long i = static_cast<long>(it - knots_.begin()) - 1;
  return std::max(i, 0L) + k * size();
}

long KnotGrid::basis(double t, int deriv, std::span<double> values) const {
  if (deriv < 0 || deriv >= order_) throw std::invalid_argument("derivative order must be < m");
  Eigen::Matrix<double, kMaxOrder, kMaxOrder> ders;
  const long first = basis_derivatives(t, deriv, ders.topLeftCorner(deriv + 1, order_));
  for (int r = 0; r < order_; ++r) values[r] = ders(deriv, r);
  return first;
}

// Derivatives of the nonzero B-splines (Piegl & Tiller, algorithm A2.3) on
// the extended knot sequence.
long KnotGrid::basis_derivatives(double t, int max_deriv,
                                 Eigen::Ref<Eigen::MatrixXd> ders) const {
  if (max_deriv < 0 || max_deriv >= order_) {
    throw std::invalid_argument("derivative order must be < m");
  }
  const int p = order_ - 1;
  const long i = interval(t);
  double ndu[kMaxOrder][kMaxOrder];
  double left[kMaxOrder];
  double right[kMaxOrder];
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = t - knot(i + 1 - j);
    right[j] = knot(i + j) - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  for (int j = 0; j <= p; ++j) ders(0, j) = ndu[j][p];
  if (max_deriv > 0) {
    double a[2][kMaxOrder];
    for (int r = 0; r <= p; ++r) {
      int s1 = 0;
      int s2 = 1;
      a[0][0] = 1.0;
      for (int k = 1; k <= max_deriv; ++k) {
        double d = 0.0;
        const int rk = r - k;
        const int pk = p - k;
        if (r >= k) {
          a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
          d = a[s2][0] * ndu[rk][pk];
        }
        const int j1 = rk >= -1 ? 1 : -rk;
        const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
        for (int j = j1; j <= j2; ++j) {
          a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
          d += a[s2][j] * ndu[rk + j][pk];
        }
        if (r <= pk) {
          a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
          d += a[s2][k] * ndu[r][pk];
        }
        ders(k, r) = d;
        std::swap(s1, s2);
      }
    }
    double f = p;
    for (int k = 1; k <= max_deriv; ++k) {
      for (int j = 0; j <= p; ++j) ders(k, j) *= f;
      f *= (p - k);
    }
  }
  return i - p;
}

double KnotGrid::greville(long j) const {
  double s = 0.0;
  for (int r = 1; r < order_; ++r) s += knot(j + r);
  return s / (order_ - 1);
}

bool KnotGrid::contains_knot(double t) const {
  const double r = reduce(t);
  const double gap = kKnotGap * period_;
  const auto it = std::lower_bound(knots_.begin(), knots_.end(), r - gap);
  if (it != knots_.end() && std::abs(*it - r) <= gap) return true;
  return std::abs(start() + period_ - r) <= gap;
}

KnotGrid KnotGrid::with_knots(std::span<const double> extra) const {
  std::vector<double> merged = knots_;
  merged.reserve(knots_.size() + extra.size());
  const double t0 = start();
  for (double t : extra) {
    if (!(t >= t0 && t < t0 + period_)) {
      throw std::invalid_argument("inserted knot " + std::to_string(t) +
                                  " outside [t_0, t_0 + P)");
    }
    merged.push_back(t);
  }
  std::sort(merged.begin(), merged.end());
  const double gap = kKnotGap * period_;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const double next = i + 1 < merged.size() ? merged[i + 1] : merged.front() + period_;
    if (!(next - merged[i] > gap)) {
      throw std::invalid_argument("knot insertion would create a multiple knot at " +
                                  std::to_string(merged[i]));
    }
  }
  return KnotGrid(std::move(merged), period_, order_);
}

SplineCurve::SplineCurve(KnotGrid grid, Coeffs coeffs)
    : grid_(std::move(grid)), coeffs_(std::move(coeffs)) {
  if (coeffs_.rows() != grid_.size()) {
    throw std::invalid_argument("coefficient count must equal the number of periodic B-splines");
  }
}

SplineCurve SplineCurve::constant(KnotGrid grid, const Eigen::VectorXd& x) {
  Coeffs c(grid.size(), x.size());
  c.rowwise() = x.transpose();
  return SplineCurve(std::move(grid), std::move(c));
}

Eigen::VectorXd SplineCurve::eval(double t, int deriv) const {
  std::array<double, kMaxOrder> v{};
  const long first = grid_.basis(t, deriv, v);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
  for (int r = 0; r < grid_.order(); ++r) {
    out += v[r] * coeffs_.row(grid_.coefficient_index(first + r)).transpose();
  }
  return out;
}

void SplineCurve::eval_into(double t, Eigen::Ref<Eigen::VectorXd> out) const {
  std::array<double, kMaxOrder> v{};
  const long first = grid_.basis(t, 0, v);
  out.setZero();
  for (int r = 0; r < grid_.order(); ++r) {
    out += v[r] * coeffs_.row(grid_.coefficient_index(first + r)).transpose();
  }
}

SplittingPoints splitting_points(const KnotGrid& grid, SplittingRule rule) {
  const int n = grid.size();
  SplittingPoints sp;
  sp.points.resize(static_cast<std::size_t>(n) + 1);
  for (int l = 0; l < n; ++l) {
    sp.points[l] = rule == SplittingRule::greville
                       ? grid.greville(l - 1)
                       : 0.5 * (grid.greville(l - 1) + grid.greville(l));
  }
  sp.points[n] = sp.points[0] + grid.period();
  return sp;
}

std::vector<QuadNode> quadrature_nodes(double a, double b, const KnotGrid& grid,
                                       QuadratureRule rule) {
  std::vector<QuadNode> nodes;
  if (!(b > a)) return nodes;
  static const double kGauss = 0.5 / std::sqrt(3.0);
  long i = grid.interval(a);
  double x0 = a;
  while (x0 < b) {
    const double x1 = std::min(grid.knot(i + 1), b);
    const double h = x1 - x0;
    if (h > 0.0) {
      const double mid = 0.5 * (x0 + x1);
      if (rule == QuadratureRule::gauss2) {
        nodes.push_back({mid - kGauss * h, 0.5 * h});
        nodes.push_back({mid + kGauss * h, 0.5 * h});
      } else {
        nodes.push_back({x0, h / 6.0});
        nodes.push_back({mid, 4.0 * h / 6.0});
        nodes.push_back({x1, h / 6.0});
      }
    }
    x0 = x1;
    ++i;
  }
  return nodes;
}

Eigen::VectorXd integrate(const std::function<Eigen::VectorXd(double)>& f, double a, double b,
                          const KnotGrid& grid, QuadratureRule rule) {
  Eigen::VectorXd sum;
  for (const QuadNode& q : quadrature_nodes(a, b, grid, rule)) {
    Eigen::VectorXd v = f(q.t);
    if (sum.size() == 0) sum = Eigen::VectorXd::Zero(v.size());
    sum += q.w * v;
  }
  if (sum.size() == 0) sum = f(a) * 0.0;
  return sum;
}

double bspline_value(std::span<const double> knots, int order, int index, double t) {
  if (index < 0 || index + order >= static_cast<int>(knots.size()) + 1) {
    throw std::invalid_argument("B-spline index out of range for knot vector");
  }
  // Order-1 indicators on [index, index+order), raised by convex combination.
  std::array<double, kMaxOrder + 1> n{};
  for (int j = 0; j < order; ++j) {
    const double a = knots[index + j];
    const double b = knots[index + j + 1];
    n[j] = (a <= t && t < b) ? 1.0 : 0.0;
  }
  for (int k = 2; k <= order; ++k) {
    for (int j = 0; j + k <= order; ++j) {
      const int g = index + j;
      double v = 0.0;
      const double d1 = knots[g + k - 1] - knots[g];
      const double d2 = knots[g + k] - knots[g + 1];
      if (d1 > 0.0) v += (t - knots[g]) / d1 * n[j];
      if (d2 > 0.0) v += (knots[g + k] - t) / d2 * n[j + 1];
      n[j] = v;
    }
  }
  return n[0];
}

BlossomWeights blossom_weights(const KnotGrid& grid, long interval, std::span<const double> args) {
  const int p = grid.degree();
  // w(i, :) are the weights of the running de Boor point d_i.
  double w[kMaxOrder][kMaxOrder] = {};
  for (int i = 0; i <= p; ++i) w[i][i] = 1.0;
  for (int r = 1; r <= p; ++r) {
    const double x = args[r - 1];
    for (int i = p; i >= r; --i) {
      const long g = interval - p + i;
      const double tg = grid.knot(g);
      const double alpha = (x - tg) / (grid.knot(g + p + 1 - r) - tg);
      for (int c = 0; c <= p; ++c) w[i][c] = (1.0 - alpha) * w[i - 1][c] + alpha * w[i][c];
    }
  }
  BlossomWeights out;
  out.first = interval - p;
  for (int c = 0; c <= p; ++c) out.w[c] = w[p][c];
  return out;
}

Eigen::VectorXd blossom(const SplineCurve& curve, long interval, std::span<const double> args) {
  const KnotGrid& g = curve.grid();
  const BlossomWeights bw = blossom_weights(g, interval, args);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(curve.dim());
  for (int r = 0; r < g.order(); ++r) {
    out += bw.w[r] * curve.coeffs().row(g.coefficient_index(bw.first + r)).transpose();
  }
  return out;
}

BlossomWeights oslo_row(const KnotGrid& coarse, const KnotGrid& fine, int j) {
  const int p = coarse.degree();
  std::array<double, kMaxOrder> args{};
  for (int r = 0; r < p; ++r) args[r] = fine.knot(j + 1 + r);
  const long mu = coarse.interval(fine.knot(j));
  return blossom_weights(coarse, mu, std::span<const double>(args.data(), p));
}

namespace {

Coeffs apply_rows(const SplineCurve& curve, const std::vector<BlossomWeights>& rows) {
  const KnotGrid& g = curve.grid();
  Coeffs out = Coeffs::Zero(static_cast<long>(rows.size()), curve.dim());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (int r = 0; r < g.order(); ++r) {
      out.row(static_cast<long>(j)) +=
          rows[j].w[r] * curve.coeffs().row(g.coefficient_index(rows[j].first + r));
    }
  }
  return out;
}

}  // namespace

SplineCurve insert_knots(const SplineCurve& curve, std::span<const double> new_knots) {
  if (new_knots.empty()) return curve;
  KnotGrid fine = curve.grid().with_knots(new_knots);
  std::vector<BlossomWeights> rows(static_cast<std::size_t>(fine.size()));
  for (int j = 0; j < fine.size(); ++j) rows[j] = oslo_row(curve.grid(), fine, j);
  Coeffs c = apply_rows(curve, rows);
  return SplineCurve(std::move(fine), std::move(c));
}

SplineCurve project(const SplineCurve& curve, const KnotGrid& target) {
  const KnotGrid& src = curve.grid();
  if (src.order() != target.order() || std::abs(src.period() - target.period()) >
                                           1e-14 * src.period()) {
    throw std::invalid_argument("projection requires equal order and period");
  }
  if (src == target) return curve;
  const int p = target.degree();
  std::vector<BlossomWeights> rows(static_cast<std::size_t>(target.size()));
  std::array<double, kMaxOrder> args{};
  for (int j = 0; j < target.size(); ++j) {
    for (int r = 0; r < p; ++r) args[r] = target.knot(j + 1 + r);
    const long mu = src.interval(target.greville(j));
    rows[j] = blossom_weights(src, mu, std::span<const double>(args.data(), p));
  }
  Coeffs c = apply_rows(curve, rows);
  return SplineCurve(target, std::move(c));
}

}  // namespace mrwave
