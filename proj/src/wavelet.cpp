#include "mrwave/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mrwave/cyclic_banded.hpp"
#include "mrwave/errors.hpp"

namespace mrwave {

namespace {

long cyclic_distance(long a, long b, long n) {
  const long d = wrap_index(a - b, n);
  return std::min(d, n - d);
}

Eigen::VectorXd coefficient_range(const Coeffs& c) {
  return (c.colwise().maxCoeff() - c.colwise().minCoeff()).transpose();
}

}  // namespace

KnotGrid even_subgrid(const KnotGrid& grid) {
  std::vector<double> k;
  k.reserve(static_cast<std::size_t>(grid.size() / 2 + 1));
  for (int i = 0; i < grid.size(); i += 2) k.push_back(grid.knots()[i]);
  return KnotGrid(std::move(k), grid.period(), grid.order());
}

SplineCurve pad_to_even(const SplineCurve& curve) {
  const KnotGrid& g = curve.grid();
  if (g.size() % 2 == 0) return curve;
  int widest = 0;
  for (int i = 1; i < g.size(); ++i) {
    if (g.knot(i + 1) - g.knot(i) > g.knot(widest + 1) - g.knot(widest)) widest = i;
  }
  const double mid = g.reduce(0.5 * (g.knot(widest) + g.knot(widest + 1)));
  return insert_knots(curve, std::span<const double>(&mid, 1));
}

WaveletDecomposition fwt_step(const SplineCurve& curve) {
  const KnotGrid& fine = curve.grid();
  const int n_fine = fine.size();
  const int m = fine.order();
  if (n_fine % 2 != 0) throw Error("wavelet transform needs an even knot count");
  if (n_fine < 2 * m) {
    throw Error("grid too small to decompose: N=" + std::to_string(n_fine) +
                " < 2m=" + std::to_string(2 * m));
  }
  const int half = n_fine / 2;
  const int shift = m / 2;
  KnotGrid coarse_grid = even_subgrid(fine);

  // Equation i ties fine basis 2i - m/2 to a few coarse coefficients; its
  // row is placed at the coarse index of its largest weight so the band sits
  // on the diagonal.
  std::vector<BlossomWeights> even_rows(static_cast<std::size_t>(half));
  std::vector<int> row_of(static_cast<std::size_t>(half), -1);
  std::vector<char> taken(static_cast<std::size_t>(half), 0);
  bool permuted = true;
  for (int i = 0; i < half; ++i) {
    const int j = static_cast<int>(wrap_index(2 * i - shift, n_fine));
    even_rows[i] = oslo_row(coarse_grid, fine, j);
    int best = 0;
    for (int r = 1; r < m; ++r) {
      if (even_rows[i].w[r] > even_rows[i].w[best]) best = r;
    }
    const int row = static_cast<int>(wrap_index(even_rows[i].first + best, half));
    if (taken[row]) permuted = false;
    taken[row] = 1;
    row_of[i] = row;
  }
  if (!permuted) {
    for (int i = 0; i < half; ++i) row_of[i] = i;
  }
  long bw = 0;
  for (int i = 0; i < half; ++i) {
    for (int r = 0; r < m; ++r) {
      if (even_rows[i].w[r] != 0.0) {
        bw = std::max(bw, cyclic_distance(row_of[i], even_rows[i].first + r, half));
      }
    }
  }
  CyclicBlockBandedMatrix sys(half, 1, static_cast<int>(bw));
  Eigen::MatrixXd rhs(half, curve.dim());
  for (int i = 0; i < half; ++i) {
    for (int r = 0; r < m; ++r) {
      if (even_rows[i].w[r] != 0.0) {
        sys.block(row_of[i], even_rows[i].first + r)(0, 0) += even_rows[i].w[r];
      }
    }
    const int j = static_cast<int>(wrap_index(2 * i - shift, n_fine));
    rhs.row(row_of[i]) = curve.coeffs().row(j);
  }
  Eigen::MatrixXd coarse_flat;
  if (permuted) {
    coarse_flat = CyclicBandedLU(sys).solve(rhs);
  } else {
    coarse_flat = sys.to_dense().partialPivLu().solve(rhs);
  }
  Coeffs coarse_coeffs = coarse_flat;

  WaveletDecomposition dec;
  dec.fine_grid = fine;
  dec.coarse = SplineCurve(coarse_grid, std::move(coarse_coeffs));
  dec.odd_knots.resize(static_cast<std::size_t>(half));
  dec.detail_basis.resize(static_cast<std::size_t>(half));
  dec.details = Coeffs::Zero(half, curve.dim());
  dec.value_range = coefficient_range(curve.coeffs());
  for (int k = 0; k < half; ++k) {
    const int j = static_cast<int>(wrap_index(2 * k + 1 - shift, n_fine));
    const BlossomWeights row = oslo_row(coarse_grid, fine, j);
    Eigen::RowVectorXd pred = Eigen::RowVectorXd::Zero(curve.dim());
    for (int r = 0; r < m; ++r) {
      pred += row.w[r] * dec.coarse.coeffs().row(coarse_grid.coefficient_index(row.first + r));
    }
    dec.odd_knots[k] = 2 * k + 1;
    dec.detail_basis[k] = j;
    dec.details.row(k) = curve.coeffs().row(j) - pred;
  }
  return dec;
}

SplineCurve reconstruct(const WaveletDecomposition& dec) {
  std::vector<double> odd;
  odd.reserve(dec.odd_knots.size());
  for (int idx : dec.odd_knots) odd.push_back(dec.fine_grid.knots()[idx]);
  SplineCurve out = insert_knots(dec.coarse, odd);
  for (std::size_t k = 0; k < dec.detail_basis.size(); ++k) {
    out.coeffs().row(dec.detail_basis[k]) += dec.details.row(static_cast<long>(k));
  }
  return out;
}

Eigen::VectorXd detail_norms(const WaveletDecomposition& dec, double floor) {
  const Eigen::ArrayXd inv = 1.0 / (dec.value_range.array() + floor);
  Eigen::VectorXd out(dec.details.rows());
  for (long k = 0; k < dec.details.rows(); ++k) {
    out(k) = (dec.details.row(k).transpose().array().abs() * inv).maxCoeff();
  }
  return out;
}

std::vector<double> refine_grid(const WaveletDecomposition& dec, double eps, int width,
                                double floor) {
  if (!(eps > 0.0)) throw std::invalid_argument("wavelet threshold must be positive");
  if (width < 1) throw std::invalid_argument("refinement width must be >= 1");
  const KnotGrid& g = dec.fine_grid;
  const Eigen::VectorXd norms = detail_norms(dec, floor);
  std::vector<double> out;
  const int left = (width + 1) / 2;
  const int right = width / 2;
  for (long k = 0; k < norms.size(); ++k) {
    if (!(norms(k) > eps)) continue;
    const long o = dec.odd_knots[static_cast<std::size_t>(k)];
    for (long i = o - left; i <= o + right - 1; ++i) {
      out.push_back(g.reduce(0.5 * (g.knot(i) + g.knot(i + 1))));
    }
  }
  std::sort(out.begin(), out.end());
  const double tol = 1e-13 * g.period();
  out.erase(std::unique(out.begin(), out.end(),
                        [tol](double a, double b) { return std::abs(a - b) <= tol; }),
            out.end());
  return out;
}

SplineCurve coarsen_predictor(const SplineCurve& curve, double eps, double floor) {
  if (!(eps >= 0.0)) throw std::invalid_argument("coarsening threshold must be non-negative");
  if (eps == 0.0) return curve;
  SplineCurve x = pad_to_even(curve);
  const KnotGrid& g = x.grid();
  if (g.size() < 2 * g.order()) return x;
  const WaveletDecomposition dec = fwt_step(x);
  const Eigen::VectorXd norms = detail_norms(dec, floor);
  std::vector<char> keep(static_cast<std::size_t>(g.size()), 1);
  bool any = false;
  for (long k = 0; k < norms.size(); ++k) {
    if (norms(k) <= eps) {
      keep[static_cast<std::size_t>(dec.odd_knots[static_cast<std::size_t>(k)])] = 0;
      any = true;
    }
  }
  if (!any) return x;
  std::vector<double> kept;
  for (int i = 0; i < g.size(); ++i) {
    if (keep[static_cast<std::size_t>(i)]) kept.push_back(g.knots()[i]);
  }
  return project(x, KnotGrid(std::move(kept), g.period(), g.order()));
}

}  // namespace mrwave
