#pragma once

// One-level spline wavelet transform on non-uniform periodic grids.
//
// The coarse space lives on the even knots t_0, t_2, ... . The detail space
// is spanned by the fine B-splines centered on the odd knots t_{2k+1}, so
//
//   X = prolong(coarse) + sum_k d_k psi_k,   psi_k = fine B-spline at t_{2k+1}.
//
// Coarse coefficients are fixed by requiring that the prolonged coarse curve
// matches X at every fine B-spline centered on an even knot; d_k is then the
// mismatch at the odd-centered B-spline, i.e. the local error of dropping
// t_{2k+1}. Reconstruction is exact by construction.

#include <vector>

#include <Eigen/Dense>

#include "mrwave/spline.hpp"

namespace mrwave {

/// Absolute floor added to per-variable value ranges when scaling details.
inline constexpr double kDetailFloor = 1e-6;

struct WaveletDecomposition {
  KnotGrid fine_grid;
  SplineCurve coarse;
  std::vector<int> odd_knots;     ///< fine knot index 2k+1 of detail k
  std::vector<int> detail_basis;  ///< fine basis index of psi_k
  Coeffs details;                 ///< row k is d_k
  Eigen::VectorXd value_range;    ///< per-variable coefficient range of the input
};

/// Even-index subgrid {t_0, t_2, ...}.
KnotGrid even_subgrid(const KnotGrid& grid);

/// Insert one knot at the midpoint of the largest interval if N is odd.
SplineCurve pad_to_even(const SplineCurve& curve);

/// Requires an even number of knots and N >= 2m; throws Error otherwise.
WaveletDecomposition fwt_step(const SplineCurve& curve);

SplineCurve reconstruct(const WaveletDecomposition& dec);

/// max_i |d_{k,i}| / (range_i + floor) for every detail k.
Eigen::VectorXd detail_norms(const WaveletDecomposition& dec, double floor = kDetailFloor);

/// Midpoints of the `width` fine intervals around every odd knot whose scaled
/// detail exceeds eps; sorted, deduplicated, reduced into [t_0, t_0 + P).
std::vector<double> refine_grid(const WaveletDecomposition& dec, double eps, int width = 2,
                                double floor = kDetailFloor);

/// Remove every odd knot with scaled detail <= eps and re-express the curve on
/// the remaining grid. The deviation from the input is bounded by
/// kCoarsenConstant * eps * (range + floor) * (removed knots), per variable.
/// eps = 0 returns the input unchanged.
SplineCurve coarsen_predictor(const SplineCurve& curve, double eps, double floor = kDetailFloor);

inline constexpr double kCoarsenConstant = 2.0;

}  // namespace mrwave
