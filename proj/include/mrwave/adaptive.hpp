#pragma once

// Periodic solve with wavelet-driven grid refinement: solve, decompose the
// solution, insert knots where details exceed the threshold, repeat.

#include <optional>

#include "mrwave/galerkin.hpp"
#include "mrwave/wavelet.hpp"

namespace mrwave {

struct RefinementPolicy {
  bool adaptive = true;
  double eps = 1e-4;           ///< detail threshold; 0 means "use the Newton tolerance"
  int width = 2;               ///< fine intervals split per flagged detail
  double floor = kDetailFloor;
  int max_rounds = 24;
  int max_knots = 4096;
  /// Coarsening threshold relative to eps. Cubic details grow about 16x when
  /// a level is removed, so anything near 1 would undo refinement every step.
  double coarsen_factor = 1.0 / 32.0;
  /// Loosened tolerances in the first rounds. Worth it from a cold start;
  /// a warm start (an envelope predictor) goes straight to the final values.
  bool staged = true;
};

struct PbvpResult {
  SplineCurve x;
  double omega = 0.0;
  NewtonReport report;  ///< last Newton solve
  int rounds = 0;
  WorkCounters work;    ///< all solves, all rounds
  std::vector<std::string> warnings;
};

/// Solve ω d/dt q + f = 0 starting from `initial` (its grid is the starting
/// grid). With `c_prev` set, ω is an unknown and the minimal-change condition
/// is taken against c_prev (re-expressed on each grid).
PbvpResult solve_pbvp(const PbvpModel& model, const SplineCurve& initial, double omega,
                      const SplineCurve* c_prev, double tol, const RefinementPolicy& policy,
                      const GalerkinOptions& options = {}, int max_iter = 30);

}  // namespace mrwave
