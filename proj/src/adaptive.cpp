#include "mrwave/adaptive.hpp"

#include <algorithm>
#include <array>

namespace mrwave {

namespace {

// Newton tolerance and detail threshold tighten together; early rounds only
// need to place knots, not to converge fully.
struct Stage {
  double tol;
  double eps;
};

std::vector<double> new_knots_for(const SplineCurve& x, double eps, const RefinementPolicy& p) {
  const SplineCurve padded = pad_to_even(x);
  if (padded.grid().size() < 2 * padded.grid().order()) return {};
  std::vector<double> out;
  const WaveletDecomposition dec = fwt_step(padded);
  for (double t : refine_grid(dec, eps, p.width, p.floor)) {
    if (!x.grid().contains_knot(t)) out.push_back(t);
  }
  if (!out.empty() && padded.grid().size() != x.grid().size()) {
    for (double t : padded.grid().knots()) {
      if (!x.grid().contains_knot(t) && std::find(out.begin(), out.end(), t) == out.end()) {
        out.push_back(t);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

PbvpResult solve_pbvp(const PbvpModel& model, const SplineCurve& initial, double omega,
                      const SplineCurve* c_prev, double tol, const RefinementPolicy& policy,
                      const GalerkinOptions& options, int max_iter) {
  const double eps = policy.eps > 0.0 ? policy.eps : tol;
  const std::array<Stage, 3> schedule{{{tol * 100.0, eps * 16.0}, {tol * 10.0, eps * 4.0}, {tol, eps}}};

  PbvpResult res;
  res.x = initial;
  res.omega = omega;
  const int rounds = policy.adaptive ? std::max(policy.max_rounds, 1) : 1;
  for (int round = 0; round < rounds; ++round) {
    const bool adaptive = policy.adaptive;
    const bool staged = adaptive && policy.staged;
    const Stage st = staged ? schedule[static_cast<std::size_t>(std::min(round, 2))] : Stage{tol, eps};
    const bool final_stage = !staged || round >= 2;
    GalerkinSystem sys(res.x.grid(), model, options);
    NewtonOptions nopt;
    nopt.tol = st.tol;
    nopt.max_iter = max_iter;
    Coeffs c = res.x.coeffs();
    try {
      if (c_prev) {
        const Coeffs cp = project(*c_prev, res.x.grid()).coeffs();
        res.report = solve_free_omega(sys, c, res.omega, cp, nopt);
      } else {
        res.report = solve_fixed_omega(sys, c, res.omega, nopt);
      }
    } catch (const ConvergenceError& e) {
      res.work += e.report().work;
      throw;
    }
    res.work += res.report.work;
    res.x = SplineCurve(res.x.grid(), std::move(c));
    res.rounds = round + 1;
    if (!adaptive) break;

    const std::vector<double> add = new_knots_for(res.x, st.eps, policy);
    if (add.empty()) {
      if (final_stage) break;
      continue;
    }
    if (res.x.grid().size() + static_cast<int>(add.size()) > policy.max_knots) {
      res.warnings.push_back("knot limit reached; refinement stopped at " +
                             std::to_string(res.x.grid().size()) + " knots");
      if (final_stage) break;
      continue;
    }
    if (round + 1 == rounds) {
      res.warnings.push_back("refinement rounds exhausted with details above threshold");
      break;
    }
    res.x = insert_knots(res.x, add);
  }
  return res;
}

}  // namespace mrwave
