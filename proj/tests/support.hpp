#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "mrwave/circuit.hpp"
#include "mrwave/spline.hpp"

namespace testing {

inline mrwave::KnotGrid random_grid(std::mt19937& rng, int n, double period, int order,
                                    double start = 0.0) {
  std::uniform_real_distribution<double> jitter(0.2, 1.0);
  std::vector<double> gaps(static_cast<std::size_t>(n));
  double total = 0.0;
  for (double& g : gaps) total += (g = jitter(rng));
  std::vector<double> knots;
  double t = start;
  for (double g : gaps) {
    knots.push_back(t);
    t += g * period / total;
  }
  return mrwave::KnotGrid(knots, period, order);
}

inline mrwave::SplineCurve random_curve(std::mt19937& rng, const mrwave::KnotGrid& g, int dim) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  mrwave::Coeffs c(g.size(), dim);
  for (long i = 0; i < c.size(); ++i) c.data()[i] = u(rng);
  return {g, c};
}

/// Max abs difference of two curves over `samples` points of one period,
/// relative to the max abs value of `a`.
inline double curve_distance(const mrwave::SplineCurve& a, const mrwave::SplineCurve& b,
                             int samples = 1000) {
  const double P = a.grid().period();
  const double t0 = a.grid().start();
  double diff = 0.0, mag = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double t = t0 + P * (i + 0.37) / samples;
    const Eigen::VectorXd va = a.eval(t);
    diff = std::max(diff, (va - b.eval(t)).cwiseAbs().maxCoeff());
    mag = std::max(mag, va.cwiseAbs().maxCoeff());
  }
  return diff / std::max(mag, 1e-300);
}

/// Spline interpolating f (R -> R^dim) at the Greville points of g.
template <class F>
mrwave::SplineCurve interpolate(const mrwave::KnotGrid& g, int dim, F f) {
  const int N = g.size();
  Eigen::MatrixXd B(N, N);
  for (int j = 0; j < N; ++j) {
    mrwave::Coeffs e = mrwave::Coeffs::Zero(N, 1);
    e(j, 0) = 1.0;
    const mrwave::SplineCurve phi(g, e);
    for (int i = 0; i < N; ++i) B(i, j) = phi.eval(g.greville(i))(0);
  }
  Eigen::MatrixXd rhs(N, dim);
  for (int i = 0; i < N; ++i) rhs.row(i) = f(g.greville(i)).transpose();
  const Eigen::MatrixXd c = B.partialPivLu().solve(rhs);
  return {g, mrwave::Coeffs(c)};
}

inline std::string read_netlist(const std::string& name) {
  std::ifstream in(std::string(MRWAVE_NETLIST_DIR) + "/" + name);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline mrwave::Circuit load(const std::string& name) {
  return mrwave::parse_netlist(read_netlist(name));
}

}  // namespace testing
