#pragma once

// Single-rate reference integrator for d/dt q(x) + g(x) + s(t) = 0 with
// fixed-step BDF of order 1 or 2, sharing the device code of the MPDE path.

#include <vector>

#include <Eigen/Dense>

#include "mrwave/circuit.hpp"
#include "mrwave/galerkin.hpp"

namespace mrwave {

enum class InitialCondition { dc_operating_point, given };

struct TransientConfig {
  double t_start = 0.0;
  double t_stop = 0.0;
  double step = 0.0;
  int bdf_order = 2;
  double newton_tol = 1e-10;  ///< scaled step norm
  int max_newton = 50;
  InitialCondition initial = InitialCondition::dc_operating_point;
  Eigen::VectorXd x0;                ///< used with InitialCondition::given
  std::vector<double> output_times;  ///< empty: every accepted step
  int startup_substeps = 8;          ///< first step split into this many pieces
  int max_halvings = 10;
};

struct TransientResult {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  int steps = 0;
  int newton_iterations = 0;
  WorkCounters work;  ///< one factored block per n x n Newton factorization
};

/// Integration aborted; partial() holds everything computed so far.
class TransientError : public Error {
 public:
  TransientError(const std::string& msg, TransientResult partial)
      : Error(msg), partial_(std::move(partial)) {}
  const TransientResult& partial() const { return partial_; }

 private:
  TransientResult partial_;
};

/// Solve g(x) + s(t) = 0 by damped Newton with source ramping when needed.
/// Node rows carry a 1e-12 S shunt so floating capacitor nodes stay defined.
Eigen::VectorXd dc_operating_point(const Circuit& circuit, double t = 0.0);

TransientResult transient(const Circuit& circuit, const TransientConfig& cfg);

}  // namespace mrwave
