#pragma once

// Spline Galerkin discretization of the periodic boundary value problem
//
//   ω d/dt q(x(t)) + f(x(t), t, ω) = 0,   x(t) = x(t + P),
//
// with x = sum_j c_j phi_j. Condition l integrates the equation over the
// splitting interval [p_l, p_{l+1}]:
//
//   F_l(c, ω) = ω (q(x(p_{l+1})) - q(x(p_l))) + ∫ f(x(t), t, ω) dt.

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrwave/cyclic_banded.hpp"
#include "mrwave/errors.hpp"
#include "mrwave/spline.hpp"

namespace mrwave {

/// Integrand of the periodic problem. Implementations must be safe to call
/// concurrently (const and free of shared mutable state).
class PbvpModel {
 public:
  virtual ~PbvpModel() = default;
  virtual int dim() const = 0;
  /// q(x) and optionally C = D_x q.
  virtual void charge(const Eigen::VectorXd& x, Eigen::VectorXd& q, Eigen::MatrixXd* C) const = 0;
  /// f(x, t, ω), optionally D_x f and the partial derivative in ω.
  virtual void forcing(const Eigen::VectorXd& x, double t, double omega, Eigen::VectorXd& f,
                       Eigen::MatrixXd* Dx, Eigen::VectorXd* Domega) const = 0;
};

struct GalerkinOptions {
  QuadratureRule quadrature = QuadratureRule::gauss2;
  SplittingRule splitting = SplittingRule::greville_centered;
  /// Rows whose charge term is nonzero integrate between Greville points
  /// instead; the centered intervals cannot see the alternating spline mode
  /// through a charge difference, the Greville ones cannot see it through an
  /// integral. Ignored when `splitting` is already greville.
  bool split_by_row_type = true;
  bool parallel = true;
};

/// Counters for comparing solver work across methods.
struct WorkCounters {
  long factorizations = 0;
  long factored_blocks = 0;  ///< sum of block rows over all factorizations
  long residual_evals = 0;
  long jacobian_evals = 0;

  WorkCounters& operator+=(const WorkCounters& o) {
    factorizations += o.factorizations;
    factored_blocks += o.factored_blocks;
    residual_evals += o.residual_evals;
    jacobian_evals += o.jacobian_evals;
    return *this;
  }
};

struct NewtonReport {
  int iterations = 0;
  std::vector<double> residual_norms;  ///< scaled Newton step norm per iteration
  bool converged = false;
  double omega = 0.0;
  int damped_steps = 0;
  std::vector<std::string> warnings;
  WorkCounters work;
};

struct NewtonOptions {
  double tol = 1e-8;
  int max_iter = 30;
  int max_halvings = 8;
  double scale_floor = 1e-9;  ///< absolute floor of the per-variable scale
};

/// Newton failed; carries the best iterate and the report.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& msg, Coeffs best, NewtonReport report)
      : Error(msg), best_(std::move(best)), report_(std::move(report)) {}
  const Coeffs& best() const { return best_; }
  const NewtonReport& report() const { return report_; }

 private:
  Coeffs best_;
  NewtonReport report_;
};

class GalerkinSystem {
 public:
  GalerkinSystem(KnotGrid grid, const PbvpModel& model, GalerkinOptions options = {});

  const KnotGrid& grid() const { return grid_; }
  const SplittingPoints& splitting() const { return split_; }
  /// Per variable: true when its equation uses the Greville intervals.
  const std::vector<bool>& greville_rows() const { return greville_rows_; }
  const GalerkinOptions& options() const { return options_; }
  int dim() const { return n_; }
  int bandwidth() const { return grid_.order() - 1; }

  Coeffs residual(const Coeffs& c, double omega) const;
  CyclicBlockBandedMatrix jacobian(const Coeffs& c, double omega) const;
  /// dF/dω: charge differences plus the integral of the ω-partial of f.
  Coeffs omega_derivative(const Coeffs& c, double omega) const;

  /// Any of F, A, z may be null; all use the same quadrature nodes.
  void assemble(const Coeffs& c, double omega, Coeffs* F, CyclicBlockBandedMatrix* A,
                Coeffs* z) const;

 private:
  struct Point {
    double t = 0.0;
    double w = 0.0;
    long first = 0;
    std::array<double, kMaxOrder> phi{};
  };
  struct Row {
    Point left;
    Point right;
    std::vector<Point> nodes;
  };
  struct Part {
    Eigen::VectorXd F, z;
    std::vector<std::pair<long, Eigen::MatrixXd>> blocks;
  };

  Point make_point(double t, double w) const;
  Eigen::VectorXd value_at(const Coeffs& c, const Point& p) const;
  std::vector<Row> build_rows(const SplittingPoints& sp) const;
  void integrate_row(const Row& row, const Coeffs& c, double omega, bool want_A, bool want_z,
                     Part& out) const;
  void assemble_row(int l, const Coeffs& c, double omega, Coeffs* F, CyclicBlockBandedMatrix* A,
                    Coeffs* z) const;

  KnotGrid grid_;
  const PbvpModel& model_;
  GalerkinOptions options_;
  SplittingPoints split_;
  std::vector<Row> rows_;
  std::vector<Row> greville_rows_data_;  ///< empty unless rows are mixed
  std::vector<bool> greville_rows_;
  Eigen::VectorXd greville_mask_;
  int n_ = 0;
};

/// max_i |d_{k,i}| / scale_i with scale_i = max_k |c_{k,i}| + floor.
double scaled_norm(const Coeffs& d, const Coeffs& c, double floor);

/// Damped Newton with fixed ω. Natural monotonicity test: a step of length λ
/// is accepted when the simplified next correction shrinks by (1 - λ/4).
NewtonReport solve_fixed_omega(const GalerkinSystem& sys, Coeffs& c, double omega,
                               const NewtonOptions& opt = {});

/// Newton with ω as an extra unknown. The underdetermined update
/// A d_c + d_ω z = F is closed by minimizing ||c - d_c - c_prev||_2.
/// Throws DegenerateFrequencyError when A⁻¹z vanishes.
NewtonReport solve_free_omega(const GalerkinSystem& sys, Coeffs& c, double& omega,
                              const Coeffs& c_prev, const NewtonOptions& opt = {});

}  // namespace mrwave
