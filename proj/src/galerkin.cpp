#include "mrwave/galerkin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mrwave {

GalerkinSystem::GalerkinSystem(KnotGrid grid, const PbvpModel& model, GalerkinOptions options)
    : grid_(std::move(grid)), model_(model), options_(options), n_(model.dim()) {
  split_ = splitting_points(grid_, options_.splitting);
  rows_ = build_rows(split_);
  greville_rows_.assign(static_cast<std::size_t>(n_), options_.splitting == SplittingRule::greville);
  if (options_.splitting == SplittingRule::greville || !options_.split_by_row_type) return;

  // Charge structure probed at two states; the circuit models keep C's
  // sparsity pattern independent of x.
  Eigen::VectorXd q;
  Eigen::MatrixXd C0, C1;
  model_.charge(Eigen::VectorXd::Zero(n_), q, &C0);
  model_.charge(Eigen::VectorXd::Ones(n_), q, &C1);
  int count = 0;
  greville_mask_ = Eigen::VectorXd::Zero(n_);
  for (int i = 0; i < n_; ++i) {
    if (C0.row(i).cwiseAbs().maxCoeff() > 0.0 || C1.row(i).cwiseAbs().maxCoeff() > 0.0) {
      greville_rows_[static_cast<std::size_t>(i)] = true;
      greville_mask_(i) = 1.0;
      ++count;
    }
  }
  if (count == 0) return;
  std::vector<Row> g = build_rows(splitting_points(grid_, SplittingRule::greville));
  if (count == n_) {
    rows_ = std::move(g);
  } else {
    greville_rows_data_ = std::move(g);
  }
}

std::vector<GalerkinSystem::Row> GalerkinSystem::build_rows(const SplittingPoints& sp) const {
  const int N = grid_.size();
  std::vector<Row> rows(static_cast<std::size_t>(N));
  for (int l = 0; l < N; ++l) {
    Row& r = rows[static_cast<std::size_t>(l)];
    const double a = sp.points[l];
    const double b = sp.points[l + 1];
    r.left = make_point(a, 0.0);
    r.right = make_point(b, 0.0);
    for (const QuadNode& q : quadrature_nodes(a, b, grid_, options_.quadrature)) {
      r.nodes.push_back(make_point(q.t, q.w));
    }
  }
  return rows;
}

GalerkinSystem::Point GalerkinSystem::make_point(double t, double w) const {
  Point p;
  p.t = t;
  p.w = w;
  p.first = grid_.basis(t, 0, std::span<double>(p.phi.data(), static_cast<std::size_t>(grid_.order())));
  return p;
}

Eigen::VectorXd GalerkinSystem::value_at(const Coeffs& c, const Point& p) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
  for (int r = 0; r < grid_.order(); ++r) {
    x += p.phi[r] * c.row(grid_.coefficient_index(p.first + r)).transpose();
  }
  return x;
}

void GalerkinSystem::integrate_row(const Row& row, const Coeffs& c, double omega, bool want_A,
                                   bool want_z, Part& out) const {
  const int m = grid_.order();
  Eigen::VectorXd q0, q1, f, dw;
  Eigen::MatrixXd C0, C1, Dx;
  model_.charge(value_at(c, row.left), q0, want_A ? &C0 : nullptr);
  model_.charge(value_at(c, row.right), q1, want_A ? &C1 : nullptr);

  out.F = omega * (q1 - q0);
  if (want_z) out.z = q1 - q0;
  out.blocks.clear();
  if (want_A) {
    for (int r = 0; r < m; ++r) {
      out.blocks.emplace_back(row.right.first + r, (omega * row.right.phi[r]) * C1);
      out.blocks.emplace_back(row.left.first + r, (-omega * row.left.phi[r]) * C0);
    }
  }
  for (const Point& p : row.nodes) {
    model_.forcing(value_at(c, p), p.t, omega, f, want_A ? &Dx : nullptr, want_z ? &dw : nullptr);
    out.F += p.w * f;
    if (want_z) out.z += p.w * dw;
    if (want_A) {
      for (int r = 0; r < m; ++r) out.blocks.emplace_back(p.first + r, (p.w * p.phi[r]) * Dx);
    }
  }
}

void GalerkinSystem::assemble_row(int l, const Coeffs& c, double omega, Coeffs* F,
                                  CyclicBlockBandedMatrix* A, Coeffs* z) const {
  const bool want_A = A != nullptr;
  const bool want_z = z != nullptr;
  Part part;
  integrate_row(rows_[static_cast<std::size_t>(l)], c, omega, want_A, want_z, part);
  Eigen::VectorXd Fl = part.F;
  Eigen::VectorXd zl = want_z ? part.z : Eigen::VectorXd();
  if (greville_rows_data_.empty()) {
    if (A) {
      for (const auto& [col, blk] : part.blocks) A->block(l, col) += blk;
    }
  } else {
    const Eigen::VectorXd keep = Eigen::VectorXd::Ones(n_) - greville_mask_;
    Part g;
    integrate_row(greville_rows_data_[static_cast<std::size_t>(l)], c, omega, want_A, want_z, g);
    Fl = keep.cwiseProduct(part.F) + greville_mask_.cwiseProduct(g.F);
    if (want_z) zl = keep.cwiseProduct(part.z) + greville_mask_.cwiseProduct(g.z);
    if (A) {
      for (const auto& [col, blk] : part.blocks) A->block(l, col) += keep.asDiagonal() * blk;
      for (const auto& [col, blk] : g.blocks) A->block(l, col) += greville_mask_.asDiagonal() * blk;
    }
  }
  if (!Fl.allFinite() || (want_z && !zl.allFinite())) {
    throw NumericError("non-finite residual on splitting interval " + std::to_string(l));
  }
  if (F) F->row(l) = Fl.transpose();
  if (z) z->row(l) = zl.transpose();
}

void GalerkinSystem::assemble(const Coeffs& c, double omega, Coeffs* F,
                              CyclicBlockBandedMatrix* A, Coeffs* z) const {
  const int N = grid_.size();
  if (c.rows() != N || c.cols() != n_) throw std::invalid_argument("coefficient shape mismatch");
  if (F) F->resize(N, n_);
  if (z) z->resize(N, n_);
  if (A) *A = CyclicBlockBandedMatrix(N, n_, bandwidth());
  // Rows are independent; the first failing row (lowest index) is reported so
  // serial and parallel runs raise the same error.
  int failed = std::numeric_limits<int>::max();
  std::string message;
#pragma omp parallel for schedule(static) if (options_.parallel)
  for (int l = 0; l < N; ++l) {
    try {
      assemble_row(l, c, omega, F, A, z);
    } catch (const std::exception& e) {
#pragma omp critical(mrwave_assembly_error)
      {
        if (l < failed) {
          failed = l;
          message = e.what();
        }
      }
    }
  }
  if (failed != std::numeric_limits<int>::max()) {
    throw NumericError(message.find("splitting interval") != std::string::npos
                           ? message
                           : message + " (splitting interval " + std::to_string(failed) + ")");
  }
}

Coeffs GalerkinSystem::residual(const Coeffs& c, double omega) const {
  Coeffs F;
  assemble(c, omega, &F, nullptr, nullptr);
  return F;
}

CyclicBlockBandedMatrix GalerkinSystem::jacobian(const Coeffs& c, double omega) const {
  CyclicBlockBandedMatrix A;
  assemble(c, omega, nullptr, &A, nullptr);
  return A;
}

Coeffs GalerkinSystem::omega_derivative(const Coeffs& c, double omega) const {
  Coeffs z;
  assemble(c, omega, nullptr, nullptr, &z);
  return z;
}

double scaled_norm(const Coeffs& d, const Coeffs& c, double floor) {
  if (d.size() == 0) return 0.0;
  const Eigen::ArrayXd scale = c.cwiseAbs().colwise().maxCoeff().transpose().array() + floor;
  double out = 0.0;
  for (long i = 0; i < d.cols(); ++i) out = std::max(out, d.col(i).cwiseAbs().maxCoeff() / scale(i));
  return out;
}

namespace {

Coeffs flat_to_coeffs(const Eigen::VectorXd& v, long rows, long cols) {
  Coeffs out(rows, cols);
  Eigen::Map<Eigen::VectorXd>(out.data(), out.size()) = v;
  return out;
}

Eigen::VectorXd coeffs_to_flat(const Coeffs& c) {
  return Eigen::Map<const Eigen::VectorXd>(c.data(), c.size());
}

void count_factorization(NewtonReport& rep, const GalerkinSystem& sys) {
  rep.work.factorizations += 1;
  rep.work.factored_blocks += sys.grid().size();
}

}  // namespace

NewtonReport solve_fixed_omega(const GalerkinSystem& sys, Coeffs& c, double omega,
                               const NewtonOptions& opt) {
  NewtonReport rep;
  rep.omega = omega;
  Coeffs F;
  CyclicBlockBandedMatrix A;
  for (int j = 0; j < opt.max_iter; ++j) {
    sys.assemble(c, omega, &F, &A, nullptr);
    rep.work.residual_evals += 1;
    rep.work.jacobian_evals += 1;
    const CyclicBandedLU lu(A);
    count_factorization(rep, sys);
    const Coeffs d = lu.solve(F);
    const double nd = scaled_norm(d, c, opt.scale_floor);
    rep.residual_norms.push_back(nd);
    if (nd <= opt.tol) {
      c -= d;
      rep.iterations = j;
      rep.converged = true;
      return rep;
    }
    double lambda = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opt.max_halvings; ++h) {
      Coeffs trial = c - lambda * d;
      Coeffs Ft;
      try {
        Ft = sys.residual(trial, omega);
      } catch (const NumericError&) {
        lambda *= 0.5;
        continue;
      }
      rep.work.residual_evals += 1;
      const Coeffs dbar = lu.solve(Ft);
      const double nb = scaled_norm(dbar, c, opt.scale_floor);
      if (nb <= opt.tol) {
        c = trial - dbar;
        rep.iterations = j + 1;
        rep.converged = true;
        if (lambda < 1.0) rep.damped_steps += 1;
        return rep;
      }
      if (nb <= (1.0 - 0.25 * lambda) * nd) {
        c = std::move(trial);
        accepted = true;
        if (lambda < 1.0) rep.damped_steps += 1;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) {
      rep.iterations = j + 1;
      throw ConvergenceError("Newton damping failed to reduce the correction", c, rep);
    }
  }
  rep.iterations = opt.max_iter;
  throw ConvergenceError("Newton did not converge in " + std::to_string(opt.max_iter) + " iterations",
                         c, rep);
}

namespace {

struct FreeStep {
  Coeffs dc;
  double dw = 0.0;
};

// Minimal-norm solution of A d_c + d_ω z = F: with b = A⁻¹F and y = A⁻¹z,
// d_c = b - d_ω y, and d_ω minimizes ||c - d_c - c_prev||_2.
FreeStep free_update(const CyclicBandedLU& lu, const Coeffs& F, const Coeffs& z, const Coeffs& c,
                     const Coeffs& c_prev, double omega) {
  const long N = F.rows();
  const long n = F.cols();
  Eigen::MatrixXd rhs(F.size(), 2);
  rhs.col(0) = coeffs_to_flat(F);
  rhs.col(1) = coeffs_to_flat(z);
  const Eigen::MatrixXd sol = lu.solve(rhs);
  const Eigen::VectorXd b = sol.col(0);
  const Eigen::VectorXd y = sol.col(1);
  const double yy = y.squaredNorm();
  const double cn = coeffs_to_flat(c).norm();
  if (!(yy > 1e-300) || std::sqrt(yy) * std::max(std::abs(omega), 1e-3) <= 1e-12 * (cn + 1e-300)) {
    throw DegenerateFrequencyError("frequency direction vanished; ω is not observable");
  }
  const Eigen::VectorXd r = coeffs_to_flat(c) - coeffs_to_flat(c_prev) - b;
  FreeStep s;
  s.dw = -y.dot(r) / yy;
  s.dc = flat_to_coeffs(b - s.dw * y, N, n);
  return s;
}

double joint_norm(const FreeStep& s, const Coeffs& c, double omega, double floor) {
  return std::max(scaled_norm(s.dc, c, floor), std::abs(s.dw) / (std::abs(omega) + floor));
}

}  // namespace

NewtonReport solve_free_omega(const GalerkinSystem& sys, Coeffs& c, double& omega,
                              const Coeffs& c_prev, const NewtonOptions& opt) {
  if (c_prev.rows() != c.rows() || c_prev.cols() != c.cols()) {
    throw std::invalid_argument("previous envelope coefficients must live on the same grid");
  }
  NewtonReport rep;
  Coeffs F, z;
  CyclicBlockBandedMatrix A;
  for (int j = 0; j < opt.max_iter; ++j) {
    sys.assemble(c, omega, &F, &A, &z);
    rep.work.residual_evals += 1;
    rep.work.jacobian_evals += 1;
    const CyclicBandedLU lu(A);
    count_factorization(rep, sys);
    const FreeStep s = free_update(lu, F, z, c, c_prev, omega);
    const double nd = joint_norm(s, c, omega, opt.scale_floor);
    rep.residual_norms.push_back(nd);
    if (nd <= opt.tol) {
      c -= s.dc;
      omega -= s.dw;
      rep.iterations = j;
      rep.converged = true;
      rep.omega = omega;
      return rep;
    }
    double lambda = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opt.max_halvings; ++h) {
      Coeffs trial = c - lambda * s.dc;
      const double wt = omega - lambda * s.dw;
      Coeffs Ft, zt;
      try {
        sys.assemble(trial, wt, &Ft, nullptr, &zt);
      } catch (const NumericError&) {
        lambda *= 0.5;
        continue;
      }
      rep.work.residual_evals += 1;
      const FreeStep sb = free_update(lu, Ft, zt, trial, c_prev, wt);
      const double nb = joint_norm(sb, c, omega, opt.scale_floor);
      if (nb <= opt.tol) {
        c = trial - sb.dc;
        omega = wt - sb.dw;
        rep.iterations = j + 1;
        rep.converged = true;
        rep.omega = omega;
        if (lambda < 1.0) rep.damped_steps += 1;
        return rep;
      }
      if (nb <= (1.0 - 0.25 * lambda) * nd) {
        c = std::move(trial);
        omega = wt;
        accepted = true;
        if (lambda < 1.0) rep.damped_steps += 1;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) {
      rep.iterations = j + 1;
      rep.omega = omega;
      throw ConvergenceError("free-frequency Newton damping failed", c, rep);
    }
  }
  rep.iterations = opt.max_iter;
  rep.omega = omega;
  throw ConvergenceError("free-frequency Newton did not converge", c, rep);
}

}  // namespace mrwave
