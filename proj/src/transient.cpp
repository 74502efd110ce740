#include "mrwave/transient.hpp"

#include <algorithm>
#include <cmath>

#include "mrwave/mpde.hpp"

namespace mrwave {

namespace {

constexpr double kGmin = 1e-12;

struct Residual {
  Eigen::VectorXd F;
  Eigen::MatrixXd J;
};

// α0 q(x) + qh + g(x) + s (+ gmin on node rows).
void evaluate(const Circuit& c, const Eigen::VectorXd& x, double alpha0, const Eigen::VectorXd& qh,
              const Eigen::VectorXd& s, double gmin, Eigen::VectorXd& F, Eigen::MatrixXd* J) {
  Eigen::VectorXd q, g;
  Eigen::MatrixXd C, G;
  eval_devices(c, x, &q, &g, J ? &C : nullptr, J ? &G : nullptr);
  F = alpha0 * q + qh + g + s;
  for (int i = 0; i < c.node_count; ++i) F(i) += gmin * x(i);
  if (J) {
    *J = alpha0 * C + G;
    for (int i = 0; i < c.node_count; ++i) (*J)(i, i) += gmin;
  }
}

// Damped Newton on one nonlinear system; returns false without convergence.
bool newton(const Circuit& c, Eigen::VectorXd& x, double alpha0, const Eigen::VectorXd& qh,
            const Eigen::VectorXd& s, double gmin, const Eigen::ArrayXd& scale, double tol,
            int max_iter, int& iterations, WorkCounters& work) {
  Eigen::VectorXd F, Ft;
  Eigen::MatrixXd J;
  for (int it = 0; it < max_iter; ++it) {
    evaluate(c, x, alpha0, qh, s, gmin, F, &J);
    if (!F.allFinite() || !J.allFinite()) return false;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
    work.factorizations += 1;
    work.factored_blocks += 1;
    work.jacobian_evals += 1;
    work.residual_evals += 1;
    ++iterations;
    const Eigen::VectorXd dx = lu.solve(F);
    if (!dx.allFinite()) return false;
    const double nd = (dx.array().abs() / (x.array().abs().max(scale) + 1e-9)).maxCoeff();
    if (nd <= tol) {
      x -= dx;
      return true;
    }
    const double f0 = F.norm();
    double lambda = 1.0;
    Eigen::VectorXd trial;
    for (int h = 0; h < 12; ++h) {
      trial = x - lambda * dx;
      evaluate(c, trial, alpha0, qh, s, gmin, Ft, nullptr);
      work.residual_evals += 1;
      if (Ft.allFinite() && Ft.norm() <= (1.0 - 0.25 * lambda) * f0) break;
      lambda *= 0.5;
    }
    x = trial;
  }
  return false;
}

Eigen::ArrayXd zero_scale(const Circuit& c) { return Eigen::ArrayXd::Zero(c.n); }

}  // namespace

Eigen::VectorXd dc_operating_point(const Circuit& circuit, double t) {
  const int n = circuit.n;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (n == 0) return x;
  const Eigen::VectorXd s = source_univariate(circuit, t);
  const Eigen::VectorXd qh = Eigen::VectorXd::Zero(n);
  WorkCounters work;
  int iters = 0;
  constexpr double kTol = 1e-13;
  if (newton(circuit, x, 0.0, qh, s, kGmin, zero_scale(circuit), kTol, 200, iters, work)) return x;
  // Source ramping in ten steps.
  x.setZero();
  for (int k = 1; k <= 10; ++k) {
    const double lambda = k / 10.0;
    if (!newton(circuit, x, 0.0, qh, lambda * s, kGmin, zero_scale(circuit), kTol, 200, iters,
                work)) {
      throw Error("DC operating point did not converge (source ramp " + std::to_string(lambda) +
                  ")");
    }
  }
  return x;
}

TransientResult transient(const Circuit& circuit, const TransientConfig& cfg) {
  if (!(cfg.t_stop > cfg.t_start)) throw std::invalid_argument("transient span must be positive");
  if (!(cfg.step > 0.0)) throw std::invalid_argument("transient step must be positive");
  if (cfg.bdf_order < 1 || cfg.bdf_order > 2) throw std::invalid_argument("BDF order must be 1 or 2");
  const int n = circuit.n;

  Eigen::VectorXd x0;
  if (cfg.initial == InitialCondition::given) {
    if (cfg.x0.size() != n) throw std::invalid_argument("initial state size mismatch");
    x0 = cfg.x0;
  } else {
    x0 = dc_operating_point(circuit, cfg.t_start);
  }

  // Step history (newest last) and the output bookkeeping.
  std::vector<double> ts{cfg.t_start};
  std::vector<Eigen::VectorXd> xs{x0};
  std::vector<Eigen::VectorXd> qs;
  {
    Eigen::VectorXd q;
    eval_devices(circuit, x0, &q, nullptr, nullptr, nullptr);
    qs.push_back(q);
  }
  TransientResult res;
  std::vector<double> outs = cfg.output_times;
  std::sort(outs.begin(), outs.end());
  std::size_t next_out = 0;
  auto emit = [&](double t, const Eigen::VectorXd& x) {
    res.t.push_back(t);
    res.x.push_back(x);
  };
  const bool every = outs.empty();
  if (every) {
    emit(cfg.t_start, x0);
  } else {
    while (next_out < outs.size() && outs[next_out] <= cfg.t_start) {
      emit(outs[next_out], x0);
      ++next_out;
    }
  }

  Eigen::ArrayXd scale = x0.array().abs();
  const double end_tol = 1e-12 * (cfg.t_stop - cfg.t_start);
  // Steps land on the lattice t_start + k * step; a halved step is followed
  // by more short steps until the lattice is reached again.
  long k_next = 1;
  int halvings = 0;
  double h_nom = cfg.step;
  while (ts.back() < cfg.t_stop - end_tol) {
    const double t_prev = ts.back();
    const double lattice = std::min(cfg.t_start + static_cast<double>(k_next) * cfg.step, cfg.t_stop);
    double h = h_nom;
    if (k_next == 1 && cfg.startup_substeps > 1) h = std::min(h, cfg.step / cfg.startup_substeps);
    double t = t_prev + h;
    if (t >= lattice - end_tol) t = lattice;
    h = t - t_prev;
    const int order = std::min<int>(cfg.bdf_order, static_cast<int>(ts.size()));
    std::vector<double> nodes{t};
    for (int i = 1; i <= order; ++i) nodes.push_back(ts[ts.size() - i]);
    const std::vector<double> alpha = bdf_coeffs(nodes);
    Eigen::VectorXd qh = Eigen::VectorXd::Zero(n);
    for (int i = 1; i <= order; ++i) qh += alpha[i] * qs[qs.size() - i];
    const Eigen::VectorXd s = source_univariate(circuit, t);

    // Predictor: extrapolate through the last points.
    Eigen::VectorXd x = xs.back();
    if (xs.size() >= 2) {
      const double r = h / (ts.back() - ts[ts.size() - 2]);
      x = xs.back() + r * (xs.back() - xs[xs.size() - 2]);
    }
    const bool ok = newton(circuit, x, alpha[0], qh, s, 0.0, scale, cfg.newton_tol, cfg.max_newton,
                           res.newton_iterations, res.work);
    if (!ok) {
      if (++halvings > cfg.max_halvings) {
        throw TransientError("transient Newton failed at t = " + std::to_string(t) +
                                 " after step halving",
                             res);
      }
      h_nom = 0.5 * h;
      continue;
    }
    halvings = 0;
    if (t == lattice) {
      ++k_next;
      h_nom = cfg.step;
    }
    Eigen::VectorXd q;
    eval_devices(circuit, x, &q, nullptr, nullptr, nullptr);
    ts.push_back(t);
    xs.push_back(x);
    qs.push_back(q);
    res.steps += 1;
    scale = scale.max(x.array().abs());

    if (every) {
      emit(t, x);
    } else {
      // Dense output by the interpolating polynomial through the last points.
      const std::size_t k = ts.size();
      const int deg = std::min<int>(cfg.bdf_order, static_cast<int>(k) - 1);
      while (next_out < outs.size() && outs[next_out] <= t + end_tol) {
        const double to = outs[next_out];
        Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
        for (int i = 0; i <= deg; ++i) {
          double w = 1.0;
          for (int j = 0; j <= deg; ++j) {
            if (j != i) w *= (to - ts[k - 1 - j]) / (ts[k - 1 - i] - ts[k - 1 - j]);
          }
          y += w * xs[k - 1 - i];
        }
        emit(to, y);
        ++next_out;
      }
    }
    // Only the last three steps are needed.
    if (ts.size() > 3) {
      ts.erase(ts.begin());
      xs.erase(xs.begin());
      qs.erase(qs.begin());
    }
  }
  return res;
}

}  // namespace mrwave
