#include "mrwave/mpde.hpp"

#include <algorithm>
#include <cmath>

#include "mrwave/errors.hpp"
#include "mrwave/transient.hpp"

namespace mrwave {

std::vector<double> bdf_coeffs(std::span<const double> nodes) {
  const int s = static_cast<int>(nodes.size()) - 1;
  if (s < 1) throw std::invalid_argument("BDF needs at least two nodes");
  const double h = nodes[0] - nodes[1];
  if (h == 0.0) throw NumericError("coincident BDF nodes");
  // Offsets in units of the last step keep the Vandermonde system O(1).
  Eigen::VectorXd e(s + 1);
  for (int i = 0; i <= s; ++i) e(i) = (nodes[i] - nodes[0]) / h;
  for (int i = 0; i <= s; ++i) {
    for (int j = i + 1; j <= s; ++j) {
      if (std::abs(e(i) - e(j)) < 1e-12) throw NumericError("coincident BDF nodes");
    }
  }
  Eigen::MatrixXd M(s + 1, s + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s + 1);
  for (int j = 0; j <= s; ++j) {
    for (int i = 0; i <= s; ++i) M(j, i) = std::pow(e(i), j);
  }
  rhs(1) = 1.0;
  const Eigen::VectorXd a = M.fullPivLu().solve(rhs);
  std::vector<double> out(static_cast<std::size_t>(s + 1));
  for (int i = 0; i <= s; ++i) out[i] = a(i) / h;
  return out;
}

double sigma_update(double sigma_prev, double dtau, double omega_prev, double omega_k,
                    double omega_ref, double weight) {
  return sigma_prev +
         dtau * ((omega_ref - omega_prev) * (1.0 - weight) + (omega_ref - omega_k) * weight);
}

EnvelopeForcing::EnvelopeForcing(const Circuit& circuit, double tau_k, std::vector<double> alpha,
                                 std::vector<const SplineCurve*> history)
    : circuit_(circuit), tau_(tau_k), alpha_(std::move(alpha)), history_(std::move(history)) {
  if (alpha_.empty() || history_.size() + 1 != alpha_.size()) {
    throw std::invalid_argument("BDF weights do not match the history length");
  }
  for (const SplineCurve* h : history_) {
    if (!h) throw Error("missing envelope history entry");
  }
}

void EnvelopeForcing::set_fixed_sigma(double sigma) {
  free_ = false;
  sigma_fixed_ = sigma;
}

void EnvelopeForcing::set_free_sigma(double sigma_prev, double dtau, double omega_prev,
                                     double weight) {
  free_ = true;
  sigma_prev_ = sigma_prev;
  dtau_ = dtau;
  omega_prev_ = omega_prev;
  weight_ = weight;
}

void EnvelopeForcing::set_source_scale(double lambda) {
  lambda_ = lambda;
  if (lambda_ < 1.0) s_start_ = source_univariate(circuit_, 0.0);
}

double EnvelopeForcing::sigma(double omega) const {
  if (!free_) return sigma_fixed_;
  return sigma_update(sigma_prev_, dtau_, omega_prev_, omega, circuit_.split.omega_ref, weight_);
}

void EnvelopeForcing::charge(const Eigen::VectorXd& x, Eigen::VectorXd& q,
                             Eigen::MatrixXd* C) const {
  eval_devices(circuit_, x, &q, nullptr, C, nullptr);
}

void EnvelopeForcing::forcing(const Eigen::VectorXd& x, double t, double omega, Eigen::VectorXd& f,
                              Eigen::MatrixXd* Dx, Eigen::VectorXd* Domega) const {
  Eigen::VectorXd q, g;
  Eigen::MatrixXd C, G;
  const bool jac = Dx != nullptr;
  eval_devices(circuit_, x, &q, &g, jac ? &C : nullptr, jac ? &G : nullptr);
  auto [s, ds] = source_bivariate(circuit_, tau_, t + sigma(omega));
  if (lambda_ < 1.0) {
    s = (1.0 - lambda_) * s_start_ + lambda_ * s;
    ds *= lambda_;
  }
  f = alpha_[0] * q + g + s;
  Eigen::VectorXd qh;
  for (std::size_t i = 0; i < history_.size(); ++i) {
    eval_devices(circuit_, history_[i]->eval(t), &qh, nullptr, nullptr, nullptr);
    f += alpha_[i + 1] * qh;
  }
  if (Dx) *Dx = alpha_[0] * C + G;
  if (Domega) {
    if (free_) {
      *Domega = -dtau_ * weight_ * ds;
    } else {
      Domega->setZero(circuit_.n);
    }
  }
}

double fixed_omega(const Circuit& circuit, const EnvelopeConfig& cfg, double tau) {
  return cfg.omega_fn ? cfg.omega_fn(tau) : circuit.split.omega_ref;
}

namespace {

// ∫_a^b (ω̃ - ω(s)) ds by composite 5-point Gauss-Legendre.
double shift_integral(const Circuit& circuit, const EnvelopeConfig& cfg, double a, double b) {
  if (!cfg.omega_fn) return 0.0;
  static const double x[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                              0.9061798459386640};
  static const double w[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                              0.2369268850561891, 0.2369268850561891};
  constexpr int kPanels = 8;
  const double h = (b - a) / kPanels;
  double sum = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (int i = 0; i < 5; ++i) {
      sum += 0.5 * h * w[i] * (circuit.split.omega_ref - cfg.omega_fn(mid + 0.5 * h * x[i]));
    }
  }
  return sum;
}

double default_eps(const EnvelopeConfig& cfg) {
  return cfg.refinement.eps > 0.0 ? cfg.refinement.eps : cfg.newton_tol;
}

// Lagrange weights of nodes at point t.
std::vector<double> lagrange(std::span<const double> nodes, double t) {
  std::vector<double> w(nodes.size(), 1.0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      if (i != j) w[i] *= (t - nodes[j]) / (nodes[i] - nodes[j]);
    }
  }
  return w;
}

// Sample points for comparing curves on different grids: knots and midpoints.
std::vector<double> probe_points(const KnotGrid& g) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(2 * g.size()));
  for (int i = 0; i < g.size(); ++i) {
    out.push_back(g.knot(i));
    out.push_back(0.5 * (g.knot(i) + g.knot(i + 1)));
  }
  return out;
}

double local_error(const std::vector<EnvelopeSample>& history, const EnvelopeSample& cur,
                   int degree, double floor) {
  const std::size_t hs = history.size();
  std::vector<double> nodes;
  for (int i = 0; i <= degree; ++i) nodes.push_back(history[hs - 1 - i].tau);
  const std::vector<double> w = lagrange(nodes, cur.tau);
  const std::vector<double> pts = probe_points(cur.x.grid());
  const int n = cur.x.dim();
  Eigen::ArrayXd scale = Eigen::ArrayXd::Zero(n);
  Eigen::ArrayXd diff = Eigen::ArrayXd::Zero(n);
  for (double t : pts) {
    const Eigen::VectorXd xk = cur.x.eval(t);
    Eigen::VectorXd pred = Eigen::VectorXd::Zero(n);
    for (int i = 0; i <= degree; ++i) pred += w[i] * history[hs - 1 - i].x.eval(t);
    scale = scale.max(xk.array().abs());
    diff = diff.max((xk - pred).array().abs());
  }
  const double ratio = (cur.tau - history.back().tau) / (cur.tau - nodes.back());
  return ratio * (diff / (scale + floor)).maxCoeff();
}

}  // namespace

EnvelopeSample compute_initial_envelope(const Circuit& circuit, const EnvelopeConfig& cfg) {
  const KnotGrid grid =
      KnotGrid::uniform(cfg.initial_intervals, circuit.split.period, cfg.spline_order);
  const Eigen::VectorXd x_dc = dc_operating_point(circuit);
  EnvelopeSample out;
  out.tau = 0.0;
  out.sigma = 0.0;
  out.omega = cfg.mode == FrequencyMode::free ? circuit.split.omega_ref
                                              : fixed_omega(circuit, cfg, 0.0);
  EnvelopeForcing model(circuit, 0.0, {0.0}, {});
  model.set_fixed_sigma(0.0);
  SplineCurve x = SplineCurve::constant(grid, x_dc);
  auto attempt = [&](double lambda, const SplineCurve& start) {
    model.set_source_scale(lambda);
    return solve_pbvp(model, start, out.omega, nullptr, cfg.newton_tol, cfg.refinement,
                      cfg.galerkin, 50);
  };
  try {
    out.x = attempt(1.0, x).x;
    return out;
  } catch (const Error&) {
  }
  // Source homotopy from the DC point.
  double lambda = 0.0;
  double step = 0.25;
  for (int tries = 0; tries < 40 && lambda < 1.0; ++tries) {
    const double next = std::min(1.0, lambda + step);
    try {
      x = attempt(next, x).x;
      lambda = next;
      step *= 1.5;
    } catch (const Error&) {
      step *= 0.5;
      if (step < 1e-3) break;
    }
  }
  if (lambda < 1.0) {
    throw Error("periodic steady state initialization failed (homotopy stalled at lambda = " +
                std::to_string(lambda) + ")");
  }
  out.x = x;
  return out;
}

StepResult envelope_step(const Circuit& circuit, const EnvelopeConfig& cfg,
                         const std::vector<EnvelopeSample>& history, double h) {
  if (history.empty()) throw Error("envelope step needs an initial sample");
  StepResult res;
  const EnvelopeSample& prev = history.back();
  const double tau = prev.tau + h;
  const int s = std::min<int>(cfg.bdf_order, static_cast<int>(history.size()));
  std::vector<double> nodes{tau};
  std::vector<const SplineCurve*> hist;
  for (int i = 1; i <= s; ++i) {
    nodes.push_back(history[history.size() - i].tau);
    hist.push_back(&history[history.size() - i].x);
  }
  EnvelopeForcing model(circuit, tau, bdf_coeffs(nodes), hist);

  const double eps = default_eps(cfg);
  SplineCurve predictor =
      cfg.coarsen ? coarsen_predictor(prev.x, cfg.refinement.coarsen_factor * eps,
                                      cfg.refinement.floor)
                  : prev.x;
  // Polynomial extrapolation of the history as the Newton starting point.
  if (history.size() >= 2) {
    const int p = std::min<int>(cfg.bdf_order, static_cast<int>(history.size()) - 1);
    std::vector<double> tn;
    for (int i = 0; i <= p; ++i) tn.push_back(history[history.size() - 1 - i].tau);
    const std::vector<double> lw = lagrange(tn, tau);
    Coeffs c = Coeffs::Zero(predictor.coeffs().rows(), predictor.coeffs().cols());
    for (int i = 0; i <= p; ++i) {
      c += lw[static_cast<std::size_t>(i)] *
           project(history[history.size() - 1 - i].x, predictor.grid()).coeffs();
    }
    predictor = SplineCurve(predictor.grid(), std::move(c));
  }
  RefinementPolicy policy = cfg.refinement;
  policy.staged = false;
  EnvelopeSample& out = res.sample;
  out.tau = tau;
  out.order = s;
  try {
    if (cfg.mode == FrequencyMode::fixed) {
      out.omega = fixed_omega(circuit, cfg, tau);
      out.sigma = prev.sigma + shift_integral(circuit, cfg, prev.tau, tau);
      model.set_fixed_sigma(out.sigma);
      PbvpResult r = solve_pbvp(model, predictor, out.omega, nullptr, cfg.newton_tol,
                                policy, cfg.galerkin);
      out.x = std::move(r.x);
      res.work += r.work;
      res.newton_iterations += r.report.iterations;
    } else {
      model.set_free_sigma(prev.sigma, h, prev.omega, cfg.weight);
      try {
        PbvpResult r = solve_pbvp(model, predictor, prev.omega, &prev.x, cfg.newton_tol,
                                  policy, cfg.galerkin);
        out.x = std::move(r.x);
        out.omega = r.omega;
        res.work += r.work;
        res.newton_iterations += r.report.iterations;
      } catch (const DegenerateFrequencyError&) {
        // ω is not observable from this step; keep the previous value.
        out.omega = prev.omega;
        model.set_fixed_sigma(model.sigma(prev.omega));
        PbvpResult r = solve_pbvp(model, predictor, out.omega, nullptr, cfg.newton_tol,
                                  policy, cfg.galerkin);
        out.x = std::move(r.x);
        res.work += r.work;
        res.newton_iterations += r.report.iterations;
        res.reason = "frequency direction degenerate; ω held fixed";
      }
      out.sigma = model.sigma(out.omega);
    }
  } catch (const ConvergenceError& e) {
    res.work += e.report().work;
    res.accepted = false;
    res.h_next = 0.5 * h;
    res.reason = std::string("Newton failure: ") + e.what();
    return res;
  } catch (const Error& e) {
    res.accepted = false;
    res.h_next = 0.5 * h;
    res.reason = e.what();
    return res;
  }

  const int degree = std::min(s, static_cast<int>(history.size()) - 1);
  if (degree < 1) {
    res.accepted = true;
    res.h_next = h;
    return res;
  }
  const double err = local_error(history, out, degree, cfg.error_floor);
  res.error = err;
  out.error = err;
  const double expo = 1.0 / (degree + 1);
  if (err <= cfg.step_tol) {
    res.accepted = true;
    const double factor = err > 0.0 ? 0.9 * std::pow(cfg.step_tol / err, expo) : 2.0;
    res.h_next = h * std::clamp(factor, 0.2, 2.0);
  } else {
    res.accepted = false;
    res.h_next = 0.5 * h;
    res.reason = "local error " + std::to_string(err) + " above tolerance";
  }
  return res;
}

EnvelopeResult run_envelope(const Circuit& circuit, const EnvelopeConfig& cfg_in) {
  EnvelopeConfig cfg = cfg_in;
  if (!(cfg.tau_stop > 0.0)) throw std::invalid_argument("tau_stop must be positive");
  if (cfg.bdf_order < 1 || cfg.bdf_order > 2) throw std::invalid_argument("BDF order must be 1 or 2");
  if (cfg.h_init <= 0.0) cfg.h_init = cfg.tau_stop / 100.0;
  if (cfg.h_max <= 0.0) cfg.h_max = cfg.tau_stop;
  if (cfg.h_min <= 0.0) cfg.h_min = cfg.h_init * 1e-6;
  if (!(cfg.h_min <= cfg.h_init && cfg.h_init <= cfg.h_max)) {
    throw std::invalid_argument("envelope steps must satisfy 0 < h_min <= h_init <= h_max");
  }

  EnvelopeResult res;
  res.history.push_back(compute_initial_envelope(circuit, cfg));
  double h = cfg.h_init;
  const double end_tol = 1e-12 * cfg.tau_stop;
  while (res.history.back().tau < cfg.tau_stop - end_tol) {
    if (res.stats.accepted + res.stats.rejected >= cfg.max_steps) {
      throw StepUnderflowError("envelope step limit reached at tau = " +
                               std::to_string(res.history.back().tau));
    }
    const double remaining = cfg.tau_stop - res.history.back().tau;
    const double h_try = std::min({h, cfg.h_max, remaining});
    StepResult r = envelope_step(circuit, cfg, res.history, h_try);
    res.stats.work += r.work;
    res.stats.newton_iterations += r.newton_iterations;
    if (r.accepted) {
      res.stats.accepted += 1;
      if (!r.reason.empty()) res.warnings.push_back(r.reason);
      res.history.push_back(std::move(r.sample));
      h = h_try < h && h_try == remaining ? h : r.h_next;
    } else {
      res.stats.rejected += 1;
      h = r.h_next;
      if (h < cfg.h_min) {
        throw StepUnderflowError("envelope step underflow at tau = " +
                                 std::to_string(res.history.back().tau) + " (h = " +
                                 std::to_string(h) + "): " + r.reason);
      }
    }
  }
  return res;
}

double interpolate_sigma(const std::vector<EnvelopeSample>& history, double omega_ref,
                         double tau) {
  if (history.empty()) throw RangeError("empty envelope history");
  if (history.size() == 1) return history.front().sigma;
  auto it = std::upper_bound(history.begin(), history.end(), tau,
                             [](double t, const EnvelopeSample& s) { return t < s.tau; });
  std::size_t i = it == history.begin() ? 0 : static_cast<std::size_t>(it - history.begin()) - 1;
  i = std::min(i, history.size() - 2);
  const EnvelopeSample& a = history[i];
  const EnvelopeSample& b = history[i + 1];
  const double h = b.tau - a.tau;
  const double u = tau - a.tau;
  const double slope = (b.omega - a.omega) / h;
  const double partial = (omega_ref - a.omega) * u - 0.5 * slope * u * u;
  const double full = h * (omega_ref - 0.5 * (a.omega + b.omega));
  return a.sigma + partial + (u / h) * (b.sigma - a.sigma - full);
}

Eigen::MatrixXd reconstruct_univariate(const std::vector<EnvelopeSample>& history,
                                       const MultirateSplit& split, double theta,
                                       std::span<const double> times, int order) {
  if (history.empty()) throw RangeError("empty envelope history");
  const int n = history.front().x.dim();
  const double lo = history.front().tau;
  const double hi = history.back().tau;
  const double slack = 1e-12 * std::max(std::abs(hi - lo), 1e-300);
  Eigen::MatrixXd out(static_cast<long>(times.size()), n);
  const long hs = static_cast<long>(history.size());
  const int stencil = static_cast<int>(std::min<long>(order + 1, hs));
  for (std::size_t r = 0; r < times.size(); ++r) {
    const double t = times[r];
    if (t < lo - slack || t > hi + slack) {
      throw RangeError("reconstruction time " + std::to_string(t) + " outside envelope range [" +
                       std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    auto it = std::upper_bound(history.begin(), history.end(), t,
                               [](double v, const EnvelopeSample& s) { return v < s.tau; });
    long i = it == history.begin() ? 0 : static_cast<long>(it - history.begin()) - 1;
    i = std::min(i, hs - 2 < 0 ? 0 : hs - 2);
    // Stencil [i-1, i+1] for quadratics, shifted to stay inside the history.
    long first = stencil == 3 ? i - 1 : i;
    first = std::clamp(first, 0L, hs - stencil);
    std::vector<double> nodes;
    for (int j = 0; j < stencil; ++j) nodes.push_back(history[static_cast<std::size_t>(first + j)].tau);
    const std::vector<double> w = lagrange(nodes, t);
    const double phase = theta + split.omega_ref * t - interpolate_sigma(history, split.omega_ref, t);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < stencil; ++j) {
      x += w[j] * history[static_cast<std::size_t>(first + j)].x.eval(phase);
    }
    out.row(static_cast<long>(r)) = x.transpose();
  }
  return out;
}

}  // namespace mrwave
