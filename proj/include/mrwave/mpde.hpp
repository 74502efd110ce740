#pragma once

// Envelope integration of the multirate PDAE
//
//   ∂τ q(x̂) + ω(τ) ∂t q(x̂) + g(x̂) + ŝ(τ, t) = 0,   ŝ(τ, t) = s̃(τ, t + σ(τ)),
//
// by Rothe's method: variable-step BDF in τ turns every step into a periodic
// boundary value problem in t, solved with adaptive spline Galerkin.

#include <functional>
#include <span>
#include <vector>

#include "mrwave/adaptive.hpp"
#include "mrwave/circuit.hpp"
#include "mrwave/galerkin.hpp"

namespace mrwave {

/// BDF weights for nodes τ_k, τ_{k-1}, ..., τ_{k-s}: sum α_i p(τ_{k-i}) = p'(τ_k)
/// for every polynomial of degree <= s. Throws NumericError on coincident nodes.
std::vector<double> bdf_coeffs(std::span<const double> nodes);

/// σ_k = σ_{k-1} + Δτ ((ω̃ - ω_{k-1})(1 - W) + (ω̃ - ω_k) W).
double sigma_update(double sigma_prev, double dtau, double omega_prev, double omega_k,
                    double omega_ref, double weight);

/// f_k(x, t) = α_0 q(x) + g(x) + ŝ(τ_k, t) + sum_{i>=1} α_i q(X_{k-i}(t)).
///
/// In free-frequency mode σ_k follows ω through sigma_update and the ω-partial
/// is -Δτ W ∂t s̃(τ_k, t + σ_k). With no history and α_0 = 0 this is the plain
/// periodic steady state problem.
class EnvelopeForcing : public PbvpModel {
 public:
  EnvelopeForcing(const Circuit& circuit, double tau_k, std::vector<double> alpha,
                  std::vector<const SplineCurve*> history);

  /// Fixed shift σ_k (fixed-frequency mode).
  void set_fixed_sigma(double sigma);
  /// σ_k as a function of the unknown ω (free-frequency mode).
  void set_free_sigma(double sigma_prev, double dtau, double omega_prev, double weight);
  /// Homotopy ŝ_λ = (1 - λ) s(0) + λ ŝ used to reach a periodic steady state.
  void set_source_scale(double lambda);

  double sigma(double omega) const;

  int dim() const override { return circuit_.n; }
  void charge(const Eigen::VectorXd& x, Eigen::VectorXd& q, Eigen::MatrixXd* C) const override;
  void forcing(const Eigen::VectorXd& x, double t, double omega, Eigen::VectorXd& f,
               Eigen::MatrixXd* Dx, Eigen::VectorXd* Domega) const override;

 private:
  const Circuit& circuit_;
  double tau_;
  std::vector<double> alpha_;
  std::vector<const SplineCurve*> history_;
  bool free_ = false;
  double sigma_fixed_ = 0.0;
  double sigma_prev_ = 0.0;
  double dtau_ = 0.0;
  double omega_prev_ = 0.0;
  double weight_ = 0.5;
  double lambda_ = 1.0;
  Eigen::VectorXd s_start_;
};

enum class FrequencyMode { fixed, free };

struct EnvelopeConfig {
  double tau_stop = 0.0;
  double h_init = 0.0;  ///< 0: tau_stop / 100
  double h_min = 0.0;   ///< 0: h_init * 1e-6
  double h_max = 0.0;   ///< 0: tau_stop
  int bdf_order = 2;
  double newton_tol = 1e-8;
  double step_tol = 1e-3;     ///< local τ-error tolerance (scaled)
  double error_floor = 1e-6;  ///< absolute floor in the local error scaling
  double weight = 0.5;
  FrequencyMode mode = FrequencyMode::fixed;
  std::function<double(double)> omega_fn;  ///< fixed mode; empty means ω ≡ ω̃
  RefinementPolicy refinement;
  GalerkinOptions galerkin;
  int spline_order = 4;
  int initial_intervals = 16;
  bool coarsen = true;
  int max_steps = 100000;
};

struct EnvelopeSample {
  double tau = 0.0;
  double omega = 0.0;
  double sigma = 0.0;
  SplineCurve x;
  double error = 0.0;  ///< local error estimate of the step that produced it
  int order = 0;
};

struct EnvelopeStats {
  int accepted = 0;
  int rejected = 0;
  int newton_iterations = 0;
  WorkCounters work;
};

struct EnvelopeResult {
  std::vector<EnvelopeSample> history;
  EnvelopeStats stats;
  std::vector<std::string> warnings;
};

struct StepResult {
  bool accepted = false;
  EnvelopeSample sample;
  double error = 0.0;  ///< scaled local error; 0 when not estimated
  double h_next = 0.0;
  int newton_iterations = 0;
  WorkCounters work;
  std::string reason;
};

/// Effective ω at τ in fixed mode.
double fixed_omega(const Circuit& circuit, const EnvelopeConfig& cfg, double tau);

/// Periodic steady state at τ = 0 from the DC operating point, with source
/// homotopy on failure. Free mode starts from ω_0 = ω̃.
EnvelopeSample compute_initial_envelope(const Circuit& circuit, const EnvelopeConfig& cfg);

/// One attempt of size h from the end of `history`. Never throws on solver
/// failure; returns accepted = false with a reason instead.
StepResult envelope_step(const Circuit& circuit, const EnvelopeConfig& cfg,
                         const std::vector<EnvelopeSample>& history, double h);

/// Integrate to cfg.tau_stop. Throws StepUnderflowError below h_min.
EnvelopeResult run_envelope(const Circuit& circuit, const EnvelopeConfig& cfg);

/// x_θ(t) = x̂(t, Ω_θ(t)) with Ω_θ(t) = θ + ω̃ t - σ(t), at each time in
/// `times` (rows of the result). x̂ is interpolated in τ with the polynomial
/// order of the integration, σ from the stored ω track.
Eigen::MatrixXd reconstruct_univariate(const std::vector<EnvelopeSample>& history,
                                       const MultirateSplit& split, double theta,
                                       std::span<const double> times, int order = 2);

/// σ(τ) between stored samples: integral of linearly interpolated ω, corrected
/// linearly so stored σ_k are reproduced.
double interpolate_sigma(const std::vector<EnvelopeSample>& history, double omega_ref, double tau);

}  // namespace mrwave
