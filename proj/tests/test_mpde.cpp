#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "mrwave/mpde.hpp"
#include "mrwave/transient.hpp"
#include "support.hpp"

using namespace mrwave;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

EnvelopeConfig plain_config(double tau_stop, int intervals) {
  EnvelopeConfig cfg;
  cfg.tau_stop = tau_stop;
  cfg.initial_intervals = intervals;
  cfg.refinement.adaptive = false;
  cfg.coarsen = false;
  return cfg;
}

}  // namespace

TEST_CASE("BDF coefficients") {
  const double h = 0.01;
  SUBCASE("first order is the backward difference") {
    const std::vector<double> nodes{1.0 + h, 1.0};
    const auto a = bdf_coeffs(nodes);
    CHECK(a[0] == doctest::Approx(1 / h));
    CHECK(a[1] == doctest::Approx(-1 / h));
  }
  SUBCASE("second order, uniform steps") {
    const std::vector<double> nodes{2 * h, h, 0.0};
    const auto a = bdf_coeffs(nodes);
    CHECK(a[0] == doctest::Approx(1.5 / h));
    CHECK(a[1] == doctest::Approx(-2 / h));
    CHECK(a[2] == doctest::Approx(0.5 / h));
  }
  SUBCASE("second order, step h after 2h differentiates tau^2") {
    const double t0 = 0.3;
    const std::vector<double> nodes{t0 + 3 * h, t0 + 2 * h, t0};
    const auto a = bdf_coeffs(nodes);
    double d = 0.0;
    for (int i = 0; i < 3; ++i) d += a[i] * nodes[i] * nodes[i];
    CHECK(d == doctest::Approx(2 * nodes[0]).epsilon(1e-12));
  }
  SUBCASE("exact on monomials for random nodes") {
    std::mt19937 rng(51);
    std::uniform_real_distribution<double> u(1e-3, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      for (int s : {1, 2}) {
        std::vector<double> nodes{u(rng) * 10};
        for (int i = 0; i < s; ++i) nodes.push_back(nodes.back() - u(rng) * 0.1);
        const auto a = bdf_coeffs(nodes);
        const double step = nodes[0] - nodes[1];
        for (int j = 0; j <= s; ++j) {
          double lhs = 0.0, mag = 0.0;
          for (int i = 0; i <= s; ++i) {
            lhs += a[i] * std::pow(nodes[i], j);
            mag += std::abs(a[i] * std::pow(nodes[i], j));
          }
          const double rhs = j == 0 ? 0.0 : j * std::pow(nodes[0], j - 1);
          CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(mag, 1.0 / step));
        }
      }
    }
  }
  SUBCASE("coincident nodes") {
    const std::vector<double> same{1.0, 1.0};
    CHECK_THROWS_AS(bdf_coeffs(same), NumericError);
    const std::vector<double> twice{1.0, 0.5, 0.5};
    CHECK_THROWS_AS(bdf_coeffs(twice), NumericError);
  }
}

TEST_CASE("shift update") {
  CHECK(sigma_update(0.0, 0.1, 1.0, 1.0, 1.0, 0.5) == 0.0);
  for (double W : {0.0, 0.3, 0.5, 1.0}) {
    CHECK(sigma_update(0.0, 0.1, 0.8, 0.8, 1.0, W) == doctest::Approx(0.02).epsilon(1e-14));
  }
  // Trapezoid on linear ω is exact.
  auto omega = [](double t) { return 1.0 + 0.3 * t; };
  double sigma = 0.0;
  const std::vector<double> taus{0.0, 0.1, 0.25, 0.3, 0.7, 1.0};
  for (std::size_t k = 1; k < taus.size(); ++k) {
    sigma = sigma_update(sigma, taus[k] - taus[k - 1], omega(taus[k - 1]), omega(taus[k]), 1.0, 0.5);
  }
  CHECK(std::abs(sigma - (-0.15)) <= 1e-12);
}

TEST_CASE("envelope forcing") {
  const Circuit c = testing::load("rectifier.cir");
  const KnotGrid g = KnotGrid::uniform(16, c.split.period, 4);
  std::mt19937 rng(52);
  const SplineCurve h1 = testing::random_curve(rng, g, c.n);
  const SplineCurve h2 = testing::random_curve(rng, g, c.n);
  const std::vector<double> nodes{3e-6, 2e-6, 0.5e-6};
  const auto alpha = bdf_coeffs(nodes);

  SUBCASE("zero weight removes the frequency derivative") {
    EnvelopeForcing f(c, nodes[0], alpha, {&h1, &h2});
    f.set_free_sigma(0.0, nodes[0] - nodes[1], 1.0, 0.0);
    Eigen::VectorXd val, dw;
    f.forcing(Eigen::VectorXd::Constant(c.n, 0.1), 0.3e-6, 1.01, val, nullptr, &dw);
    CHECK(dw.isZero(0.0));
    f.set_free_sigma(0.0, nodes[0] - nodes[1], 1.0, 0.5);
    f.forcing(Eigen::VectorXd::Constant(c.n, 0.1), 0.3e-6, 1.01, val, nullptr, &dw);
    CHECK_FALSE(dw.isZero(0.0));
  }
  SUBCASE("constant history cancels the charge terms") {
    Eigen::VectorXd xs(c.n);
    xs << 0.4, 0.3, -1e-4;
    const SplineCurve k1 = SplineCurve::constant(g, xs);
    EnvelopeForcing f(c, nodes[0], alpha, {&k1, &k1});
    f.set_fixed_sigma(0.2e-6);
    for (double t : {0.0, 0.4e-6, 0.77e-6}) {
      Eigen::VectorXd val, gx;
      f.forcing(xs, t, 1.0, val, nullptr, nullptr);
      eval_devices(c, xs, nullptr, &gx, nullptr, nullptr);
      const Eigen::VectorXd expect = gx + source_shifted(c, nodes[0], t, 0.2e-6);
      CHECK((val - expect).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + expect.cwiseAbs().maxCoeff()));
    }
  }
  SUBCASE("state Jacobian matches finite differences") {
    EnvelopeForcing f(c, nodes[0], alpha, {&h1, &h2});
    f.set_fixed_sigma(0.0);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd x(c.n);
      for (int i = 0; i < c.n; ++i) x(i) = u(rng);
      const double t = 0.05e-6 * trial;
      Eigen::VectorXd val;
      Eigen::MatrixXd D;
      f.forcing(x, t, 1.0, val, &D, nullptr);
      for (int j = 0; j < c.n; ++j) {
        const double hh = 1e-7;
        Eigen::VectorXd xp = x, xm = x, fp, fm;
        xp(j) += hh;
        xm(j) -= hh;
        f.forcing(xp, t, 1.0, fp, nullptr, nullptr);
        f.forcing(xm, t, 1.0, fm, nullptr, nullptr);
        const Eigen::VectorXd fd = (fp - fm) / (2 * hh);
        CHECK((fd - D.col(j)).cwiseAbs().maxCoeff() <= 1e-6 * D.cwiseAbs().maxCoeff());
      }
    }
  }
  SUBCASE("history length must match the weights") {
    CHECK_THROWS_AS(EnvelopeForcing(c, 1.0, alpha, {&h1}), std::invalid_argument);
    CHECK_THROWS_AS(EnvelopeForcing(c, 1.0, alpha, {&h1, nullptr}), Error);
  }
}

TEST_CASE("initial envelope of a source-free-of-carrier circuit is the DC point") {
  const Circuit c = parse_netlist("V1 in 0 DC 1\nR1 in out 1k\nC1 out 0 1n\nR2 out 0 3k");
  const EnvelopeSample s = compute_initial_envelope(c, plain_config(1.0, 16));
  for (double t : {0.0, 0.3, 0.71}) {
    const Eigen::VectorXd x = s.x.eval(t);
    CHECK(x(0) == doctest::Approx(1.0));
    CHECK(x(1) == doctest::Approx(0.75));
    CHECK(x(2) == doctest::Approx(-0.25e-3));
  }
  CHECK(s.omega == 1.0);
  CHECK(s.sigma == 0.0);
}

TEST_CASE("initial envelope of a sine-driven RC matches the phasor solution") {
  const Circuit c = testing::load("rc.cir");
  EnvelopeConfig cfg = plain_config(1.0, 256);
  cfg.newton_tol = 1e-12;
  const EnvelopeSample s = compute_initial_envelope(c, cfg);
  const double w = kTwoPi * 1e6;
  const std::complex<double> H = 1.0 / std::complex<double>(1.0, w * 1e3 * 1e-9);
  const int out = c.find_variable("v(out)");
  double err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double t = 1e-6 * (i + 0.5) / 1000;
    const double exact = std::abs(H) * std::sin(w * t + std::arg(H));
    err = std::max(err, std::abs(s.x.eval(t)(out) - exact));
  }
  CHECK(err <= 1e-8 * std::abs(H));
}

TEST_CASE("stationary envelope stays put") {
  const Circuit c = testing::load("rc.cir");
  EnvelopeConfig cfg = plain_config(1e-4, 32);
  cfg.h_init = 1e-5;
  const EnvelopeResult r = run_envelope(c, cfg);
  REQUIRE(r.history.size() >= 3);
  const SplineCurve& x0 = r.history.front().x;
  for (const EnvelopeSample& s : r.history) {
    CHECK(testing::curve_distance(x0, s.x) <= 2 * cfg.newton_tol);
    CHECK(s.omega == 1.0);
    CHECK(s.sigma == 0.0);
  }
  // Nothing moves, so the controller only grows the step.
  CHECK(r.stats.rejected == 0);
}

TEST_CASE("one envelope step agrees with a settled transient") {
  const Circuit c = testing::load("rc.cir");
  EnvelopeConfig cfg = plain_config(1e-4, 256);
  cfg.newton_tol = 1e-12;
  const EnvelopeSample x0 = compute_initial_envelope(c, cfg);
  const StepResult step = envelope_step(c, cfg, {x0}, 5e-6);
  REQUIRE(step.accepted);
  const SplineCurve& x1 = step.sample.x;

  const double P = 1e-6;
  TransientConfig tc;
  tc.t_stop = 3 * P;
  tc.step = P / 4000;
  tc.initial = InitialCondition::given;
  tc.x0 = x1.eval(0.0);
  for (int i = 0; i <= 100; ++i) tc.output_times.push_back(2 * P + P * i / 100);
  const TransientResult tr = transient(c, tc);
  double err = 0.0, mag = 0.0;
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    const Eigen::VectorXd xe = x1.eval(tr.t[i]);
    err = std::max(err, (xe - tr.x[i]).head(2).cwiseAbs().maxCoeff());
    mag = std::max(mag, xe.head(2).cwiseAbs().maxCoeff());
  }
  CHECK(err <= 1e-6 * mag);
}

TEST_CASE("reconstruction along the characteristic") {
  const double P = 1e-3;
  const KnotGrid g = KnotGrid::uniform(256, P, 4);
  const SplineCurve sine = testing::interpolate(g, 1, [&](double t) {
    return Eigen::VectorXd::Constant(1, std::sin(kTwoPi * t / P));
  });
  const MultirateSplit split{P, 1.0};
  std::vector<double> times;
  for (int i = 0; i <= 500; ++i) times.push_back(0.02 * i / 500);

  SUBCASE("constant reference frequency") {
    std::vector<EnvelopeSample> h(3);
    for (int k = 0; k < 3; ++k) h[k] = {0.01 * k, 1.0, 0.0, sine, 0.0, 1};
    for (double theta : {0.0, P / 2}) {
      const Eigen::MatrixXd x = reconstruct_univariate(h, split, theta, times);
      double err = 0.0;
      for (std::size_t i = 0; i < times.size(); ++i) {
        const double sign = theta == 0.0 ? 1.0 : -1.0;
        err = std::max(err, std::abs(x(static_cast<long>(i), 0) - sign * std::sin(kTwoPi * times[i] / P)));
      }
      CHECK(err <= 1e-8);
    }
  }
  SUBCASE("constant detuned frequency") {
    // ω = 1.2 means 1.2 fast periods per unit of P, σ grows like (1 - 1.2) τ.
    std::vector<EnvelopeSample> h(3);
    for (int k = 0; k < 3; ++k) h[k] = {0.01 * k, 1.2, -0.2 * 0.01 * k, sine, 0.0, 1};
    const Eigen::MatrixXd x = reconstruct_univariate(h, split, 0.0, times);
    double err = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      err = std::max(err, std::abs(x(static_cast<long>(i), 0) - std::sin(kTwoPi * 1.2 * times[i] / P)));
    }
    CHECK(err <= 1e-8);
  }
  SUBCASE("outside the stored range") {
    std::vector<EnvelopeSample> h(2);
    for (int k = 0; k < 2; ++k) h[k] = {0.01 * k, 1.0, 0.0, sine, 0.0, 1};
    const std::vector<double> late{0.011};
    CHECK_THROWS_AS(reconstruct_univariate(h, split, 0.0, late), RangeError);
    CHECK_THROWS_AS(reconstruct_univariate({}, split, 0.0, late), RangeError);
  }
}

TEST_CASE("shift in fixed-frequency mode follows the integral of the detuning") {
  const Circuit c = testing::load("rc.cir");
  EnvelopeConfig cfg = plain_config(2e-4, 16);
  cfg.omega_fn = [](double tau) { return 1.0 + 0.01 * std::sin(kTwoPi * tau / 2e-4); };
  cfg.h_init = 1e-5;
  const EnvelopeResult r = run_envelope(c, cfg);
  for (const EnvelopeSample& s : r.history) {
    const double exact = 0.01 * 2e-4 / kTwoPi * (std::cos(kTwoPi * s.tau / 2e-4) - 1.0);
    CHECK(std::abs(s.sigma - exact) <= 1e-12 * 2e-4);
    CHECK(s.omega == doctest::Approx(cfg.omega_fn(s.tau)));
    // Interpolated shift reproduces the stored values.
    CHECK(interpolate_sigma(r.history, 1.0, s.tau) == doctest::Approx(s.sigma).epsilon(1e-12));
  }
}

TEST_CASE("step halving ends in an underflow") {
  const Circuit c = testing::load("fm_rc.cir");
  EnvelopeConfig cfg = plain_config(0.1, 16);
  cfg.mode = FrequencyMode::free;
  cfg.step_tol = 1e-14;
  cfg.h_init = 1e-2;
  cfg.h_min = 2e-3;
  CHECK_THROWS_AS(run_envelope(c, cfg), StepUnderflowError);
}

TEST_CASE("invalid configurations") {
  const Circuit c = testing::load("rc.cir");
  EnvelopeConfig cfg = plain_config(0.0, 16);
  CHECK_THROWS_AS(run_envelope(c, cfg), std::invalid_argument);
  cfg.tau_stop = 1.0;
  cfg.bdf_order = 3;
  CHECK_THROWS_AS(run_envelope(c, cfg), std::invalid_argument);
  cfg.bdf_order = 2;
  cfg.h_init = 0.1;
  cfg.h_min = 0.2;
  CHECK_THROWS_AS(run_envelope(c, cfg), std::invalid_argument);
}
