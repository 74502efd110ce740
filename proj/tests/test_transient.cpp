#include <doctest.h>

#include <cmath>
#include <set>

#include "mrwave/transient.hpp"
#include "support.hpp"

using namespace mrwave;

namespace {

// RC charging from 0 V towards 1 V; returns the max relative error of v(out).
double rc_step_error(double step, int order) {
  const Circuit c = parse_netlist("V1 in 0 DC 1\nR1 in out 1k\nC1 out 0 1n");
  const double rc = 1e-6;
  TransientConfig cfg;
  cfg.t_stop = 5 * rc;
  cfg.step = step;
  cfg.bdf_order = order;
  cfg.newton_tol = 1e-12;
  cfg.initial = InitialCondition::given;
  cfg.x0 = Eigen::Vector3d(1.0, 0.0, -1e-3);
  for (int i = 1; i <= 50; ++i) cfg.output_times.push_back(cfg.t_stop * i / 50);
  const TransientResult r = transient(c, cfg);
  double err = 0.0;
  for (std::size_t i = 0; i < r.t.size(); ++i) {
    const double exact = 1.0 - std::exp(-r.t[i] / rc);
    err = std::max(err, std::abs(r.x[i](1) - exact));
  }
  return err;
}

}  // namespace

TEST_CASE("operating point of a resistive divider") {
  const Circuit c = parse_netlist("V1 in 0 DC 1\nR1 in mid 1k\nR2 mid 0 1k");
  const Eigen::VectorXd x = dc_operating_point(c);
  CHECK(x(c.find_variable("mid")) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(x(c.find_variable("in")) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("diode operating point agrees with bisection") {
  const Circuit c = parse_netlist("V1 in 0 DC 1\nR1 in a 1k\nD1 a 0 IS=1e-14 VT=0.02585");
  const Eigen::VectorXd x = dc_operating_point(c);
  auto h = [](double v) { return (1.0 - v) / 1e3 - 1e-14 * (std::exp(v / 0.02585) - 1.0); };
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) > 0.0 ? lo : hi) = mid;
  }
  CHECK(std::abs(x(c.find_variable("a")) - 0.5 * (lo + hi)) <= 1e-10);
}

TEST_CASE("source-free circuits rest at zero") {
  const Circuit c = parse_netlist("R1 a b 1k\nC1 b 0 1n\nL1 a 0 1u");
  CHECK(dc_operating_point(c).isZero(1e-14));
  TransientConfig cfg;
  cfg.t_stop = 1e-6;
  cfg.step = 1e-8;
  const TransientResult r = transient(c, cfg);
  // The first lattice interval is split into startup substeps.
  CHECK(r.t.size() == 101 + cfg.startup_substeps - 1);
  for (const Eigen::VectorXd& x : r.x) CHECK(x.isZero(1e-14));
}

TEST_CASE("RC step response") {
  const double rc = 1e-6;
  const double e100 = rc_step_error(rc / 100, 2);
  const double e200 = rc_step_error(rc / 200, 2);
  const double e400 = rc_step_error(rc / 400, 2);
  MESSAGE("BDF2 errors at RC/100, RC/200, RC/400: " << e100 << ", " << e200 << ", " << e400);
  // The leading BDF2 error term h^2/3 x''' caps accuracy near 1.2e-5 at RC/100.
  CHECK(e100 <= 1.5e-5);
  CHECK(e400 <= 1e-6);
  const double p2 = std::log2(e100 / e200);
  CHECK(p2 >= 1.7);
  CHECK(p2 <= 2.3);
  const double p1 = std::log2(rc_step_error(rc / 100, 1) / rc_step_error(rc / 200, 1));
  CHECK(p1 >= 0.7);
  CHECK(p1 <= 1.3);
}

TEST_CASE("LC tank keeps its energy") {
  const Circuit c = parse_netlist("L1 a 0 1u\nC1 a 0 1n");
  const double period = 2 * M_PI * std::sqrt(1e-6 * 1e-9);
  TransientConfig cfg;
  cfg.t_stop = 100 * period;
  cfg.step = period / 400;
  cfg.newton_tol = 1e-12;
  cfg.initial = InitialCondition::given;
  cfg.x0 = Eigen::Vector2d(1.0, 0.0);
  cfg.output_times = {0.0, cfg.t_stop};
  const TransientResult r = transient(c, cfg);
  auto energy = [](const Eigen::VectorXd& x) { return 0.5 * 1e-9 * x(0) * x(0) + 0.5 * 1e-6 * x(1) * x(1); };
  const double drift = std::abs(energy(r.x.back()) - energy(r.x.front())) / energy(r.x.front());
  MESSAGE("LC energy drift over 100 periods: " << drift);
  CHECK(drift <= 0.01);
}

TEST_CASE("steps stay on the lattice after Newton failures") {
  // A stiff diode with a Newton budget of two iterations forces halvings.
  const Circuit c = parse_netlist("V1 in 0 SIN(0 2 1meg)\nD1 in out\nR1 out 0 10k\nC1 out 0 1n");
  TransientConfig cfg;
  cfg.t_stop = 3e-6;
  cfg.step = 1e-7;
  cfg.max_newton = 2;
  cfg.max_halvings = 20;
  const TransientResult r = transient(c, cfg);
  CHECK(r.steps > 30);
  std::set<long> hit;
  for (double t : r.t) {
    const double k = t / cfg.step;
    if (std::abs(k - std::round(k)) <= 1e-9) hit.insert(std::lround(k));
  }
  // Every lattice point is reached exactly.
  CHECK(hit.size() == 31);
  CHECK(r.t.back() == cfg.t_stop);
}

TEST_CASE("abort carries the partial trajectory") {
  const Circuit c = parse_netlist("V1 in 0 SIN(0 2 1meg)\nD1 in out\nR1 out 0 10k\nC1 out 0 1n");
  TransientConfig cfg;
  cfg.t_stop = 3e-6;
  cfg.step = 1e-7;
  cfg.max_newton = 1;
  cfg.max_halvings = 2;
  try {
    transient(c, cfg);
    FAIL("expected an abort");
  } catch (const TransientError& e) {
    CHECK_FALSE(e.partial().t.empty());
    CHECK(e.partial().t.back() < cfg.t_stop);
  }
}

TEST_CASE("dense output at requested times") {
  const Circuit c = testing::load("rc.cir");
  TransientConfig cfg;
  cfg.t_stop = 2e-6;
  cfg.step = 1e-9;
  cfg.output_times = {1.5e-6, 0.25e-6, 1.0005e-6};
  const TransientResult r = transient(c, cfg);
  REQUIRE(r.t.size() == 3);
  CHECK(r.t[0] == 0.25e-6);
  CHECK(r.t[2] == 1.5e-6);
  CHECK(r.steps == 2000 + cfg.startup_substeps - 1);
}

TEST_CASE("invalid configurations") {
  const Circuit c = testing::load("rc.cir");
  TransientConfig cfg;
  cfg.t_stop = 1e-6;
  cfg.step = 0.0;
  CHECK_THROWS(transient(c, cfg));
  cfg.step = 1e-8;
  cfg.bdf_order = 3;
  CHECK_THROWS_AS(transient(c, cfg), std::invalid_argument);
  cfg.bdf_order = 2;
  cfg.initial = InitialCondition::given;
  cfg.x0 = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(transient(c, cfg), std::invalid_argument);
}
