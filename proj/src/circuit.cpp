#include "mrwave/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mrwave/errors.hpp"

namespace mrwave {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Diode exponent beyond which exp is continued linearly.
constexpr double kExpLimit = 40.0;

double frac(double u) { return u - std::floor(u); }

// Trapezoidal pulse over one unit of phase: low v1, ramp to v2 over [0, r),
// hold until 1/2, ramp back over [1/2, 1/2 + r). Returns value and d/dphase.
std::pair<double, double> trapezoid(double v1, double v2, double r, double phase) {
  const double p = frac(phase);
  const double slope = (v2 - v1) / r;
  if (p < r) return {v1 + slope * p, slope};
  if (p < 0.5) return {v2, 0.0};
  if (p < 0.5 + r) return {v2 - slope * (p - 0.5), -slope};
  return {v1, 0.0};
}

void limexp(double a, double& e, double& de) {
  if (a <= kExpLimit) {
    e = std::exp(a);
    de = e;
  } else {
    const double el = std::exp(kExpLimit);
    e = el * (1.0 + (a - kExpLimit));
    de = el;
  }
}

// Level-1 drain current for vds >= 0 with partials in vgs and vds.
void square_law(const Device& d, double vgs, double vds, double& id, double& gm, double& gds) {
  const double vov = vgs - d.vt0;
  const double clm = 1.0 + d.lambda * vds;
  if (vov <= 0.0) {
    id = gm = gds = 0.0;
  } else if (vds < vov) {
    const double core = vov * vds - 0.5 * vds * vds;
    id = d.k * core * clm;
    gm = d.k * vds * clm;
    gds = d.k * (vov - vds) * clm + d.k * core * d.lambda;
  } else {
    id = 0.5 * d.k * vov * vov * clm;
    gm = d.k * vov * clm;
    gds = 0.5 * d.k * vov * vov * d.lambda;
  }
}

struct Stamper {
  Eigen::VectorXd* q;
  Eigen::VectorXd* g;
  Eigen::MatrixXd* C;
  Eigen::MatrixXd* G;

  static void add(Eigen::VectorXd* v, int i, double a) {
    if (v && i >= 0) (*v)(i) += a;
  }
  static void add(Eigen::MatrixXd* m, int i, int j, double a) {
    if (m && i >= 0 && j >= 0) (*m)(i, j) += a;
  }
  // Two-terminal element with current/charge y(v+ - v-) and derivative dy.
  static void two_terminal(Eigen::VectorXd* v, Eigen::MatrixXd* m, int a, int b, double y,
                           double dy) {
    add(v, a, y);
    add(v, b, -y);
    add(m, a, a, dy);
    add(m, a, b, -dy);
    add(m, b, a, -dy);
    add(m, b, b, dy);
  }
};

}  // namespace

double SourceSpec::value(double t) const {
  switch (kind) {
    case SourceKind::dc:
      return offset;
    case SourceKind::sine:
      return offset + amplitude * std::sin(kTwoPi * frequency * t);
    case SourceKind::fm_sine: {
      const double beta = mod_frequency > 0.0 ? deviation / mod_frequency : 0.0;
      return offset + amplitude * std::sin(kTwoPi * frequency * t +
                                           beta * std::sin(kTwoPi * mod_frequency * t));
    }
    case SourceKind::am_product:
      return offset + amplitude * (1.0 + depth * std::sin(kTwoPi * mod_frequency * t)) *
                          std::sin(kTwoPi * frequency * t);
    case SourceKind::pulse_train:
      return trapezoid(offset, amplitude, rise, frequency * t).first;
  }
  return 0.0;
}

std::pair<double, double> source_bivariate(const SourceSpec& src, const MultirateSplit& split,
                                           double tau, double t_fast) {
  if (src.kind == SourceKind::dc) return {src.offset, 0.0};
  if (src.role == SourceRole::slow) return {src.value(tau), 0.0};
  // Carrier harmonic k of the fast axis plus a slow residual frequency delta,
  // so that u(t, w~ t) = f t along the reference characteristic.
  const double P = split.period;
  const double k = std::round(src.frequency * P / split.omega_ref);
  const double delta = src.frequency - k * split.omega_ref / P;
  const double u = k * t_fast / P + delta * tau;
  const double du = k / P;
  switch (src.kind) {
    case SourceKind::sine: {
      const double a = kTwoPi * u;
      return {src.offset + src.amplitude * std::sin(a), src.amplitude * std::cos(a) * kTwoPi * du};
    }
    case SourceKind::fm_sine: {
      const double beta = src.mod_frequency > 0.0 ? src.deviation / src.mod_frequency : 0.0;
      const double a = kTwoPi * u + beta * std::sin(kTwoPi * src.mod_frequency * tau);
      return {src.offset + src.amplitude * std::sin(a), src.amplitude * std::cos(a) * kTwoPi * du};
    }
    case SourceKind::am_product: {
      const double env = src.amplitude * (1.0 + src.depth * std::sin(kTwoPi * src.mod_frequency * tau));
      const double a = kTwoPi * u;
      return {src.offset + env * std::sin(a), env * std::cos(a) * kTwoPi * du};
    }
    case SourceKind::pulse_train: {
      const auto [v, dv] = trapezoid(src.offset, src.amplitude, src.rise, u);
      return {v, dv * du};
    }
    case SourceKind::dc:
      break;
  }
  return {src.offset, 0.0};
}

std::string Circuit::variable_name(int index) const {
  if (index < 0 || index >= n) throw std::out_of_range("variable index out of range");
  if (index < node_count) return "v(" + node_names[index] + ")";
  for (const Device& d : devices) {
    if (d.branch == index) return "i(" + d.name + ")";
  }
  return "x" + std::to_string(index);
}

int Circuit::find_variable(std::string_view name) const {
  for (int i = 0; i < n; ++i) {
    if (variable_name(i) == name) return i;
  }
  if (auto it = node_index.find(std::string(name)); it != node_index.end()) return it->second;
  return -1;
}

double Circuit::carrier_frequency() const {
  double f = 0.0;
  for (const SourceSpec& s : sources) {
    if (s.kind != SourceKind::dc && s.role == SourceRole::fast) f = std::max(f, s.frequency);
  }
  return f;
}

MultirateSplit Circuit::default_split() const {
  const double f = carrier_frequency();
  if (f > 0.0) return {1.0 / f, 1.0};
  return {1.0, 1.0};
}

void Circuit::set_period(double period) {
  if (!(period > 0.0) || !std::isfinite(period)) throw Error("period must be positive");
  const double f = carrier_frequency();
  split.period = period;
  split.omega_ref = f > 0.0 ? period * f : 1.0;
}

void eval_devices(const Circuit& c, const Eigen::VectorXd& x, Eigen::VectorXd* q,
                  Eigen::VectorXd* g, Eigen::MatrixXd* C, Eigen::MatrixXd* G) {
  if (q) q->setZero(c.n);
  if (g) g->setZero(c.n);
  if (C) C->setZero(c.n, c.n);
  if (G) G->setZero(c.n, c.n);
  auto v = [&](int i) { return i < 0 ? 0.0 : x(i); };
  using S = Stamper;
  for (const Device& d : c.devices) {
    const int a = d.nodes.size() > 0 ? d.nodes[0] : -1;
    const int b = d.nodes.size() > 1 ? d.nodes[1] : -1;
    switch (d.type) {
      case DeviceType::resistor: {
        const double gc = 1.0 / d.value;
        S::two_terminal(g, G, a, b, gc * (v(a) - v(b)), gc);
        break;
      }
      case DeviceType::capacitor:
        S::two_terminal(q, C, a, b, d.value * (v(a) - v(b)), d.value);
        break;
      case DeviceType::inductor: {
        const int br = d.branch;
        const double i = x(br);
        S::add(g, a, i);
        S::add(g, b, -i);
        S::add(G, a, br, 1.0);
        S::add(G, b, br, -1.0);
        S::add(q, br, d.value * i);
        S::add(C, br, br, d.value);
        S::add(g, br, -(v(a) - v(b)));
        S::add(G, br, a, -1.0);
        S::add(G, br, b, 1.0);
        break;
      }
      case DeviceType::vsource: {
        const int br = d.branch;
        const double i = x(br);
        S::add(g, a, i);
        S::add(g, b, -i);
        S::add(G, a, br, 1.0);
        S::add(G, b, br, -1.0);
        S::add(g, br, v(a) - v(b));
        S::add(G, br, a, 1.0);
        S::add(G, br, b, -1.0);
        break;
      }
      case DeviceType::isource:
        break;
      case DeviceType::diode: {
        double e = 0.0;
        double de = 0.0;
        limexp((v(a) - v(b)) / d.vt, e, de);
        S::two_terminal(g, G, a, b, d.is * (e - 1.0), d.is * de / d.vt);
        break;
      }
      case DeviceType::mosfet: {
        const int nd = d.nodes[0];
        const int ng = d.nodes[1];
        const int ns = d.nodes[2];
        const double vd = v(nd);
        const double vg = v(ng);
        const double vs = v(ns);
        double id = 0.0;
        double gm = 0.0;
        double gds = 0.0;
        double did_d = 0.0;
        double did_g = 0.0;
        double did_s = 0.0;
        if (vd >= vs) {
          square_law(d, vg - vs, vd - vs, id, gm, gds);
          did_d = gds;
          did_g = gm;
          did_s = -gm - gds;
        } else {
          // Source and drain swap roles; current flows s -> d.
          square_law(d, vg - vd, vs - vd, id, gm, gds);
          id = -id;
          did_s = -gds;
          did_g = -gm;
          did_d = gm + gds;
        }
        S::add(g, nd, id);
        S::add(g, ns, -id);
        const int cols[3] = {nd, ng, ns};
        const double dd[3] = {did_d, did_g, did_s};
        for (int k = 0; k < 3; ++k) {
          S::add(G, nd, cols[k], dd[k]);
          S::add(G, ns, cols[k], -dd[k]);
        }
        break;
      }
    }
  }
}

void stamp_sources(const Circuit& c, const Eigen::VectorXd& v, Eigen::VectorXd& s) {
  s.setZero(c.n);
  for (const Device& d : c.devices) {
    if (d.source < 0) continue;
    const double val = v(d.source);
    if (d.type == DeviceType::vsource) {
      s(d.branch) -= val;
    } else {
      if (d.nodes[0] >= 0) s(d.nodes[0]) += val;
      if (d.nodes[1] >= 0) s(d.nodes[1]) -= val;
    }
  }
}

Assembly assemble(const Circuit& c, const Eigen::VectorXd& x, double t) {
  if (x.size() != c.n) throw std::invalid_argument("state size does not match circuit");
  if (!x.allFinite()) throw NumericError("non-finite state vector");
  Assembly out;
  eval_devices(c, x, &out.q, &out.g, &out.C, &out.G);
  out.s = source_univariate(c, t);
  if (!out.q.allFinite() || !out.g.allFinite() || !out.G.allFinite()) {
    throw NumericError("device evaluation produced non-finite values");
  }
  return out;
}

Eigen::VectorXd source_univariate(const Circuit& c, double t) {
  Eigen::VectorXd v(static_cast<long>(c.sources.size()));
  for (std::size_t i = 0; i < c.sources.size(); ++i) v(static_cast<long>(i)) = c.sources[i].value(t);
  Eigen::VectorXd s;
  stamp_sources(c, v, s);
  return s;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> source_bivariate(const Circuit& c, double tau,
                                                             double t_fast) {
  const long ns = static_cast<long>(c.sources.size());
  Eigen::VectorXd v(ns);
  Eigen::VectorXd dv(ns);
  for (long i = 0; i < ns; ++i) {
    const auto [a, b] = source_bivariate(c.sources[static_cast<std::size_t>(i)], c.split, tau, t_fast);
    v(i) = a;
    dv(i) = b;
  }
  std::pair<Eigen::VectorXd, Eigen::VectorXd> out;
  stamp_sources(c, v, out.first);
  stamp_sources(c, dv, out.second);
  return out;
}

Eigen::VectorXd source_shifted(const Circuit& c, double tau, double t_fast, double sigma) {
  return source_bivariate(c, tau, t_fast + sigma).first;
}

}  // namespace mrwave
