#include "mrwave/export.hpp"

#include <cstdio>

#include "mrwave/errors.hpp"

namespace mrwave {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<int> resolve_columns(const Circuit& circuit, const std::vector<std::string>& names) {
  std::vector<int> cols;
  if (names.empty()) {
    for (int i = 0; i < circuit.n; ++i) cols.push_back(i);
    return cols;
  }
  for (const std::string& name : names) {
    const int idx = circuit.find_variable(name);
    if (idx < 0) throw Error("unknown node or variable '" + name + "'");
    cols.push_back(idx);
  }
  return cols;
}

void export_surface(std::ostream& os, const Circuit& circuit,
                    const std::vector<EnvelopeSample>& history,
                    const std::vector<std::string>& nodes, int samples) {
  if (samples < 1) throw Error("surface sample count must be positive");
  const std::vector<int> cols = resolve_columns(circuit, nodes);
  os << "tau,t,node,value\n";
  for (const EnvelopeSample& s : history) {
    const double P = s.x.grid().period();
    const double t0 = s.x.grid().start();
    for (int i = 0; i < samples; ++i) {
      const double t = t0 + P * i / samples;
      const Eigen::VectorXd x = s.x.eval(t);
      for (int c : cols) {
        os << format_double(s.tau) << ',' << format_double(t) << ',' << circuit.variable_name(c)
           << ',' << format_double(x(c)) << '\n';
      }
    }
  }
}

void export_grid(std::ostream& os, const std::vector<EnvelopeSample>& history) {
  os << "tau,t_knot\n";
  for (const EnvelopeSample& s : history) {
    for (double k : s.x.grid().knots()) os << format_double(s.tau) << ',' << format_double(k) << '\n';
  }
}

void export_omega(std::ostream& os, const std::vector<EnvelopeSample>& history, double period) {
  os << "tau,omega,f_inst\n";
  for (const EnvelopeSample& s : history) {
    os << format_double(s.tau) << ',' << format_double(s.omega) << ','
       << format_double(s.omega / period) << '\n';
  }
}

namespace {

void header(std::ostream& os, const Circuit& circuit, const std::vector<int>& columns) {
  os << 't';
  for (int c : columns) os << ',' << circuit.variable_name(c);
  os << '\n';
}

}  // namespace

void export_transient(std::ostream& os, const Circuit& circuit, const TransientResult& tr,
                      const std::vector<int>& columns) {
  header(os, circuit, columns);
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    os << format_double(tr.t[k]);
    for (int c : columns) os << ',' << format_double(tr.x[k](c));
    os << '\n';
  }
}

void export_periodic(std::ostream& os, const Circuit& circuit, const SplineCurve& x,
                     const std::vector<int>& columns, int samples) {
  header(os, circuit, columns);
  const double P = x.grid().period();
  const double t0 = x.grid().start();
  for (int i = 0; i <= samples; ++i) {
    const double t = t0 + P * i / samples;
    const Eigen::VectorXd v = x.eval(t);
    os << format_double(t);
    for (int c : columns) os << ',' << format_double(v(c));
    os << '\n';
  }
}

}  // namespace mrwave
