#include "mrwave/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mrwave/circuit.hpp"
#include "mrwave/errors.hpp"
#include "mrwave/export.hpp"
#include "mrwave/mpde.hpp"
#include "mrwave/transient.hpp"

namespace mrwave {

namespace {

struct RunConfig {
  std::string analysis;
  std::string netlist;
  double period = 0.0;
  double tau_stop = 0.0;
  double h_init = 0.0;
  int bdf_order = 2;
  bool free_omega = false;
  double weight = 0.5;
  double wavelet_eps = 1e-4;
  int spline_order = 4;
  double tol = 1e-8;
  double step_tol = 1e-3;
  int intervals = 16;
  bool no_adapt = false;
  std::string out = "out";
  double tstop = 0.0;
  double tstep = 0.0;
  std::vector<std::string> nodes;
  int samples = 64;
  unsigned seed = 0;
};

std::ofstream open_output(const std::filesystem::path& dir, const std::string& name) {
  std::ofstream f(dir / name);
  if (!f) throw Error("cannot write " + (dir / name).string());
  return f;
}

void write_gnuplot(const std::filesystem::path& dir) {
  std::ofstream f = open_output(dir, "envelope.gp");
  f << "set datafile separator ','\n"
       "set xlabel 't'\nset ylabel 'tau'\n"
       "splot 'envelope_surface.csv' every ::1 using 2:1:4 with points pt 7 ps 0.3 title 'x(tau,t)'\n";
}

int run_analysis(const RunConfig& rc, std::ostream& out) {
  std::ifstream in(rc.netlist);
  if (!in) throw std::runtime_error("cannot open netlist '" + rc.netlist + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  Circuit circuit = parse_netlist(buf.str());
  if (rc.period > 0.0) circuit.set_period(rc.period);
  std::vector<int> columns;
  try {
    columns = resolve_columns(circuit, rc.nodes);
  } catch (const Error& e) {
    throw CLI::ValidationError("--nodes", e.what());
  }

  const std::filesystem::path dir(rc.out);
  std::filesystem::create_directories(dir);

  if (rc.analysis == "tran") {
    if (!(rc.tstop > 0.0)) throw CLI::ValidationError("--tstop", "tran needs --tstop > 0");
    TransientConfig tc;
    tc.t_stop = rc.tstop;
    tc.step = rc.tstep > 0.0 ? rc.tstep : rc.tstop / 1000.0;
    tc.bdf_order = rc.bdf_order;
    const TransientResult tr = transient(circuit, tc);
    std::ofstream f = open_output(dir, "tran.csv");
    export_transient(f, circuit, tr, columns);
    out << "tran: " << tr.steps << " steps, " << tr.newton_iterations << " Newton iterations\n";
    return 0;
  }

  EnvelopeConfig ec;
  ec.tau_stop = rc.tau_stop;
  ec.h_init = rc.h_init;
  ec.bdf_order = rc.bdf_order;
  ec.mode = rc.free_omega ? FrequencyMode::free : FrequencyMode::fixed;
  ec.weight = rc.weight;
  ec.refinement.eps = rc.wavelet_eps;
  ec.refinement.adaptive = !rc.no_adapt;
  ec.spline_order = rc.spline_order;
  ec.newton_tol = rc.tol;
  ec.step_tol = rc.step_tol;
  ec.initial_intervals = rc.intervals;

  if (rc.analysis == "pss") {
    const EnvelopeSample s = compute_initial_envelope(circuit, ec);
    std::ofstream f = open_output(dir, "pss.csv");
    export_periodic(f, circuit, s.x, columns, rc.samples);
    std::ofstream g = open_output(dir, "grid.csv");
    export_grid(g, {s});
    out << "pss: " << s.x.grid().size() << " knots\n";
    return 0;
  }

  if (!(rc.tau_stop > 0.0)) throw CLI::ValidationError("--tau-stop", "envelope needs --tau-stop > 0");
  const EnvelopeResult er = run_envelope(circuit, ec);
  std::vector<std::string> names;
  for (int c : columns) names.push_back(circuit.variable_name(c));
  {
    std::ofstream f = open_output(dir, "envelope_surface.csv");
    export_surface(f, circuit, er.history, names, rc.samples);
  }
  {
    std::ofstream f = open_output(dir, "grid.csv");
    export_grid(f, er.history);
  }
  {
    std::ofstream f = open_output(dir, "omega.csv");
    export_omega(f, er.history, circuit.split.period);
  }
  write_gnuplot(dir);
  out << "envelope: " << er.stats.accepted << " steps accepted, " << er.stats.rejected
      << " rejected, " << er.stats.newton_iterations << " Newton iterations\n";
  for (const std::string& w : er.warnings) out << "warning: " << w << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  CLI::App app("Multirate envelope circuit simulator", "mrwave");
  app.add_option("analysis", rc.analysis, "tran, pss or envelope")
      ->required()
      ->check(CLI::IsMember({"tran", "pss", "envelope"}));
  app.add_option("netlist", rc.netlist, "netlist file")->required();
  app.add_option("--period", rc.period, "fast-time period P");
  app.add_option("--tau-stop", rc.tau_stop, "end of the envelope time axis");
  app.add_option("--h-init", rc.h_init, "initial envelope step");
  app.add_option("--bdf-order", rc.bdf_order, "BDF order")->check(CLI::Range(1, 2));
  app.add_flag("--free-omega", rc.free_omega, "estimate the local frequency");
  app.add_option("--weight", rc.weight, "σ quadrature weight W")->check(CLI::Range(0.0, 1.0));
  app.add_option("--wavelet-eps", rc.wavelet_eps, "wavelet detail threshold");
  app.add_option("--spline-order", rc.spline_order, "spline order")->check(CLI::IsMember({3, 4}));
  app.add_option("--tol", rc.tol, "Newton tolerance (scaled)")->check(CLI::PositiveNumber);
  app.add_option("--step-tol", rc.step_tol, "envelope local error tolerance")
      ->check(CLI::PositiveNumber);
  app.add_option("--intervals", rc.intervals, "initial uniform intervals")->check(CLI::Range(4, 100000));
  app.add_flag("--no-adapt", rc.no_adapt, "keep the initial uniform grid");
  app.add_option("--out", rc.out, "output directory");
  app.add_option("--tstop", rc.tstop, "transient end time");
  app.add_option("--tstep", rc.tstep, "transient step");
  app.add_option("--nodes", rc.nodes, "variables to export")->delimiter(',');
  app.add_option("--samples", rc.samples, "samples per period")->check(CLI::Range(1, 1000000));
  app.add_option("--seed", rc.seed, "random seed (recorded, solvers are deterministic)");
  app.set_config("--config", "", "key = value file; flags override it");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "mrwave: " << e.what() << '\n' << "usage: mrwave <tran|pss|envelope> <netlist> [options]\n";
    return 2;
  }

  try {
    return run_analysis(rc, out);
  } catch (const ConvergenceError& e) {
    const NewtonReport& r = e.report();
    err << "mrwave: solver failure: " << e.what() << "\n  iterations " << r.iterations;
    if (!r.residual_norms.empty()) err << ", last step norm " << r.residual_norms.back();
    err << '\n';
    return 1;
  } catch (const ParseError& e) {
    err << "mrwave: " << rc.netlist << ": " << e.what() << '\n';
    return 2;
  } catch (const CLI::ValidationError& e) {
    err << "mrwave: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "mrwave: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "mrwave: " << e.what() << '\n';
    return 2;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace mrwave
