#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mrwave/cli.hpp"
#include "mrwave/export.hpp"
#include "support.hpp"

using namespace mrwave;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mrwave_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string netlist(const std::string& name) { return std::string(MRWAVE_NETLIST_DIR) + "/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("tran writes a headed CSV") {
  const fs::path dir = scratch("tran");
  const Outcome r = invoke({"tran", netlist("rc.cir"), "--tstop", "1e-5", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto rows = lines(dir / "tran.csv");
  REQUIRE(rows.size() > 1000);
  CHECK(rows[0] == "t,v(in),v(out),i(V1)");

  const Outcome sel = invoke({"tran", netlist("rc.cir"), "--tstop", "1e-6", "--nodes", "out",
                              "--out", dir.string()});
  REQUIRE(sel.code == 0);
  CHECK(lines(dir / "tran.csv")[0] == "t,v(out)");
}

TEST_CASE("envelope writes surface, grid, frequency and plot files") {
  const fs::path dir = scratch("envelope");
  const Outcome r = invoke({"envelope", netlist("mixer.cir"), "--tau-stop", "2e-4", "--out", dir.string()});
  REQUIRE(r.code == 0);
  for (const char* f : {"envelope_surface.csv", "grid.csv", "omega.csv", "envelope.gp"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK(lines(dir / "envelope_surface.csv")[0] == "tau,t,node,value");
  CHECK(lines(dir / "grid.csv")[0] == "tau,t_knot");
  const auto omega = lines(dir / "omega.csv");
  CHECK(omega[0] == "tau,omega,f_inst");
  CHECK(omega[1].rfind("0,1,", 0) == 0);
  CHECK(std::stod(omega[1].substr(4)) == doctest::Approx(1e5).epsilon(1e-14));
  CHECK(r.out.find("steps accepted") != std::string::npos);
}

TEST_CASE("usage and input errors exit with 2") {
  const Outcome missing = invoke({"tran", "/nonexistent/dir/none.cir", "--tstop", "1e-6"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("/nonexistent/dir/none.cir") != std::string::npos);

  CHECK(invoke({"tran", netlist("rc.cir"), "--bogus"}).code == 2);
  CHECK(invoke({"simulate", netlist("rc.cir")}).code == 2);
  CHECK(invoke({"envelope", netlist("rc.cir"), "--bdf-order", "3"}).code == 2);
  CHECK(invoke({"envelope", netlist("rc.cir"), "--spline-order", "5"}).code == 2);
  CHECK(invoke({"envelope", netlist("rc.cir")}).code == 2);
  CHECK(invoke({"tran", netlist("rc.cir"), "--tstop", "1e-6", "--nodes", "nowhere"}).code == 2);

  const fs::path dir = scratch("badnet");
  std::ofstream(dir / "bad.cir") << "R1 a 0 1k\nQ1 a b c\n";
  const Outcome bad = invoke({"tran", (dir / "bad.cir").string(), "--tstop", "1e-6"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("line 2") != std::string::npos);
}

TEST_CASE("solver failures exit with 1") {
  const fs::path dir = scratch("fail");
  const Outcome r = invoke({"envelope", netlist("fm_rc.cir"), "--tau-stop", "0.1", "--free-omega",
                            "--step-tol", "1e-15", "--out", dir.string()});
  CHECK(r.code == 1);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("repeated runs are byte-identical") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  for (const fs::path& d : {a, b}) {
    REQUIRE(invoke({"envelope", netlist("pulse_rc.cir"), "--tau-stop", "1e-4", "--out", d.string()}).code == 0);
  }
  for (const char* f : {"envelope_surface.csv", "grid.csv", "omega.csv"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
}

TEST_CASE("surface export row counts") {
  const Circuit c = testing::load("rc.cir");
  const KnotGrid g = KnotGrid::uniform(16, c.split.period, 4);
  const EnvelopeSample s{0.0, 1.0, 0.0, SplineCurve::constant(g, Eigen::Vector3d(1, 2, 3)), 0.0, 0};
  std::ostringstream os;
  export_surface(os, c, {s}, {"v(out)"}, 64);
  std::istringstream in(os.str());
  int count = 0;
  for (std::string l; std::getline(in, l);) ++count;
  CHECK(count == 65);
  std::ostringstream bad;
  CHECK_THROWS_AS(export_surface(bad, c, {s}, {"v(nowhere)"}), Error);

  std::ostringstream empty;
  export_grid(empty, {});
  CHECK(empty.str() == "tau,t_knot\n");
}

TEST_CASE("numbers round-trip through the CSV format") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 1e-9 + 1e-25}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("fixed grids and constant envelopes") {
  const fs::path dir = scratch("noadapt");
  REQUIRE(invoke({"envelope", netlist("rc.cir"), "--tau-stop", "1e-5", "--no-adapt", "--intervals", "16",
                  "--out", dir.string()}).code == 0);
  std::map<std::string, std::vector<std::string>> knots;
  const auto rows = lines(dir / "grid.csv");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto comma = rows[i].find(',');
    knots[rows[i].substr(0, comma)].push_back(rows[i].substr(comma + 1));
  }
  REQUIRE(knots.size() >= 2);
  for (const auto& [tau, col] : knots) {
    CHECK(col.size() == 16);
    CHECK(col == knots.begin()->second);
  }

  // The RC source does not depend on tau: every slice repeats the first.
  std::map<std::string, std::vector<double>> slices;
  const auto surf = lines(dir / "envelope_surface.csv");
  for (std::size_t i = 1; i < surf.size(); ++i) {
    const auto comma = surf[i].find(',');
    slices[surf[i].substr(0, comma)].push_back(std::stod(surf[i].substr(surf[i].rfind(',') + 1)));
  }
  const std::vector<double>& first = slices.begin()->second;
  for (const auto& [tau, vals] : slices) {
    REQUIRE(vals.size() == first.size());
    for (std::size_t i = 0; i < vals.size(); ++i) CHECK(std::abs(vals[i] - first[i]) <= 1e-8);
  }
}

TEST_CASE("config file values are overridden by flags") {
  const fs::path dir = scratch("config");
  std::ofstream(dir / "run.ini") << "tau-stop = 1e-5\nno-adapt = true\nintervals = 8\n";
  REQUIRE(invoke({"envelope", netlist("rc.cir"), "--config", (dir / "run.ini").string(), "--out",
                  dir.string()}).code == 0);
  auto rows = lines(dir / "grid.csv");
  std::set<std::string> taus;
  for (std::size_t i = 1; i < rows.size(); ++i) taus.insert(rows[i].substr(0, rows[i].find(',')));
  CHECK((rows.size() - 1) == 8 * taus.size());
  CHECK(rows.back().substr(0, rows.back().find(',')) == "1.0000000000000001e-05");

  REQUIRE(invoke({"envelope", netlist("rc.cir"), "--config", (dir / "run.ini").string(), "--intervals",
                  "12", "--out", dir.string()}).code == 0);
  rows = lines(dir / "grid.csv");
  taus.clear();
  for (std::size_t i = 1; i < rows.size(); ++i) taus.insert(rows[i].substr(0, rows[i].find(',')));
  CHECK((rows.size() - 1) == 12 * taus.size());
}
