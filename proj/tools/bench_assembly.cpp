// Times Galerkin residual + Jacobian assembly with and without OpenMP.

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "mrwave/circuit.hpp"
#include "mrwave/galerkin.hpp"
#include "mrwave/mpde.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace mrwave;

namespace {

const char* kNetlist =
    "VRF rf 0 SIN(0 0.5 99.9k fast)\n"
    "VLOP lop 0 PULSE(-5 5 100k 0.02)\n"
    "VLON lon 0 PULSE(5 -5 100k 0.02)\n"
    "RS rf in 100\n"
    "RP lop top 2k\n"
    "RN lon bot 2k\n"
    "D1 top in\nD2 top mid\nD3 in bot\nD4 mid bot\n"
    "RL mid 0 1k\nRF mid out 1k\nCF out 0 10n\n";

double time_assembly(const GalerkinSystem& sys, const Coeffs& c, int reps) {
  Coeffs F;
  CyclicBlockBandedMatrix A;
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) sys.assemble(c, 1.0, &F, &A, nullptr);
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
  const int knots = argc > 1 ? std::atoi(argv[1]) : 1024;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 20;
  const Circuit circuit = parse_netlist(kNetlist);
  EnvelopeForcing model(circuit, 0.0, {0.0}, {});
  const KnotGrid grid = KnotGrid::uniform(knots, circuit.split.period, 4);
  Coeffs c = Coeffs::Zero(grid.size(), circuit.n);
  for (int j = 0; j < grid.size(); ++j) {
    for (int i = 0; i < circuit.n; ++i) c(j, i) = 0.1 * std::sin(0.37 * j + i);
  }
  GalerkinOptions serial;
  serial.parallel = false;
  GalerkinOptions parallel;
  parallel.parallel = true;
  const GalerkinSystem s_sys(grid, model, serial);
  const GalerkinSystem p_sys(grid, model, parallel);
  const double ts = time_assembly(s_sys, c, reps);
  const double tp = time_assembly(p_sys, c, reps);
  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::printf("knots=%d n=%d threads=%d\n", knots, circuit.n, threads);
  std::printf("serial   %.3f ms\nparallel %.3f ms\nspeedup  %.2fx\n", 1e3 * ts, 1e3 * tp, ts / tp);
  return 0;
}
