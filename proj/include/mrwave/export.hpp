#pragma once

// CSV writers. Every file has a header row; numbers use 17 significant digits.

#include <ostream>
#include <string>
#include <vector>

#include "mrwave/circuit.hpp"
#include "mrwave/mpde.hpp"
#include "mrwave/transient.hpp"

namespace mrwave {

std::string format_double(double v);

/// Long format `tau,t,node,value` with `samples` fast-time points per period.
/// Throws Error for unknown node names.
void export_surface(std::ostream& os, const Circuit& circuit,
                    const std::vector<EnvelopeSample>& history,
                    const std::vector<std::string>& nodes, int samples = 64);

/// One `tau,t_knot` row per knot per stored sample.
void export_grid(std::ostream& os, const std::vector<EnvelopeSample>& history);

/// `tau,omega,f_inst` with f_inst = ω / P.
void export_omega(std::ostream& os, const std::vector<EnvelopeSample>& history, double period);

/// `t,<variables...>` for a transient result.
void export_transient(std::ostream& os, const Circuit& circuit, const TransientResult& tr,
                      const std::vector<int>& columns);

/// `t,<variables...>` for one period of a periodic solution.
void export_periodic(std::ostream& os, const Circuit& circuit, const SplineCurve& x,
                     const std::vector<int>& columns, int samples = 64);

/// Variable indices for node/variable names; every variable when `names` is empty.
std::vector<int> resolve_columns(const Circuit& circuit, const std::vector<std::string>& names);

}  // namespace mrwave
