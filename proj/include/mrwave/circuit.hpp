#pragma once

// Modified nodal analysis: d/dt q(x) + g(x) + s(t) = 0.
//
// Unknowns are the non-ground node voltages in first-appearance order,
// followed by one branch current per inductor and voltage source (device
// order). Independent sources contribute only to s, devices only to q and g.

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mrwave {

enum class SourceKind { dc, sine, fm_sine, pulse_train, am_product };
enum class SourceRole { fast, slow };

/// Waveform of an independent source. Fields unused by a kind stay zero.
struct SourceSpec {
  SourceKind kind = SourceKind::dc;
  SourceRole role = SourceRole::slow;
  double offset = 0.0;     ///< DC value, sine/FM/AM offset, PULSE low level v1
  double amplitude = 0.0;  ///< sine/FM/AM amplitude, PULSE high level v2
  double frequency = 0.0;  ///< carrier or pulse frequency [Hz]
  double mod_frequency = 0.0;  ///< FM/AM baseband frequency [Hz]
  double deviation = 0.0;      ///< FM peak deviation [Hz]
  double depth = 0.0;          ///< AM modulation depth
  double rise = 0.02;          ///< PULSE rise and fall time as fraction of its period

  bool operator==(const SourceSpec&) const = default;

  /// Univariate waveform s(t).
  double value(double t) const;
};

enum class DeviceType { resistor, capacitor, inductor, vsource, isource, diode, mosfet };

struct Device {
  DeviceType type = DeviceType::resistor;
  std::string name;
  std::vector<int> nodes;  ///< -1 is ground; MOSFET order is drain, gate, source
  int branch = -1;         ///< unknown index of the branch current (L, V)
  double value = 0.0;      ///< R [ohm], C [F], L [H]
  double is = 1e-14;       ///< diode saturation current
  double vt = 0.02585;     ///< diode thermal voltage
  double k = 1e-3;         ///< MOSFET transconductance parameter [A/V^2]
  double vt0 = 1.0;        ///< MOSFET threshold
  double lambda = 0.0;     ///< MOSFET channel-length modulation
  int source = -1;         ///< index into Circuit::sources (V, I)

  bool operator==(const Device&) const = default;
};

/// Fast-time period P and reference frequency ω̃ of the multirate splitting.
struct MultirateSplit {
  double period = 1.0;
  double omega_ref = 1.0;
  bool operator==(const MultirateSplit&) const = default;
};

struct Circuit {
  int n = 0;
  int node_count = 0;
  std::vector<Device> devices;
  std::vector<std::string> node_names;  ///< index -> name, non-ground nodes only
  std::map<std::string, int> node_index;
  std::vector<SourceSpec> sources;
  MultirateSplit split;

  bool operator==(const Circuit&) const = default;

  /// "v(node)" for node voltages, "i(name)" for branch currents.
  std::string variable_name(int index) const;
  /// Index of "v(node)", "i(name)" or a bare node name; -1 if unknown.
  int find_variable(std::string_view name) const;

  /// Highest fast-source frequency, 0 if there is none.
  double carrier_frequency() const;
  /// P = 1 / carrier and ω̃ = P * carrier (or P = 1 without fast sources).
  MultirateSplit default_split() const;
  /// Set P and derive ω̃ = P * carrier.
  void set_period(double period);
};

Circuit parse_netlist(std::string_view text);
/// Canonical netlist text; parse_netlist(unparse(c)) == c.
std::string unparse(const Circuit& circuit);

/// Device contributions at x. Any output pointer may be null.
void eval_devices(const Circuit& circuit, const Eigen::VectorXd& x, Eigen::VectorXd* q,
                  Eigen::VectorXd* g, Eigen::MatrixXd* C, Eigen::MatrixXd* G);

/// Source vector for per-source values `v` (one per Circuit::sources entry).
void stamp_sources(const Circuit& circuit, const Eigen::VectorXd& v, Eigen::VectorXd& s);

struct Assembly {
  Eigen::VectorXd q, g, s;
  Eigen::MatrixXd C, G;
};

/// All MNA quantities at absolute time t. Throws NumericError on non-finite x.
Assembly assemble(const Circuit& circuit, const Eigen::VectorXd& x, double t);

/// s(t) of the univariate problem.
Eigen::VectorXd source_univariate(const Circuit& circuit, double t);

/// Bivariate source s̃(τ, t) and its derivative in the fast argument t.
std::pair<Eigen::VectorXd, Eigen::VectorXd> source_bivariate(const Circuit& circuit, double tau,
                                                             double t_fast);

/// ŝ(τ, t) = s̃(τ, t + σ).
Eigen::VectorXd source_shifted(const Circuit& circuit, double tau, double t_fast, double sigma);

/// Value and fast-time derivative of one source in multirate form.
std::pair<double, double> source_bivariate(const SourceSpec& src, const MultirateSplit& split,
                                           double tau, double t_fast);

}  // namespace mrwave
