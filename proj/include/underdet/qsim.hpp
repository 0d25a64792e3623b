#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "underdet/rng.hpp"

namespace underdet {

enum class GateKind { RX, RY, RZ, CNOT, H };

// Where a rotation gate takes its angle from: a trainable parameter, an
// input feature, or a fixed constant (radians).
struct AngleSource {
  enum class Kind { Trainable, Feature, Constant };
  Kind kind = Kind::Constant;
  int index = 0;
  double value = 0.0;

  static AngleSource trainable(int i) { return {Kind::Trainable, i, 0.0}; }
  static AngleSource feature(int i) { return {Kind::Feature, i, 0.0}; }
  static AngleSource constant(double v) { return {Kind::Constant, 0, v}; }
};

struct GateOp {
  GateKind kind = GateKind::H;
  int target = 0;
  int control = -1;  // CNOT only
  AngleSource angle; // rotations only

  static GateOp rx(int target, AngleSource a) { return {GateKind::RX, target, -1, a}; }
  static GateOp ry(int target, AngleSource a) { return {GateKind::RY, target, -1, a}; }
  static GateOp rz(int target, AngleSource a) { return {GateKind::RZ, target, -1, a}; }
  static GateOp cnot(int control, int target) { return {GateKind::CNOT, target, control, {}}; }
  static GateOp h(int target) { return {GateKind::H, target, -1, {}}; }

  bool is_rotation() const {
    return kind == GateKind::RX || kind == GateKind::RY || kind == GateKind::RZ;
  }
};

// A circuit family y(x, theta): gate list applied to |+>^n. Trainable
// angles index into theta (M entries), feature angles into x (d entries).
struct CircuitTemplate {
  int n_qubits = 0;
  std::vector<GateOp> gates;
  int n_trainable = 0;
  int n_features = 0;
  std::string name;

  // throws std::invalid_argument when indices are out of range or a
  // trainable/feature slot is never used
  void validate() const;
};

// Qubit 0 is the least significant bit of the amplitude index.
struct Statevector {
  int n_qubits = 0;
  std::vector<std::complex<double>> amp;

  static Statevector zero_state(int n);
  static Statevector plus_state(int n);
  double norm_sq() const;
};

struct ShotConfig {
  long shots = 0;  // 0 = analytic (exact expectation)

  static ShotConfig analytic() { return {0}; }
  static ShotConfig finite(long b);
  bool is_analytic() const { return shots == 0; }
};

Statevector apply_gate(Statevector state, const GateOp& gate, double angle);

Statevector run_circuit(const CircuitTemplate& tpl, std::span<const double> theta,
                        std::span<const double> x);

// Same, with additive angle offsets on individual gates (by position in
// tpl.gates). This is what the parameter-shift rules are built on.
struct GateShift {
  int gate_index;
  double delta;
};
Statevector run_circuit_shifted(const CircuitTemplate& tpl, std::span<const double> theta,
                                std::span<const double> x, std::span<const GateShift> shifts);

// Caches the statevector before every gate of one (template, theta, x)
// evaluation so that families of shift-rule evaluations only redo the
// circuit from the first shifted gate onwards. Results are bit-identical
// to run_circuit_shifted. Keeps references into the template; use within
// one derivative computation.
class PrefixCircuit {
 public:
  PrefixCircuit(const CircuitTemplate& tpl, std::span<const double> theta,
                std::span<const double> x);

  int n_gates() const { return static_cast<int>(tpl_->gates.size()); }
  // state before gate k (k == n_gates gives the final state)
  const Statevector& prefix(int k) const { return prefix_[k]; }
  // applies gates [begin, end) to state, adding delta to gate shift_gate
  void evolve(Statevector& state, int begin, int end, int shift_gate, double delta) const;

 private:
  const CircuitTemplate* tpl_;
  std::vector<double> theta_, x_;
  std::vector<Statevector> prefix_;
};

double expectation_z(const Statevector& state, int qubit);

// Analytic config returns expectation_z exactly; finite shots draw
// n_plus ~ Binomial(B, p(Z=+1)) and return (2 n_plus - B) / B.
double sample_expectation_z(const Statevector& state, int qubit, ShotConfig cfg, Rng& rng);

// The model prediction: <Z> on qubit 0 after running the circuit.
double predict(const CircuitTemplate& tpl, std::span<const double> theta,
               std::span<const double> x);
double predict_sampled(const CircuitTemplate& tpl, std::span<const double> theta,
                       std::span<const double> x, ShotConfig cfg, Rng& rng);

// name in {iris, sine1d, fmnist}
CircuitTemplate build_template(const std::string& name);

}  // namespace underdet
