#pragma once

// Gate grids: one row per qubit, one column per layer. Slots hold an
// identity, a parametrized RZ, or one end of a CNOT. A control at row i with
// offset d always targets row (i + d) mod n_qubits in the same layer.

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qcmol/error.hpp"
#include "qcmol/rng.hpp"

namespace qcmol {

enum class SlotKind : std::uint8_t { Identity, Rz, CnotControl, CnotTarget };

struct GateSlot {
  SlotKind kind = SlotKind::Identity;
  int delta = 0;  // nonzero only for CnotControl

  static constexpr GateSlot identity() { return {SlotKind::Identity, 0}; }
  static constexpr GateSlot rz() { return {SlotKind::Rz, 0}; }
  static constexpr GateSlot control(int delta) { return {SlotKind::CnotControl, delta}; }
  static constexpr GateSlot target() { return {SlotKind::CnotTarget, 0}; }

  bool operator==(const GateSlot&) const = default;
};

inline std::string slot_code(GateSlot s) {
  switch (s.kind) {
    case SlotKind::Identity:
      return "I";
    case SlotKind::Rz:
      return "RZ";
    case SlotKind::CnotControl:
      return "C" + std::to_string(s.delta);
    case SlotKind::CnotTarget:
      return "T";
  }
  return "?";
}

inline GateSlot parse_slot_code(std::string_view code) {
  if (code == "I") return GateSlot::identity();
  if (code == "RZ") return GateSlot::rz();
  if (code == "T") return GateSlot::target();
  if (code.size() >= 2 && code[0] == 'C') {
    int delta = 0;
    for (char c : code.substr(1)) {
      if (c < '0' || c > '9') throw FormatError("bad slot code '" + std::string(code) + "'");
      delta = delta * 10 + (c - '0');
      if (delta > 1'000'000) throw FormatError("slot offset too large in '" + std::string(code) + "'");
    }
    if (delta < 1) throw FormatError("slot offset must be positive in '" + std::string(code) + "'");
    return GateSlot::control(delta);
  }
  throw FormatError("bad slot code '" + std::string(code) + "'");
}

/// n_qubits x n_layers gate matrix, stored layer-major.
class CircuitGrid {
 public:
  CircuitGrid() = default;
  CircuitGrid(int n_qubits, int n_layers) : n_qubits_(n_qubits), n_layers_(n_layers) {
    if (n_qubits < 2) throw InvalidArgument("circuit needs at least 2 qubits");
    if (n_layers < 0) throw InvalidArgument("negative layer count");
    slots_.assign(static_cast<std::size_t>(n_qubits) * static_cast<std::size_t>(n_layers), GateSlot::identity());
  }

  int n_qubits() const noexcept { return n_qubits_; }
  int n_layers() const noexcept { return n_layers_; }

  GateSlot at(int qubit, int layer) const { return slots_[index(qubit, layer)]; }
  GateSlot& at(int qubit, int layer) { return slots_[index(qubit, layer)]; }

  /// Target row of a control placed at `qubit` with the given offset.
  int target_row(int qubit, int delta) const noexcept { return (qubit + delta) % n_qubits_; }

  /// Places a CNOT; both slots are overwritten.
  void set_cnot(int control, int layer, int delta) {
    at(control, layer) = GateSlot::control(delta);
    at(target_row(control, delta), layer) = GateSlot::target();
  }

  void append_layers(const CircuitGrid& suffix) {
    if (suffix.n_qubits_ != n_qubits_) throw InvalidArgument("qubit count mismatch when appending layers");
    slots_.insert(slots_.end(), suffix.slots_.begin(), suffix.slots_.end());
    n_layers_ += suffix.n_layers_;
  }

  const std::vector<GateSlot>& slots() const noexcept { return slots_; }

  bool operator==(const CircuitGrid&) const = default;

 private:
  std::size_t index(int qubit, int layer) const {
    if (qubit < 0 || qubit >= n_qubits_ || layer < 0 || layer >= n_layers_)
      throw InvalidArgument("slot (" + std::to_string(qubit) + ", " + std::to_string(layer) + ") out of range");
    return static_cast<std::size_t>(layer) * static_cast<std::size_t>(n_qubits_) + static_cast<std::size_t>(qubit);
  }

  int n_qubits_ = 2;
  int n_layers_ = 0;
  std::vector<GateSlot> slots_;
};

/// Per-slot categorical sampling distribution for random circuits.
struct GatePolicy {
  double p_identity = 0.2;
  double p_rz = 0.5;
  double p_cnot = 0.3;
  int delta_max = 0;  // 0 selects n_qubits - 1

  static GatePolicy rz_only() { return {0.0, 1.0, 0.0, 0}; }

  int resolved_delta_max(int n_qubits) const { return delta_max == 0 ? n_qubits - 1 : delta_max; }

  void validate(int n_qubits) const {
    for (double p : {p_identity, p_rz, p_cnot}) {
      if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("gate probabilities must lie in [0, 1]");
    }
    if (std::abs(p_identity + p_rz + p_cnot - 1.0) > 1e-12) throw InvalidArgument("gate probabilities must sum to 1");
    const int dmax = resolved_delta_max(n_qubits);
    if (dmax < 1 || dmax > n_qubits - 1)
      throw InvalidArgument("delta_max must lie in [1, n_qubits - 1], got " + std::to_string(dmax));
  }
};

/// Scans each layer top to bottom; a CNOT whose target is already taken
/// falls back to RZ.
inline CircuitGrid sample_circuit(int n_qubits, int n_layers, const GatePolicy& policy, std::uint64_t seed) {
  if (n_qubits < 2) throw InvalidArgument("circuit needs at least 2 qubits");
  if (n_layers < 0) throw InvalidArgument("negative layer count");
  policy.validate(n_qubits);
  const int dmax = policy.resolved_delta_max(n_qubits);

  CircuitGrid grid(n_qubits, n_layers);
  Rng rng(seed);
  std::vector<bool> taken(static_cast<std::size_t>(n_qubits));
  for (int l = 0; l < n_layers; ++l) {
    std::fill(taken.begin(), taken.end(), false);
    for (int q = 0; q < n_qubits; ++q) {
      if (taken[q]) continue;
      taken[q] = true;
      const double u = rng.uniform();
      if (u < policy.p_identity) {
        grid.at(q, l) = GateSlot::identity();
      } else if (u < policy.p_identity + policy.p_rz) {
        grid.at(q, l) = GateSlot::rz();
      } else {
        const int delta = rng.between(1, dmax);
        const int t = grid.target_row(q, delta);
        if (taken[t]) {
          grid.at(q, l) = GateSlot::rz();
        } else {
          grid.set_cnot(q, l, delta);
          taken[t] = true;
        }
      }
    }
  }
  return grid;
}

/// Appends freshly sampled layers; the existing layers are copied untouched.
inline CircuitGrid extend_circuit(const CircuitGrid& grid, int extra_layers, const GatePolicy& policy,
                                  std::uint64_t seed) {
  if (extra_layers < 0) throw InvalidArgument("negative extra layer count");
  CircuitGrid out = grid;
  if (extra_layers > 0) out.append_layers(sample_circuit(grid.n_qubits(), extra_layers, policy, seed));
  return out;
}

/// Human-readable description of every broken grid invariant.
inline std::vector<std::string> validate_grid(const CircuitGrid& grid) {
  std::vector<std::string> out;
  const int n = grid.n_qubits();
  auto where = [](int q, int l) { return "(row " + std::to_string(q) + ", layer " + std::to_string(l) + ")"; };
  std::vector<int> hits(static_cast<std::size_t>(n));
  for (int l = 0; l < grid.n_layers(); ++l) {
    std::fill(hits.begin(), hits.end(), 0);
    for (int q = 0; q < n; ++q) {
      const GateSlot s = grid.at(q, l);
      if (s.kind != SlotKind::CnotControl) {
        if (s.delta != 0) out.push_back("offset set on non-control slot at " + where(q, l));
        continue;
      }
      if (s.delta < 1 || s.delta > n - 1) {
        out.push_back("control offset " + std::to_string(s.delta) + " out of range at " + where(q, l));
        continue;
      }
      const int t = grid.target_row(q, s.delta);
      if (grid.at(t, l).kind != SlotKind::CnotTarget) {
        out.push_back("control at " + where(q, l) + " has no target at " + where(t, l));
      } else {
        ++hits[t];
      }
    }
    for (int q = 0; q < n; ++q) {
      if (grid.at(q, l).kind != SlotKind::CnotTarget) continue;
      if (hits[q] == 0) out.push_back("target at " + where(q, l) + " has no control");
      if (hits[q] > 1) out.push_back("target at " + where(q, l) + " shared by " + std::to_string(hits[q]) + " controls");
    }
  }
  return out;
}

inline int count_kind(const CircuitGrid& grid, SlotKind kind) {
  int c = 0;
  for (const GateSlot& s : grid.slots()) c += s.kind == kind ? 1 : 0;
  return c;
}

/// Number of RZ slots, i.e. the dimension of the angle vector.
inline int count_rz(const CircuitGrid& grid) { return count_kind(grid, SlotKind::Rz); }

inline int count_cnot(const CircuitGrid& grid) { return count_kind(grid, SlotKind::CnotControl); }

/// Row `qubit` with identities and CNOT targets removed.
inline std::vector<GateSlot> row_gate_sequence(const CircuitGrid& grid, int qubit) {
  std::vector<GateSlot> seq;
  for (int l = 0; l < grid.n_layers(); ++l) {
    const GateSlot s = grid.at(qubit, l);
    if (s.kind == SlotKind::Rz || s.kind == SlotKind::CnotControl) seq.push_back(s);
  }
  return seq;
}

// Line format: "<n_qubits> <n_layers> <code>..." with codes layer-major.

inline std::string to_line(const CircuitGrid& grid) {
  std::string line = std::to_string(grid.n_qubits()) + " " + std::to_string(grid.n_layers());
  for (const GateSlot& s : grid.slots()) {
    line += ' ';
    line += slot_code(s);
  }
  return line;
}

inline CircuitGrid parse_line(std::string_view line) {
  std::istringstream in{std::string(line)};
  long n_qubits = 0;
  long n_layers = 0;
  if (!(in >> n_qubits >> n_layers)) throw FormatError("circuit record must start with n_qubits n_layers");
  if (n_qubits < 2 || n_qubits > 30 || n_layers < 0 || n_layers > 100'000)
    throw FormatError("circuit dimensions out of range");
  CircuitGrid grid(static_cast<int>(n_qubits), static_cast<int>(n_layers));
  for (int l = 0; l < n_layers; ++l) {
    for (int q = 0; q < n_qubits; ++q) {
      std::string code;
      if (!(in >> code)) throw FormatError("circuit record has too few slot codes");
      grid.at(q, l) = parse_slot_code(code);
    }
  }
  std::string extra;
  if (in >> extra) throw FormatError("circuit record has trailing tokens");
  return grid;
}

inline void write_circuits(std::ostream& out, const std::vector<CircuitGrid>& grids) {
  for (const CircuitGrid& g : grids) out << to_line(g) << '\n';
}

inline std::vector<CircuitGrid> read_circuits(std::istream& in) {
  std::vector<CircuitGrid> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    try {
      out.push_back(parse_line(line));
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace qcmol
