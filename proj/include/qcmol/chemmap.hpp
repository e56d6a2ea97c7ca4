#pragma once

// Circuit <-> molecule mapping over the RZ/CNOT alphabet.
//
// Each qubit owns a branch hanging off a carbon backbone. Reading a row left
// to right, RZ becomes C and a CNOT control with offset 1..4 becomes N, O, S
// or P. Identities and CNOT targets contribute no atom, so the inverse map
// recovers gate order per row but not layer positions; it re-packs gates
// greedily.

#include <algorithm>
#include <string>
#include <vector>

#include "qcmol/circuit.hpp"
#include "qcmol/error.hpp"
#include "qcmol/molecule.hpp"

namespace qcmol {

inline constexpr int kMaxMappableDelta = 4;

/// Carbons in the backbone chain for an n-qubit circuit. Odd qubit counts use
/// the backbone of n + 1 with the spare branch left to hydrogen.
inline int backbone_carbon_count(int n_qubits) {
  if (n_qubits < 2) throw InvalidArgument("backbone needs at least 2 qubits");
  return std::max(1, (n_qubits + 1) / 2 - 1);
}

/// Backbone carbon that anchors each branch slot: end carbons take three
/// branches, interior carbons two, a lone carbon four.
inline std::vector<int> backbone_slots(int n_carbons) {
  if (n_carbons == 1) return {0, 0, 0, 0};
  std::vector<int> slots;
  for (int c = 0; c < n_carbons; ++c) {
    const int k = (c == 0 || c == n_carbons - 1) ? 3 : 2;
    slots.insert(slots.end(), k, c);
  }
  return slots;
}

inline Element element_for_gate(GateSlot s) {
  if (s.kind == SlotKind::Rz) return Element::C;
  if (s.kind != SlotKind::CnotControl) throw InvalidArgument("only RZ and CNOT controls map to atoms");
  switch (s.delta) {
    case 1: return Element::N;
    case 2: return Element::O;
    case 3: return Element::S;
    case 4: return Element::P;
    default:
      throw UnmappableOffset("CNOT offset " + std::to_string(s.delta) + " has no atom (maximum " +
                             std::to_string(kMaxMappableDelta) + ")");
  }
}

inline GateSlot gate_for_element(Element e) {
  switch (e) {
    case Element::C: return GateSlot::rz();
    case Element::N: return GateSlot::control(1);
    case Element::O: return GateSlot::control(2);
    case Element::S: return GateSlot::control(3);
    case Element::P: return GateSlot::control(4);
    case Element::H: break;
  }
  throw InvalidArgument("hydrogen cannot appear in a branch chain");
}

/// Hydrogen-saturated molecule with atoms ordered backbone, branches by
/// qubit (chain order), then hydrogens.
inline Molecule circuit_to_molecule(const CircuitGrid& grid) {
  if (const auto v = validate_grid(grid); !v.empty()) throw InvalidArgument("invalid circuit: " + v.front());
  const int n = grid.n_qubits();
  const int n_carbons = backbone_carbon_count(n);
  const auto slots = backbone_slots(n_carbons);

  Molecule mol;
  mol.n_qubits = n;
  for (int c = 0; c < n_carbons; ++c) {
    mol.add_atom({Element::C, AtomRole::Backbone, -1, c});
    if (c > 0) mol.add_bond(c - 1, c);
  }
  for (int q = 0; q < n; ++q) {
    int prev = slots[q];
    int pos = 0;
    for (const GateSlot& s : row_gate_sequence(grid, q)) {
      const int a = mol.add_atom({element_for_gate(s), AtomRole::Branch, q, pos++});
      mol.add_bond(prev, a);
      prev = a;
    }
  }
  return saturate_hydrogens(mol);
}

/// Rebuilds a circuit from branch annotations. Gates are visited by chain
/// position, then qubit, and each lands in the earliest layer after its row
/// predecessor where its slot (and the CNOT target slot) is free.
inline CircuitGrid molecule_to_circuit(const Molecule& mol) {
  const int n = mol.n_qubits;
  if (n < 2) throw InvalidArgument("molecule carries no qubit annotation");

  std::vector<std::vector<GateSlot>> rows(n);
  std::vector<std::vector<int>> positions(n);
  for (const Atom& a : mol.atoms) {
    if (a.role != AtomRole::Branch) continue;
    if (a.qubit < 0 || a.qubit >= n) throw InvalidArgument("branch atom annotated with qubit " + std::to_string(a.qubit));
    positions[a.qubit].push_back(a.position);
    rows[a.qubit].push_back(gate_for_element(a.element));
  }
  for (int q = 0; q < n; ++q) {
    std::vector<std::size_t> order(rows[q].size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return positions[q][a] < positions[q][b]; });
    std::vector<GateSlot> sorted;
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (positions[q][order[k]] != static_cast<int>(k))
        throw InvalidArgument("branch " + std::to_string(q) + " chain positions are not contiguous");
      const GateSlot s = rows[q][order[k]];
      if (s.kind == SlotKind::CnotControl && s.delta > n - 1)
        throw InvalidArgument("CNOT offset " + std::to_string(s.delta) + " exceeds qubit range");
      sorted.push_back(s);
    }
    rows[q] = std::move(sorted);
  }

  std::vector<std::vector<GateSlot>> layers;  // layers[l][q]
  auto slot_free = [&](int q, int l) {
    return l >= static_cast<int>(layers.size()) || layers[l][q].kind == SlotKind::Identity;
  };
  std::vector<int> next_layer(n, 0);
  std::size_t longest = 0;
  for (const auto& r : rows) longest = std::max(longest, r.size());
  for (std::size_t p = 0; p < longest; ++p) {
    for (int q = 0; q < n; ++q) {
      if (p >= rows[q].size()) continue;
      const GateSlot s = rows[q][p];
      const int t = s.kind == SlotKind::CnotControl ? (q + s.delta) % n : -1;
      int l = next_layer[q];
      while (!slot_free(q, l) || (t >= 0 && !slot_free(t, l))) ++l;
      while (static_cast<int>(layers.size()) <= l) layers.emplace_back(n, GateSlot::identity());
      layers[l][q] = s;
      if (t >= 0) layers[l][t] = GateSlot::target();
      next_layer[q] = l + 1;
    }
  }

  CircuitGrid grid(n, static_cast<int>(layers.size()));
  for (int l = 0; l < grid.n_layers(); ++l) {
    for (int q = 0; q < n; ++q) grid.at(q, l) = layers[l][q];
  }
  return grid;
}

}  // namespace qcmol
