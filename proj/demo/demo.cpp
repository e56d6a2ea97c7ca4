// Walks one random circuit through both halves of the pipeline: the molecule
// side (mapping, layout, Coulomb matrix, Gershgorin radii) and the kernel side
// (angle search and SVM test accuracy on a small hidden-manifold problem).

#include <fmt/core.h>

#include "qcmol/qcmol.hpp"

using namespace qcmol;

int main() {
  const CircuitGrid grid = sample_circuit(4, 5, GatePolicy{}, 7);
  fmt::print("circuit   {}\n", to_line(grid));
  for (int q = 0; q < grid.n_qubits(); ++q) {
    std::string row;
    for (GateSlot s : row_gate_sequence(grid, q)) row += slot_code(s) + " ";
    fmt::print("  row {}   {}\n", q, row);
  }

  const Molecule mol = circuit_to_molecule(grid);
  fmt::print("molecule  {}\n", to_line(mol));
  const LayoutResult layout = layout_2d(mol, LayoutSettings{}, 1);
  const GershgorinSummary radii = gershgorin_radii(coulomb_matrix(mol, layout.coords));
  fmt::print("atoms {}  r_min {:.4f}  r_max {:.4f}\n", mol.size(), radii.r_min, radii.r_max);

  const CircuitGrid back = molecule_to_circuit(mol);
  fmt::print("inverse   {}\n", to_line(back));

  const Dataset all = gen_hidden_manifold(4, 200, 3);
  std::vector<int> train;
  std::vector<int> test;
  for (int i = 0; i < all.size(); ++i) (i < 100 ? train : test).push_back(i);
  const EvalProblem problem = make_problem(subset(all, train), subset(all, test));
  EvalSettings settings;
  settings.bo.budget = 10;
  const EvaluationRecord rec = evaluate_circuit(grid, problem, settings, 11);
  fmt::print("rz gates {}  validation {:.3f}  test {:.3f}\n", rec.n_rz, rec.validation_accuracy, rec.test_accuracy);
  return 0;
}
