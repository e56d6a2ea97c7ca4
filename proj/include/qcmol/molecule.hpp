#pragma once

// Annotated molecular graphs and their physical descriptors: hydrogen
// saturation, a 2D stress-minimizing layout, the Coulomb matrix and the
// Gershgorin disc radii of that matrix.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qcmol/error.hpp"
#include "qcmol/rng.hpp"

namespace qcmol {

enum class Element : std::uint8_t { H, C, N, O, P, S };

constexpr int atomic_number(Element e) noexcept {
  switch (e) {
    case Element::H: return 1;
    case Element::C: return 6;
    case Element::N: return 7;
    case Element::O: return 8;
    case Element::P: return 15;
    case Element::S: return 16;
  }
  return 0;
}

constexpr int valence(Element e) noexcept {
  switch (e) {
    case Element::H: return 1;
    case Element::C: return 4;
    case Element::N: return 3;
    case Element::O: return 2;
    case Element::P: return 3;
    case Element::S: return 2;
  }
  return 0;
}

constexpr const char* symbol(Element e) noexcept {
  switch (e) {
    case Element::H: return "H";
    case Element::C: return "C";
    case Element::N: return "N";
    case Element::O: return "O";
    case Element::P: return "P";
    case Element::S: return "S";
  }
  return "?";
}

inline Element parse_element(const std::string& s) {
  for (Element e : {Element::H, Element::C, Element::N, Element::O, Element::P, Element::S}) {
    if (s == symbol(e)) return e;
  }
  throw FormatError("unknown element '" + s + "'");
}

enum class AtomRole : std::uint8_t { Backbone, Branch, Hydrogen };

struct Atom {
  Element element = Element::C;
  AtomRole role = AtomRole::Backbone;
  int qubit = -1;     // branch atoms only
  int position = -1;  // chain index for branch atoms, path index for backbone atoms

  bool operator==(const Atom&) const = default;
};

/// Molecular graph. `n_qubits` is zero for graphs without circuit annotations.
struct Molecule {
  int n_qubits = 0;
  std::vector<Atom> atoms;
  std::vector<std::pair<int, int>> bonds;  // i < j

  int size() const noexcept { return static_cast<int>(atoms.size()); }

  int add_atom(Atom a) {
    atoms.push_back(a);
    return size() - 1;
  }

  void add_bond(int i, int j) {
    if (i == j || i < 0 || j < 0 || i >= size() || j >= size()) throw InvalidArgument("invalid bond");
    bonds.emplace_back(std::min(i, j), std::max(i, j));
  }

  std::vector<int> degrees() const {
    std::vector<int> deg(atoms.size(), 0);
    for (auto [i, j] : bonds) {
      ++deg[i];
      ++deg[j];
    }
    return deg;
  }

  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(atoms.size());
    for (auto [i, j] : bonds) {
      adj[i].push_back(j);
      adj[j].push_back(i);
    }
    return adj;
  }

  bool operator==(const Molecule&) const = default;
};

/// BFS hop counts between all atom pairs; -1 marks unreachable pairs.
inline std::vector<std::vector<int>> graph_distances(const Molecule& mol) {
  const auto adj = mol.adjacency();
  const int n = mol.size();
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, -1));
  for (int s = 0; s < n; ++s) {
    std::queue<int> frontier;
    dist[s][s] = 0;
    frontier.push(s);
    while (!frontier.empty()) {
      const int u = frontier.front();
      frontier.pop();
      for (int v : adj[u]) {
        if (dist[s][v] < 0) {
          dist[s][v] = dist[s][u] + 1;
          frontier.push(v);
        }
      }
    }
  }
  return dist;
}

inline bool is_connected(const Molecule& mol) {
  if (mol.size() == 0) return true;
  const auto d = graph_distances(mol);
  return std::all_of(d[0].begin(), d[0].end(), [](int x) { return x >= 0; });
}

/// Lists violated structural invariants. With `require_saturated` every atom
/// must carry exactly its valence; otherwise degree must not exceed it.
inline std::vector<std::string> validate_molecule(const Molecule& mol, bool require_saturated = true) {
  std::vector<std::string> out;
  const int n = mol.size();
  std::vector<std::pair<int, int>> seen;
  for (auto [i, j] : mol.bonds) {
    if (i < 0 || j >= n || i >= j) {
      out.push_back("malformed bond " + std::to_string(i) + "-" + std::to_string(j));
      return out;
    }
    seen.emplace_back(i, j);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) out.push_back("duplicate bond");

  const auto deg = mol.degrees();
  for (int i = 0; i < n; ++i) {
    const int v = valence(mol.atoms[i].element);
    if (deg[i] > v || (require_saturated && deg[i] != v)) {
      out.push_back("atom " + std::to_string(i) + " (" + symbol(mol.atoms[i].element) + ") has degree " +
                    std::to_string(deg[i]) + ", valence " + std::to_string(v));
    }
  }
  if (!is_connected(mol)) out.push_back("graph is disconnected");

  // Backbone: carbon-only simple path ordered by position.
  std::vector<int> backbone;
  for (int i = 0; i < n; ++i) {
    if (mol.atoms[i].role != AtomRole::Backbone) continue;
    if (mol.atoms[i].element != Element::C) out.push_back("backbone atom " + std::to_string(i) + " is not carbon");
    backbone.push_back(i);
  }
  std::sort(backbone.begin(), backbone.end(),
            [&](int a, int b) { return mol.atoms[a].position < mol.atoms[b].position; });
  const auto adj = mol.adjacency();
  for (std::size_t k = 0; k < backbone.size(); ++k) {
    int backbone_neighbours = 0;
    for (int v : adj[backbone[k]]) backbone_neighbours += mol.atoms[v].role == AtomRole::Backbone ? 1 : 0;
    const int expected = backbone.size() == 1 ? 0 : (k == 0 || k + 1 == backbone.size() ? 1 : 2);
    if (backbone_neighbours != expected) out.push_back("backbone is not a simple path at atom " + std::to_string(backbone[k]));
    if (k + 1 < backbone.size()) {
      const auto& nb = adj[backbone[k]];
      if (std::find(nb.begin(), nb.end(), backbone[k + 1]) == nb.end())
        out.push_back("backbone atoms " + std::to_string(backbone[k]) + " and " + std::to_string(backbone[k + 1]) +
                      " are not bonded");
    }
  }
  return out;
}

/// Attaches hydrogens until every atom's degree equals its valence. New
/// hydrogens are appended in order of their parent atom.
inline Molecule saturate_hydrogens(const Molecule& mol) {
  Molecule out = mol;
  const auto deg = mol.degrees();
  const int n = mol.size();
  for (int i = 0; i < n; ++i) {
    const int free = valence(mol.atoms[i].element) - deg[i];
    if (free < 0)
      throw InvalidArgument("atom " + std::to_string(i) + " (" + symbol(mol.atoms[i].element) +
                            ") exceeds its valence");
    for (int k = 0; k < free; ++k) {
      const int h = out.add_atom({Element::H, AtomRole::Hydrogen, -1, -1});
      out.add_bond(i, h);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: one molecule per line,
//   <n_qubits> <n_atoms> <n_bonds> SYM:ROLE:qubit:pos ... i-j ...
// ROLE is B (backbone), R (branch) or H (hydrogen).

inline std::string to_line(const Molecule& mol) {
  std::string s = std::to_string(mol.n_qubits) + " " + std::to_string(mol.atoms.size()) + " " +
                  std::to_string(mol.bonds.size());
  for (const Atom& a : mol.atoms) {
    const char role = a.role == AtomRole::Backbone ? 'B' : a.role == AtomRole::Branch ? 'R' : 'H';
    s += ' ';
    s += symbol(a.element);
    s += ':';
    s += role;
    s += ':' + std::to_string(a.qubit) + ':' + std::to_string(a.position);
  }
  for (auto [i, j] : mol.bonds) s += ' ' + std::to_string(i) + '-' + std::to_string(j);
  return s;
}

inline Molecule parse_molecule_line(const std::string& line) {
  std::istringstream in(line);
  Molecule mol;
  long n_atoms = 0;
  long n_bonds = 0;
  if (!(in >> mol.n_qubits >> n_atoms >> n_bonds) || n_atoms < 0 || n_bonds < 0)
    throw FormatError("molecule record must start with n_qubits n_atoms n_bonds");
  for (long k = 0; k < n_atoms; ++k) {
    std::string tok;
    if (!(in >> tok)) throw FormatError("molecule record has too few atoms");
    std::array<std::string, 4> parts;
    std::size_t p = 0;
    for (char c : tok) {
      if (c == ':') {
        if (++p >= parts.size()) throw FormatError("bad atom token '" + tok + "'");
      } else {
        parts[p] += c;
      }
    }
    if (p != 3 || parts[1].size() != 1) throw FormatError("bad atom token '" + tok + "'");
    Atom a;
    a.element = parse_element(parts[0]);
    switch (parts[1][0]) {
      case 'B': a.role = AtomRole::Backbone; break;
      case 'R': a.role = AtomRole::Branch; break;
      case 'H': a.role = AtomRole::Hydrogen; break;
      default: throw FormatError("bad atom role in '" + tok + "'");
    }
    try {
      a.qubit = std::stoi(parts[2]);
      a.position = std::stoi(parts[3]);
    } catch (const std::exception&) {
      throw FormatError("bad atom annotation in '" + tok + "'");
    }
    mol.atoms.push_back(a);
  }
  for (long k = 0; k < n_bonds; ++k) {
    std::string tok;
    if (!(in >> tok)) throw FormatError("molecule record has too few bonds");
    const auto dash = tok.find('-');
    if (dash == std::string::npos) throw FormatError("bad bond token '" + tok + "'");
    try {
      mol.add_bond(std::stoi(tok.substr(0, dash)), std::stoi(tok.substr(dash + 1)));
    } catch (const InvalidArgument&) {
      throw FormatError("bond out of range '" + tok + "'");
    } catch (const std::exception&) {
      throw FormatError("bad bond token '" + tok + "'");
    }
  }
  std::string extra;
  if (in >> extra) throw FormatError("molecule record has trailing tokens");
  return mol;
}

// ---------------------------------------------------------------------------
// 2D layout

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

using Coordinates2D = std::vector<Point2>;

/// Smallest separation the layout and Coulomb matrix tolerate, in layout units.
inline constexpr double kMinSeparation = 1e-3;

struct LayoutSettings {
  double bond_length = 1.0;
  int max_iterations = 2000;
  double gradient_tolerance = 1e-4;
  double jitter = 0.05;  // initial perturbation amplitude, in bond lengths
};

struct LayoutResult {
  Coordinates2D coords;
  double initial_stress = 0.0;
  double final_stress = 0.0;
  double gradient_norm = 0.0;  // max over atoms of the per-atom gradient norm
  int iterations = 0;
  bool converged = false;
};

namespace detail {

struct StressModel {
  int n = 0;
  std::vector<double> target;  // L0 * d_ij, row-major n x n
  std::vector<double> weight;  // 1 / d_ij^2

  double stress(const std::vector<double>& p) const {
    double e = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double dx = p[2 * i] - p[2 * j];
        const double dy = p[2 * i + 1] - p[2 * j + 1];
        const double r = std::sqrt(dx * dx + dy * dy) - target[i * n + j];
        e += 0.5 * weight[i * n + j] * r * r;
      }
    }
    return e;
  }

  void gradient(const std::vector<double>& p, std::vector<double>& g) const {
    std::fill(g.begin(), g.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double dx = p[2 * i] - p[2 * j];
        const double dy = p[2 * i + 1] - p[2 * j + 1];
        const double d = std::sqrt(dx * dx + dy * dy);
        if (d < 1e-300) continue;
        const double c = weight[i * n + j] * (d - target[i * n + j]) / d;
        g[2 * i] += c * dx;
        g[2 * i + 1] += c * dy;
        g[2 * j] -= c * dx;
        g[2 * j + 1] -= c * dy;
      }
    }
  }
};

inline double max_atom_norm(const std::vector<double>& g) {
  double m = 0.0;
  for (std::size_t i = 0; i + 1 < g.size(); i += 2) m = std::max(m, std::hypot(g[i], g[i + 1]));
  return m;
}

}  // namespace detail

/// Kamada-Kawai stress E = sum_{i<j} (|p_i - p_j| - L0 d_ij)^2 / (2 d_ij^2).
inline double layout_stress(const Molecule& mol, const Coordinates2D& coords, double bond_length = 1.0) {
  const auto dist = graph_distances(mol);
  double e = 0.0;
  for (int i = 0; i < mol.size(); ++i) {
    for (int j = i + 1; j < mol.size(); ++j) {
      if (dist[i][j] < 0) throw InvalidArgument("layout requires a connected molecule");
      const double d = dist[i][j];
      const double r = std::hypot(coords[i].x - coords[j].x, coords[i].y - coords[j].y) - bond_length * d;
      e += 0.5 * r * r / (d * d);
    }
  }
  return e;
}

/// Minimizes the Kamada-Kawai stress by gradient descent with Armijo
/// backtracking, starting from a jittered circle. Each accepted step lowers
/// the stress.
inline LayoutResult layout_2d(const Molecule& mol, const LayoutSettings& settings = {}, std::uint64_t seed = 0) {
  const int n = mol.size();
  LayoutResult res;
  if (n == 0) return res;
  const auto dist = graph_distances(mol);

  detail::StressModel model;
  model.n = n;
  model.target.assign(static_cast<std::size_t>(n) * n, 0.0);
  model.weight.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (dist[i][j] < 0) throw InvalidArgument("layout requires a connected molecule");
      if (i == j) continue;
      const double d = dist[i][j];
      model.target[i * n + j] = settings.bond_length * d;
      model.weight[i * n + j] = 1.0 / (d * d);
    }
  }

  std::vector<double> p(2 * static_cast<std::size_t>(n));
  Rng rng(seed);
  const double radius = n == 1 ? 0.0 : std::max(1.0, n / (2.0 * std::numbers::pi)) * settings.bond_length;
  for (int i = 0; i < n; ++i) {
    const double phi = 2.0 * std::numbers::pi * i / n;
    p[2 * i] = radius * std::cos(phi) + settings.jitter * settings.bond_length * rng.uniform(-1.0, 1.0);
    p[2 * i + 1] = radius * std::sin(phi) + settings.jitter * settings.bond_length * rng.uniform(-1.0, 1.0);
  }

  std::vector<double> g(p.size());
  std::vector<double> trial(p.size());
  double energy = model.stress(p);
  res.initial_stress = energy;
  model.gradient(p, g);
  double step = 0.1;
  int it = 0;
  for (; it < settings.max_iterations; ++it) {
    res.gradient_norm = detail::max_atom_norm(g);
    if (res.gradient_norm < settings.gradient_tolerance) {
      res.converged = true;
      break;
    }
    double g2 = 0.0;
    for (double v : g) g2 += v * v;
    bool accepted = false;
    double trial_energy = energy;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t k = 0; k < p.size(); ++k) trial[k] = p[k] - step * g[k];
      trial_energy = model.stress(trial);
      if (trial_energy <= energy - 1e-4 * step * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent left at machine precision
    p.swap(trial);
    energy = trial_energy;
    model.gradient(p, g);
    step *= 2.0;
  }
  if (!res.converged) {
    res.gradient_norm = detail::max_atom_norm(g);
    res.converged = res.gradient_norm < settings.gradient_tolerance;
  }
  res.iterations = it;
  res.final_stress = energy;
  res.coords.resize(n);
  for (int i = 0; i < n; ++i) res.coords[i] = {p[2 * i], p[2 * i + 1]};
  return res;
}

// ---------------------------------------------------------------------------
// Coulomb matrix and Gershgorin radii

/// Symmetric matrix with 0.5 Z_i^2.4 on the diagonal and Z_i Z_j / r_ij off it.
struct CoulombMatrix {
  Eigen::MatrixXd values;
  int size() const noexcept { return static_cast<int>(values.rows()); }
};

/// `bond_scale` converts layout units to Angstrom.
inline CoulombMatrix coulomb_matrix(const Molecule& mol, const Coordinates2D& coords, double bond_scale = 1.5) {
  if (!(bond_scale > 0.0)) throw InvalidArgument("bond_scale must be positive");
  if (coords.size() != mol.atoms.size()) throw InvalidArgument("coordinates do not cover every atom");
  const int n = mol.size();
  CoulombMatrix m{Eigen::MatrixXd::Zero(n, n)};
  for (int i = 0; i < n; ++i) {
    const double zi = atomic_number(mol.atoms[i].element);
    m.values(i, i) = 0.5 * std::pow(zi, 2.4);
    for (int j = i + 1; j < n; ++j) {
      const double r = std::hypot(coords[i].x - coords[j].x, coords[i].y - coords[j].y);
      if (!(r >= kMinSeparation))
        throw InvalidArgument("atoms " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
      const double v = zi * atomic_number(mol.atoms[j].element) / (bond_scale * r);
      m.values(i, j) = v;
      m.values(j, i) = v;
    }
  }
  return m;
}

struct GershgorinSummary {
  double r_min = 0.0;
  double r_max = 0.0;
};

/// Off-diagonal absolute row sums.
inline Eigen::VectorXd gershgorin_row_radii(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.rows() != m.cols()) throw InvalidArgument("Gershgorin radii need a nonempty square matrix");
  Eigen::VectorXd r(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j != i) s += std::abs(m(i, j));
    }
    r(i) = s;
  }
  return r;
}

inline GershgorinSummary gershgorin_radii(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd r = gershgorin_row_radii(m);
  return {r.minCoeff(), r.maxCoeff()};
}

inline GershgorinSummary gershgorin_radii(const CoulombMatrix& m) { return gershgorin_radii(m.values); }

}  // namespace qcmol
