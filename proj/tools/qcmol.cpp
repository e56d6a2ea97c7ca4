// qcmol: batch pipelines for circuit generation, molecular description,
// quantum-kernel evaluation, descriptor-guided search and density reports.
//
// Exit codes: 0 success, 1 configuration error, 2 partial batch failure.
// Every output file is accompanied by "<output>.manifest".

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "qcmol/qcmol.hpp"

namespace fs = std::filesystem;
using namespace qcmol;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPartial = 2;

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

double parse_double(const std::string& s, const std::string& what) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw FormatError("cannot parse " + what + " value '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::ofstream open_out(const std::string& path) {
  if (path.empty()) throw InvalidArgument("no output path given");
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return in;
}

// ---------------------------------------------------------------------------
// Manifest

class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  /// Records every long option of `sub` with its resolved value.
  void capture(const CLI::App& sub) {
    for (const CLI::Option* opt : sub.get_options()) {
      const std::string name = opt->get_single_name();
      if (name.empty() || name == "help" || opt->get_lnames().empty()) continue;
      if (opt->get_expected_max() == 0) {
        set("flag." + name, opt->count() > 0 ? "1" : "0");
        continue;
      }
      std::string value;
      if (opt->count() > 0) {
        const auto& res = opt->results();
        for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
      } else {
        value = opt->get_default_str();
      }
      set("arg." + name, value);
    }
  }

  void set(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }

  void write(const std::string& output_path) const {
    std::ofstream out = open_out(output_path + ".manifest");
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const std::time_t now = std::time(nullptr);
    char stamp[64];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out << "command=" << command_ << '\n';
    out << "version=" << kVersion << '\n';
    out << "cwd=" << fs::current_path().string() << '\n';
    for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
    out << "finished=" << stamp << '\n';
    out << fmt::format("wall_clock_seconds={:.3f}\n", elapsed);
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

// ---------------------------------------------------------------------------
// Shared table readers

struct DescribedRow {
  int id = 0;
  int n_atoms = 0;
  double r_min = 0.0;
  double r_max = 0.0;
  double pc1 = 0.0;
  double pc2 = 0.0;
  std::string status;
};

std::vector<DescribedRow> read_described(const std::string& path) {
  auto in = open_in(path);
  const csv::Table t = csv::read_table(in);
  const int c_id = t.require_column("id");
  const int c_atoms = t.require_column("n_atoms");
  const int c_min = t.require_column("r_min");
  const int c_max = t.require_column("r_max");
  const int c_pc1 = t.require_column("pc1");
  const int c_pc2 = t.require_column("pc2");
  const int c_status = t.require_column("status");
  std::vector<DescribedRow> out;
  for (const auto& r : t.rows) {
    DescribedRow d;
    d.id = std::stoi(r[c_id]);
    d.n_atoms = std::stoi(r[c_atoms]);
    d.r_min = parse_double(r[c_min], "r_min");
    d.r_max = parse_double(r[c_max], "r_max");
    d.pc1 = parse_double(r[c_pc1], "pc1");
    d.pc2 = parse_double(r[c_pc2], "pc2");
    d.status = r[c_status];
    out.push_back(d);
  }
  return out;
}

struct EvaluatedRow {
  int id = 0;
  double test_accuracy = 0.0;
  std::string label;
  std::string status;
};

std::map<int, EvaluatedRow> read_evaluated(const std::string& path) {
  auto in = open_in(path);
  const csv::Table t = csv::read_table(in);
  const int c_id = t.require_column("id");
  const int c_acc = t.require_column("test_accuracy");
  const int c_label = t.require_column("label");
  const int c_status = t.require_column("status");
  std::map<int, EvaluatedRow> out;
  for (const auto& r : t.rows) {
    EvaluatedRow e;
    e.id = std::stoi(r[c_id]);
    e.test_accuracy = parse_double(r[c_acc], "test_accuracy");
    e.label = r[c_label];
    e.status = r[c_status];
    out[e.id] = e;
  }
  return out;
}

std::vector<CircuitGrid> read_circuit_file(const std::string& path) {
  auto in = open_in(path);
  return read_circuits(in);
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOptions {
  int qubits = 4;
  int layers = 5;
  int count = 100;
  std::uint64_t seed = 1;
  double p_identity = 0.2;
  double p_rz = 0.5;
  double p_cnot = 0.3;
  int delta_max = 0;
  std::string extend_from;
  std::string out;
};

int cmd_generate(const GenerateOptions& o, Manifest& manifest) {
  const GatePolicy policy{o.p_identity, o.p_rz, o.p_cnot, o.delta_max};
  std::vector<CircuitGrid> grids;
  if (!o.extend_from.empty()) {
    const auto parents = read_circuit_file(o.extend_from);
    for (std::size_t i = 0; i < parents.size(); ++i) {
      const int extra = o.layers - parents[i].n_layers();
      if (extra < 0)
        throw InvalidArgument(fmt::format("circuit {} already has {} layers (> {})", i, parents[i].n_layers(), o.layers));
      policy.validate(parents[i].n_qubits());
      grids.push_back(extend_circuit(parents[i], extra, policy, derive_seed(o.seed, i)));
    }
    manifest.set("input.circuits", o.extend_from);
  } else {
    if (o.count < 0) throw InvalidArgument("count must be nonnegative");
    for (int i = 0; i < o.count; ++i) grids.push_back(sample_circuit(o.qubits, o.layers, policy, derive_seed(o.seed, i)));
  }
  auto out = open_out(o.out);
  write_circuits(out, grids);
  manifest.set("result.circuits", std::to_string(grids.size()));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// describe

struct DescribeOptions {
  std::string circuits;
  std::string out;
  std::string molecules;
  std::uint64_t seed = 0;
  double bond_scale = 1.5;
  int fp_width = 2048;
  int max_path = 7;
  unsigned threads = 0;
};

int cmd_describe(const DescribeOptions& o, Manifest& manifest) {
  const auto grids = read_circuit_file(o.circuits);
  DescribeSettings settings;
  settings.bond_scale = o.bond_scale;
  settings.fingerprint_width = o.fp_width;
  settings.max_path_len = o.max_path;
  if (!(o.bond_scale > 0.0)) throw InvalidArgument("bond scale must be positive");
  if (o.fp_width < 16 || o.max_path < 1) throw InvalidArgument("invalid fingerprint settings");
  const auto desc = describe_batch(grids, settings, o.seed, o.threads);

  auto out = open_out(o.out);
  csv::write_row(out, {"id", "n_atoms", "r_min", "r_max", "pc1", "pc2", "status"});
  int flagged = 0;
  for (std::size_t i = 0; i < desc.size(); ++i) {
    const auto& d = desc[i];
    if (!d.ok) {
      ++flagged;
      std::cerr << fmt::format("circuit {}: {}\n", i, d.error);
    }
    const std::string nan = "nan";
    csv::write_row(out, {std::to_string(i), std::to_string(d.n_atoms), d.ok ? fmt_double(d.radii.r_min) : nan,
                         d.ok ? fmt_double(d.radii.r_max) : nan, fmt_double(d.pc1), fmt_double(d.pc2),
                         d.ok ? "ok" : d.error});
  }
  if (!o.molecules.empty()) {
    auto mout = open_out(o.molecules);
    for (const auto& g : grids) {
      try {
        mout << to_line(circuit_to_molecule(g)) << '\n';
      } catch (const Error&) {
        mout << "# unmappable\n";
      }
    }
    manifest.set("output.molecules", o.molecules);
  }
  manifest.set("input.circuits", o.circuits);
  manifest.set("result.flagged", std::to_string(flagged));
  return flagged > 0 ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  std::string circuits;
  std::string dataset = "hidden-manifold:4";
  std::string csv_features;
  std::string csv_label = "label";
  std::string csv_positive = "1";
  std::string digits = "3,5";
  int mnist_dim = 5;
  int mnist_per_class = 0;
  int train_size = 1000;
  int test_size = 1000;
  int bo_budget = 20;
  int bo_init = 5;
  int bo_pool = 512;
  double svm_c = 1.0;
  double svm_tol = 1e-3;
  double margin = 0.10;
  bool relative_margin = false;
  std::uint64_t seed = 1;
  std::string out;
  unsigned threads = 0;
};

Dataset shuffled(const Dataset& d, std::uint64_t seed) {
  std::vector<int> idx(static_cast<std::size_t>(d.size()));
  for (int i = 0; i < d.size(); ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<int>(idx));
  return subset(d, idx);
}

std::pair<Dataset, Dataset> load_problem_data(const EvaluateOptions& o) {
  if (o.train_size < 2 || o.test_size < 2) throw InvalidArgument("train and test sizes must be at least 2");
  const auto colon = o.dataset.find(':');
  const std::string kind = o.dataset.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : o.dataset.substr(colon + 1);
  Dataset all;
  if (kind == "hidden-manifold") {
    const int d = arg.empty() ? 4 : std::stoi(arg);
    all = gen_hidden_manifold(d, o.train_size + o.test_size, o.seed);
  } else if (kind == "csv") {
    if (o.csv_features.empty()) throw InvalidArgument("csv datasets need --csv-features");
    all = shuffled(load_csv_dataset(arg, split(o.csv_features, ','), o.csv_label, o.csv_positive), o.seed);
  } else if (kind == "mnist") {
    const auto paths = split(arg, ',');
    const auto digits = split(o.digits, ',');
    if (paths.size() != 2 || digits.size() != 2) throw InvalidArgument("mnist datasets need IMAGES,LABELS and --digits A,B");
    all = shuffled(load_mnist_pair(paths[0], paths[1], std::stoi(digits[0]), std::stoi(digits[1]), o.mnist_dim,
                                   o.mnist_per_class, o.seed),
                   o.seed);
  } else if (kind == "snapshot") {
    auto in = open_in(arg);
    all = shuffled(read_snapshot(in), o.seed);
  } else {
    throw InvalidArgument("unknown dataset kind '" + kind + "'");
  }
  if (all.size() < o.train_size + o.test_size)
    throw InvalidArgument(fmt::format("dataset has {} rows, {} requested", all.size(), o.train_size + o.test_size));
  std::vector<int> train_idx;
  std::vector<int> test_idx;
  for (int i = 0; i < o.train_size; ++i) train_idx.push_back(i);
  for (int i = 0; i < o.test_size; ++i) test_idx.push_back(o.train_size + i);
  return {subset(all, train_idx), subset(all, test_idx)};
}

int cmd_evaluate(const EvaluateOptions& o, Manifest& manifest) {
  const auto grids = read_circuit_file(o.circuits);
  const auto [train, test] = load_problem_data(o);
  const EvalProblem problem = make_problem(train, test);
  EvalSettings settings;
  settings.bo.budget = o.bo_budget;
  settings.bo.n_init = o.bo_init;
  settings.bo.candidate_pool = o.bo_pool;
  settings.bo.validate();
  settings.svm.c = o.svm_c;
  settings.svm.tol = o.svm_tol;
  if (!(o.svm_c > 0.0)) throw InvalidArgument("--svm-c must be positive");
  for (const auto& g : grids) {
    if (train.dim() > g.n_qubits()) throw InvalidArgument("dataset has more features than a circuit has qubits");
  }

  std::vector<EvaluationRecord> recs(grids.size());
  std::vector<std::string> errors(grids.size());
  parallel_for(
      grids.size(),
      [&](std::size_t i) {
        try {
          recs[i] = evaluate_circuit(grids[i], problem, settings, circuit_seed(o.seed, grids[i]));
        } catch (const Error& e) {
          errors[i] = e.what();
        }
      },
      o.threads);

  std::vector<double> accs;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (errors[i].empty()) accs.push_back(recs[i].test_accuracy);
  }
  std::vector<PerformanceLabel> labels;
  if (!accs.empty()) labels = label_performance(accs, o.margin, o.relative_margin);

  auto out = open_out(o.out);
  csv::write_row(out, {"id", "n_rz", "validation_accuracy", "test_accuracy", "label", "evaluations", "status", "theta"});
  std::size_t next_label = 0;
  int failed = 0;
  std::string trace_lengths;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    if (!errors[i].empty()) {
      ++failed;
      std::cerr << fmt::format("circuit {}: {}\n", i, errors[i]);
      csv::write_row(out, {std::to_string(i), "0", "nan", "nan", "error", "0", errors[i], ""});
      trace_lengths += (i ? "," : "") + std::string("0");
      continue;
    }
    std::string theta;
    for (std::size_t k = 0; k < r.theta.size(); ++k) theta += (k ? ";" : "") + fmt_double(r.theta[k]);
    csv::write_row(out, {std::to_string(i), std::to_string(r.n_rz), fmt_double(r.validation_accuracy),
                         fmt_double(r.test_accuracy), label_name(labels[next_label++]), std::to_string(r.evaluations),
                         "ok", theta});
    trace_lengths += (i ? "," : "") + std::to_string(r.evaluations);
  }
  manifest.set("input.circuits", o.circuits);
  manifest.set("dataset.name", train.name);
  manifest.set("dataset.feature_scaling", "affine train [min,max] -> [0,pi], no clamping");
  manifest.set("bo.objective", "balanced accuracy on stratified 25% validation fold of train");
  manifest.set("bo.kernel", "squared exponential, length scale 0.2 on unit cube, jitter 1e-6, EI");
  manifest.set("result.trace_lengths", trace_lengths);
  manifest.set("result.failed", std::to_string(failed));
  return failed > 0 ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------------------
// search

struct SearchOptions {
  std::string described;
  std::string evaluated;
  std::string mode = "quadrant";  // quadrant | top-rmin | bottom-rmin | fresh
  std::string quadrant = "high";
  int sample = 100;
  std::optional<double> rmin_threshold;
  std::optional<double> rmax_threshold;
  std::uint64_t seed = 1;
  std::string out;
  // fresh sampling
  int qubits = 4;
  int layers = 5;
  double p_identity = 0.2;
  double p_rz = 0.5;
  double p_cnot = 0.3;
  int max_tries = 100000;
  double bond_scale = 1.5;
};

PerformanceLabel label_of(const std::map<int, EvaluatedRow>& ev, int id) {
  const auto it = ev.find(id);
  if (it == ev.end() || it->second.status != "ok") return PerformanceLabel::Discarded;
  return parse_label(it->second.label);
}

int cmd_search(const SearchOptions& o, Manifest& manifest) {
  if (o.quadrant != "high" && o.quadrant != "low") throw InvalidArgument("--quadrant must be high or low");
  if (o.sample < 1) throw InvalidArgument("--sample must be positive");
  const auto described = read_described(o.described);
  std::vector<DescribedRow> usable;
  for (const auto& d : described) {
    if (d.status == "ok") usable.push_back(d);
  }
  if (usable.empty()) throw InvalidArgument("no described circuits with valid descriptors");
  std::vector<double> mins;
  std::vector<double> maxs;
  for (const auto& d : usable) {
    mins.push_back(d.r_min);
    maxs.push_back(d.r_max);
  }
  const double t_min = o.rmin_threshold ? *o.rmin_threshold : median(mins);
  const double t_max = o.rmax_threshold ? *o.rmax_threshold : median(maxs);
  manifest.set("result.rmin_threshold", fmt_double(t_min));
  manifest.set("result.rmax_threshold", fmt_double(t_max));
  manifest.set("input.described", o.described);
  const bool want_high = o.quadrant == "high";
  auto in_quadrant = [&](double rmin, double rmax) {
    return want_high ? (rmin > t_min && rmax > t_max) : (rmin <= t_min && rmax <= t_max);
  };

  if (o.mode == "fresh") {
    const GatePolicy policy{o.p_identity, o.p_rz, o.p_cnot, 0};
    policy.validate(o.qubits);
    DescribeSettings settings;
    settings.bond_scale = o.bond_scale;
    std::vector<CircuitGrid> found;
    int tries = 0;
    for (; tries < o.max_tries && static_cast<int>(found.size()) < o.sample; ++tries) {
      const auto g = sample_circuit(o.qubits, o.layers, policy, derive_seed(o.seed, static_cast<std::uint64_t>(tries)));
      const auto d = describe_circuit(g, settings, derive_seed(o.seed ^ 0x5eedULL, static_cast<std::uint64_t>(tries)));
      if (d.ok && in_quadrant(d.radii.r_min, d.radii.r_max)) found.push_back(g);
    }
    manifest.set("result.tries", std::to_string(tries));
    manifest.set("result.accepted", std::to_string(found.size()));
    if (found.empty()) throw InvalidArgument(fmt::format("quadrant empty after {} tries", tries));
    auto out = open_out(o.out);
    write_circuits(out, found);
    if (static_cast<int>(found.size()) < o.sample) {
      std::cerr << fmt::format("only {} of {} circuits found in {} tries\n", found.size(), o.sample, tries);
      return kExitPartial;
    }
    return kExitOk;
  }

  std::map<int, EvaluatedRow> evaluated;
  if (!o.evaluated.empty()) {
    evaluated = read_evaluated(o.evaluated);
    manifest.set("input.evaluated", o.evaluated);
  }

  std::vector<DescribedRow> selected;
  std::vector<PerformanceLabel> high_labels;
  std::vector<PerformanceLabel> low_labels;
  std::string high_rule;
  std::string low_rule;
  if (o.mode == "quadrant") {
    std::vector<DescribedRow> pool;
    for (const auto& d : usable) {
      if (in_quadrant(d.r_min, d.r_max)) pool.push_back(d);
      if (d.r_min > t_min && d.r_max > t_max) high_labels.push_back(label_of(evaluated, d.id));
      if (d.r_min <= t_min && d.r_max <= t_max) low_labels.push_back(label_of(evaluated, d.id));
    }
    if (pool.empty()) throw InvalidArgument("selected quadrant is empty");
    Rng rng(o.seed);
    if (static_cast<int>(pool.size()) > o.sample) {
      rng.shuffle(std::span<DescribedRow>(pool));
      pool.resize(static_cast<std::size_t>(o.sample));
      std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    }
    selected = std::move(pool);
    high_rule = fmt::format("r_min > {} and r_max > {}", fmt_double(t_min), fmt_double(t_max));
    low_rule = fmt::format("r_min <= {} and r_max <= {}", fmt_double(t_min), fmt_double(t_max));
  } else if (o.mode == "top-rmin" || o.mode == "bottom-rmin") {
    std::vector<DescribedRow> sorted = usable;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.r_min > b.r_min; });
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(o.sample), sorted.size());
    std::vector<DescribedRow> top(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n));
    std::vector<DescribedRow> bottom(sorted.end() - static_cast<std::ptrdiff_t>(n), sorted.end());
    for (const auto& d : top) high_labels.push_back(label_of(evaluated, d.id));
    for (const auto& d : bottom) low_labels.push_back(label_of(evaluated, d.id));
    selected = o.mode == "top-rmin" ? top : bottom;
    high_rule = fmt::format("{} largest r_min", n);
    low_rule = fmt::format("{} smallest r_min", n);
  } else {
    throw InvalidArgument("unknown search mode '" + o.mode + "'");
  }

  auto out = open_out(o.out);
  csv::write_row(out, {"id", "r_min", "r_max", "test_accuracy", "label"});
  for (const auto& d : selected) {
    const auto it = evaluated.find(d.id);
    const bool have = it != evaluated.end();
    csv::write_row(out, {std::to_string(d.id), fmt_double(d.r_min), fmt_double(d.r_max),
                         have ? fmt_double(it->second.test_accuracy) : "nan", have ? it->second.label : ""});
  }
  if (!evaluated.empty()) {
    if (high_labels.empty() || low_labels.empty()) {
      std::cerr << "enrichment report skipped: a comparison group is empty\n";
    } else {
      auto rep = open_out(o.out + ".enrichment.txt");
      rep << format_report(enrichment(high_labels, low_labels, high_rule, low_rule));
      manifest.set("output.enrichment", o.out + ".enrichment.txt");
    }
  }
  manifest.set("result.selected", std::to_string(selected.size()));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportOptions {
  std::string evaluated;
  std::string described;
  std::string kde = "r_min";
  std::string out;
  int n_boot = 200;
  int grid_points = 256;
  std::uint64_t seed = 1;
};

int cmd_report(const ReportOptions& o, Manifest& manifest) {
  if (o.kde != "r_min" && o.kde != "r_max") throw InvalidArgument("--kde must be r_min or r_max");
  const auto described = read_described(o.described);
  const auto evaluated = read_evaluated(o.evaluated);
  manifest.set("input.described", o.described);
  manifest.set("input.evaluated", o.evaluated);

  const std::string pca_path = o.out + "_pca.csv";
  auto pca = open_out(pca_path);
  csv::write_row(pca, {"id", "pc1", "pc2", "label"});
  std::vector<double> performant;
  std::vector<double> under;
  for (const auto& d : described) {
    if (d.status != "ok") continue;
    const PerformanceLabel l = label_of(evaluated, d.id);
    csv::write_row(pca, {std::to_string(d.id), fmt_double(d.pc1), fmt_double(d.pc2), label_name(l)});
    const double v = o.kde == "r_min" ? d.r_min : d.r_max;
    if (l == PerformanceLabel::Performant) performant.push_back(v);
    if (l == PerformanceLabel::Underperforming) under.push_back(v);
  }
  manifest.set("output.pca", pca_path);

  struct Series {
    std::string name;
    std::vector<double>* samples;
  };
  std::vector<Series> series;
  for (Series s : {Series{"performant", &performant}, Series{"underperforming", &under}}) {
    if (s.samples->empty()) {
      std::cerr << "warning: no " << s.name << " circuits; density omitted\n";
      continue;
    }
    if (s.samples->size() < 5)
      throw InvalidArgument(fmt::format("{} {} circuits; confidence bands need at least 5", s.samples->size(), s.name));
    series.push_back(s);
  }
  if (series.empty()) throw InvalidArgument("no labelled circuits to estimate densities");

  double lo = INFINITY;
  double hi = -INFINITY;
  for (const auto& s : series) {
    const double h = silverman_bandwidth(*s.samples);
    const auto [mn, mx] = std::minmax_element(s.samples->begin(), s.samples->end());
    lo = std::min(lo, *mn - 3.0 * h);
    hi = std::max(hi, *mx + 3.0 * h);
  }
  const auto grid = linspace(lo, hi, o.grid_points);
  std::vector<DensityEstimate> est;
  for (std::size_t k = 0; k < series.size(); ++k)
    est.push_back(bootstrap_band(*series[k].samples, grid, o.n_boot, 0.95, derive_seed(o.seed, k)));

  const std::string kde_path = o.out + "_kde.csv";
  auto kde = open_out(kde_path);
  csv::Row header{o.kde};
  for (const auto& s : series) {
    header.push_back(s.name + "_density");
    header.push_back(s.name + "_lo");
    header.push_back(s.name + "_hi");
  }
  csv::write_row(kde, header);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    csv::Row row{fmt_double(grid[g])};
    for (const auto& e : est) {
      row.push_back(fmt_double(e.density[g]));
      row.push_back(fmt_double(e.lower[g]));
      row.push_back(fmt_double(e.upper[g]));
    }
    csv::write_row(kde, row);
  }
  manifest.set("output.kde", kde_path);
  manifest.set("result.performant", std::to_string(performant.size()));
  manifest.set("result.underperforming", std::to_string(under.size()));
  return kExitOk;
}

int cmd_replay(const std::string& manifest_path);

int run(std::vector<std::string> args) {
  CLI::App app{"Circuit-molecule descriptors for quantum-kernel search", "qcmol"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Sample random gate grids");
  g->add_option("--qubits", gen.qubits, "Qubits per circuit");
  g->add_option("--layers", gen.layers, "Layers per circuit (total, with --extend-from)");
  g->add_option("--count", gen.count, "Number of circuits");
  g->add_option("--seed", gen.seed, "Base seed");
  g->add_option("--p-identity", gen.p_identity, "Identity probability");
  g->add_option("--p-rz", gen.p_rz, "RZ probability");
  g->add_option("--p-cnot", gen.p_cnot, "CNOT probability");
  g->add_option("--delta-max", gen.delta_max, "Largest CNOT offset (0 = n_qubits - 1)");
  g->add_option("--extend-from", gen.extend_from, "Extend the circuits in this file instead of sampling");
  g->add_option("--out", gen.out, "Output circuit file")->required();

  DescribeOptions desc;
  auto* d = app.add_subcommand("describe", "Map circuits to molecules and compute descriptors");
  d->add_option("--circuits", desc.circuits, "Circuit file")->required();
  d->add_option("--out", desc.out, "Output CSV")->required();
  d->add_option("--molecules", desc.molecules, "Also write molecule records here");
  d->add_option("--seed", desc.seed, "Layout seed");
  d->add_option("--bond-scale", desc.bond_scale, "Angstrom per layout unit");
  d->add_option("--fp-width", desc.fp_width, "Fingerprint width");
  d->add_option("--max-path", desc.max_path, "Longest fingerprint path, in atoms");
  d->add_option("--threads", desc.threads, "Worker threads (0 = all cores)");

  EvaluateOptions ev;
  auto* e = app.add_subcommand("evaluate", "Optimize and score each circuit as an SVM kernel");
  e->add_option("--circuits", ev.circuits, "Circuit file")->required();
  e->add_option("--dataset", ev.dataset, "hidden-manifold:D | csv:PATH | mnist:IMAGES,LABELS | snapshot:PATH");
  e->add_option("--csv-features", ev.csv_features, "Comma-separated feature columns");
  e->add_option("--csv-label", ev.csv_label, "Label column");
  e->add_option("--csv-positive", ev.csv_positive, "Label token of the positive class");
  e->add_option("--digits", ev.digits, "MNIST digit pair A,B");
  e->add_option("--mnist-dim", ev.mnist_dim, "PCA dimension for MNIST");
  e->add_option("--mnist-per-class", ev.mnist_per_class, "Images per digit (0 = all)");
  e->add_option("--train-size", ev.train_size, "Training points");
  e->add_option("--test-size", ev.test_size, "Test points");
  e->add_option("--bo-budget", ev.bo_budget, "Objective evaluations per circuit");
  e->add_option("--bo-init", ev.bo_init, "Initial Latin-hypercube points");
  e->add_option("--bo-pool", ev.bo_pool, "Acquisition candidates per step");
  e->add_option("--svm-c", ev.svm_c, "SVM box constraint");
  e->add_option("--svm-tol", ev.svm_tol, "SMO KKT tolerance");
  e->add_option("--margin", ev.margin, "Labeling margin around the accuracy midpoint");
  e->add_flag("--relative-margin", ev.relative_margin, "Margin as a fraction of the accuracy range");
  e->add_option("--seed", ev.seed, "Base seed");
  e->add_option("--out", ev.out, "Output CSV")->required();
  e->add_option("--threads", ev.threads, "Worker threads (0 = all cores)");

  SearchOptions se;
  auto* s = app.add_subcommand("search", "Select circuits by Gershgorin descriptors");
  s->add_option("--described", se.described, "describe output")->required();
  s->add_option("--evaluated", se.evaluated, "evaluate output (for labels and enrichment)");
  s->add_option("--mode", se.mode, "quadrant | top-rmin | bottom-rmin | fresh");
  s->add_option("--quadrant", se.quadrant, "high or low");
  s->add_option("--sample", se.sample, "Circuits to select");
  s->add_option("--rmin-threshold", se.rmin_threshold, "r_min threshold (default: batch median)");
  s->add_option("--rmax-threshold", se.rmax_threshold, "r_max threshold (default: batch median)");
  s->add_option("--seed", se.seed, "Seed");
  s->add_option("--out", se.out, "Output file")->required();
  s->add_option("--qubits", se.qubits, "Fresh mode: qubits");
  s->add_option("--layers", se.layers, "Fresh mode: layers");
  s->add_option("--p-identity", se.p_identity, "Fresh mode: identity probability");
  s->add_option("--p-rz", se.p_rz, "Fresh mode: RZ probability");
  s->add_option("--p-cnot", se.p_cnot, "Fresh mode: CNOT probability");
  s->add_option("--max-tries", se.max_tries, "Fresh mode: rejection cap");
  s->add_option("--bond-scale", se.bond_scale, "Fresh mode: Angstrom per layout unit");

  ReportOptions re;
  auto* r = app.add_subcommand("report", "PCA scatter and descriptor densities per label");
  r->add_option("--evaluated", re.evaluated, "evaluate output")->required();
  r->add_option("--described", re.described, "describe output")->required();
  r->add_option("--kde", re.kde, "Descriptor for densities: r_min or r_max");
  r->add_option("--out", re.out, "Output prefix")->required();
  r->add_option("--n-boot", re.n_boot, "Bootstrap resamples");
  r->add_option("--grid-points", re.grid_points, "Density grid size");
  r->add_option("--seed", re.seed, "Bootstrap seed");

  std::string manifest_path;
  auto* rp = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  rp->add_option("manifest", manifest_path, "Manifest file")->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*rp) return cmd_replay(manifest_path);
    CLI::App* active = app.get_subcommands().front();
    Manifest manifest(active->get_name());
    manifest.capture(*active);
    int rc = kExitOk;
    std::string out;
    if (*g) {
      rc = cmd_generate(gen, manifest);
      out = gen.out;
    } else if (*d) {
      rc = cmd_describe(desc, manifest);
      out = desc.out;
    } else if (*e) {
      rc = cmd_evaluate(ev, manifest);
      out = ev.out;
    } else if (*s) {
      rc = cmd_search(se, manifest);
      out = se.out;
    } else if (*r) {
      rc = cmd_report(re, manifest);
      out = re.out;
    }
    manifest.set("exit_code", std::to_string(rc));
    manifest.write(out);
    return rc;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitConfig;
  }
}

int cmd_replay(const std::string& manifest_path) {
  auto in = open_in(manifest_path);
  std::string line;
  std::string command;
  std::string cwd;
  std::vector<std::string> args;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "command") command = value;
    if (key == "cwd") cwd = value;
    if (key.rfind("arg.", 0) == 0 && !value.empty()) {
      args.push_back("--" + key.substr(4));
      args.push_back(value);
    }
    if (key.rfind("flag.", 0) == 0 && value == "1") args.push_back("--" + key.substr(5));
  }
  if (command.empty() || command == "replay") throw FormatError("manifest has no replayable command");
  if (!cwd.empty()) fs::current_path(cwd);
  args.insert(args.begin(), command);
  return run(args);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args);
}
