#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "qcmol/circuit.hpp"
#include "qcmol/csv.hpp"

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("qcmol_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) const {
    const std::string cmd = "cd '" + dir_.string() + "' && '" + QCMOL_CLI_PATH + "' " + args + " >out.log 2>err.log";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  qcmol::csv::Table table(const std::string& name) const {
    std::ifstream in(dir_ / name);
    return qcmol::csv::read_table(in);
  }

  std::map<std::string, std::string> manifest(const std::string& name) const {
    std::map<std::string, std::string> m;
    std::istringstream in(read(name + ".manifest"));
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) m[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return m;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenerateIsDeterministic) {
  ASSERT_EQ(run("generate --qubits 4 --layers 5 --count 100 --seed 1 --out a.txt"), 0);
  ASSERT_EQ(run("generate --qubits 4 --layers 5 --count 100 --seed 1 --out b.txt"), 0);
  const std::string a = read("a.txt");
  EXPECT_EQ(a, read("b.txt"));
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 100);
  EXPECT_EQ(manifest("a.txt")["arg.seed"], "1");
}

TEST_F(Cli, ExtendKeepsPrefix) {
  ASSERT_EQ(run("generate --qubits 4 --layers 5 --count 20 --seed 2 --out c5.txt"), 0);
  ASSERT_EQ(run("generate --layers 8 --extend-from c5.txt --seed 3 --out c8.txt"), 0);
  std::istringstream a(read("c5.txt"));
  std::istringstream b(read("c8.txt"));
  const auto g5 = qcmol::read_circuits(a);
  const auto g8 = qcmol::read_circuits(b);
  ASSERT_EQ(g5.size(), g8.size());
  for (std::size_t i = 0; i < g5.size(); ++i) {
    ASSERT_EQ(g8[i].n_layers(), 8);
    for (int l = 0; l < 5; ++l)
      for (int q = 0; q < 4; ++q) EXPECT_EQ(g8[i].at(q, l), g5[i].at(q, l));
  }
  EXPECT_EQ(run("generate --layers 3 --extend-from c5.txt --out bad.txt"), 1);
}

TEST_F(Cli, DescribeFlagsUnmappable) {
  {
    std::ofstream f(dir_ / "c.txt");
    f << "6 1 RZ RZ RZ RZ RZ RZ\n6 1 C5 I I I I T\n6 1 C4 RZ I I T RZ\n";
  }
  EXPECT_EQ(run("describe --circuits c.txt --out d.csv"), 2);
  const auto t = table("d.csv");
  ASSERT_EQ(t.rows.size(), 3u);
  const int status = t.require_column("status");
  EXPECT_EQ(t.rows[0][status], "ok");
  EXPECT_EQ(t.rows[1][status], "unmappable");
  EXPECT_EQ(t.rows[2][status], "ok");
  EXPECT_NE(t.rows[0][t.require_column("r_min")], "nan");
  const std::string first = read("d.csv");
  run("describe --circuits c.txt --out d.csv");
  EXPECT_EQ(read("d.csv"), first);
}

TEST_F(Cli, EvaluateIdenticalCircuitsAndBudgetOne) {
  {
    std::ofstream f(dir_ / "same.txt");
    for (int i = 0; i < 20; ++i) f << "4 1 RZ I RZ I\n";
  }
  ASSERT_EQ(run("evaluate --circuits same.txt --train-size 40 --test-size 40 --bo-budget 1 --out e.csv"), 0);
  const auto t = table("e.csv");
  ASSERT_EQ(t.rows.size(), 20u);
  const int acc = t.require_column("test_accuracy");
  const int label = t.require_column("label");
  for (const auto& r : t.rows) {
    EXPECT_EQ(r[acc], t.rows[0][acc]);
    EXPECT_EQ(r[label], "discarded");
  }
  const auto m = manifest("e.csv");
  EXPECT_EQ(m.at("result.trace_lengths"), "1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1");
  EXPECT_EQ(run("evaluate --circuits same.txt --dataset nonsense:1 --out x.csv"), 1);
  EXPECT_EQ(run("evaluate --circuits same.txt --bogus-flag 1 --out x.csv"), 1);
}

TEST_F(Cli, SearchReportAndReplay) {
  ASSERT_EQ(run("generate --qubits 4 --layers 4 --count 60 --seed 5 --out c.txt"), 0);
  ASSERT_EQ(run("describe --circuits c.txt --out d.csv"), 0);
  ASSERT_EQ(run("evaluate --circuits c.txt --train-size 60 --test-size 60 --bo-budget 3 --margin 0.02 --out e.csv"), 0);

  ASSERT_EQ(run("search --described d.csv --evaluated e.csv --quadrant high --sample 100 --out s.csv"), 0);
  const auto mf = manifest("s.csv");
  const double t_min = std::stod(mf.at("result.rmin_threshold"));
  const double t_max = std::stod(mf.at("result.rmax_threshold"));
  const auto s = table("s.csv");
  EXPECT_FALSE(s.rows.empty());
  for (const auto& r : s.rows) {
    EXPECT_GT(std::stod(r[1]), t_min);
    EXPECT_GT(std::stod(r[2]), t_max);
  }
  EXPECT_NE(read("s.csv.enrichment.txt").find("ratio="), std::string::npos);

  ASSERT_EQ(run("search --described d.csv --mode top-rmin --sample 10 --out top.csv"), 0);
  const auto d = table("d.csv");
  std::vector<double> all;
  for (const auto& r : d.rows) all.push_back(std::stod(r[d.require_column("r_min")]));
  std::sort(all.rbegin(), all.rend());
  const auto top = table("top.csv");
  ASSERT_EQ(top.rows.size(), 10u);
  for (const auto& r : top.rows) EXPECT_GE(std::stod(r[1]), all[9]);

  ASSERT_EQ(run("search --described d.csv --mode fresh --quadrant low --sample 5 --qubits 4 --layers 4 --seed 2 --out fresh.txt"), 0);
  std::istringstream fresh(read("fresh.txt"));
  EXPECT_EQ(qcmol::read_circuits(fresh).size(), 5u);

  const int rc = run("report --described d.csv --evaluated e.csv --n-boot 50 --out rep");
  const std::string err = read("err.log");
  if (rc == 0) {
    const auto k = table("rep_kde.csv");
    EXPECT_EQ(k.header.size(), 7u);
    EXPECT_EQ(k.header[1], "performant_density");
    EXPECT_EQ(k.header[4], "underperforming_density");
    EXPECT_EQ(table("rep_pca.csv").rows.size(), d.rows.size());
  } else {
    EXPECT_EQ(rc, 1) << err;
  }

  for (const std::string name : {"c.txt", "d.csv", "e.csv", "s.csv", "top.csv", "fresh.txt"}) {
    const std::string before = read(name);
    ASSERT_EQ(run("replay " + name + ".manifest"), manifest(name).count("exit_code") ? std::stoi(manifest(name)["exit_code"]) : 0);
    EXPECT_EQ(read(name), before) << name;
  }
}

TEST_F(Cli, ReportSingleClassWarns) {
  {
    std::ofstream f(dir_ / "d.csv");
    f << "id,n_atoms,r_min,r_max,pc1,pc2,status\n";
    for (int i = 0; i < 8; ++i) f << i << ",10," << 1.0 + i * 0.37 << ",5,0,0,ok\n";
  }
  {
    std::ofstream f(dir_ / "e.csv");
    f << "id,n_rz,validation_accuracy,test_accuracy,label,evaluations,status,theta\n";
    for (int i = 0; i < 8; ++i) f << i << ",1,0.9,0.9,performant,1,ok,0\n";
  }
  ASSERT_EQ(run("report --described d.csv --evaluated e.csv --n-boot 20 --out r"), 0);
  EXPECT_NE(read("err.log").find("warning"), std::string::npos);
  const auto k = table("r_kde.csv");
  EXPECT_EQ(k.header.size(), 4u);
  EXPECT_EQ(k.header[1], "performant_density");
}
