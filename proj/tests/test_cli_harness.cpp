#include "cartan/experiment.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

using namespace cartan;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

// Runs the CLI through the shell; stderr is discarded unless `err` is set.
CliRun cli(const std::string& args, const std::string& env = "", const std::string& err = "/dev/null") {
  const std::string cmd = env + " " + CARTAN_CLI_PATH + " " + args + " 2>" + err;
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  size_t k;
  while ((k = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), k);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("cartan_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string l; std::getline(ss, l);) out.push_back(l);
  return out;
}

const std::string lyap_base = "lyap --class AIII -n 2 --lambda 0.2 --steps 2e4 --moment-samples 5000";
const std::string quick_lyap = lyap_base + " --seed 3";

}  // namespace

TEST(MatrixJson, RoundTripIsExact) {
  Rng rng(1);
  const Mat m = ginibre(3, 4, rng);
  const Mat back = matrix_from_json(json::parse(matrix_to_json(m).dump()));
  EXPECT_EQ(back.rows(), 3);
  EXPECT_EQ(back.cols(), 4);
  EXPECT_EQ((back - m).norm(), 0.0);
  RVec v(3);
  v << 1.0 / 3.0, -2e-300, 7.5;
  EXPECT_EQ(vector_from_json(json::parse(vector_to_json(v).dump())), v);
}

TEST(MatrixJson, RejectsMalformedInput) {
  EXPECT_THROW(matrix_from_json(json::parse(R"({"rows": 1, "cols": 1})")), DataError);
  EXPECT_THROW(matrix_from_json(json::parse(R"({"rows": 1, "cols": 2, "data": [[1, 0]]})")), DataError);
  EXPECT_THROW(matrix_from_json(json::parse(R"({"rows": 1, "cols": 1, "data": [[1]]})")), DataError);
  EXPECT_THROW(matrix_from_json(json::parse(R"({"rows": -1, "cols": 1, "data": []})")), DataError);
  EXPECT_THROW(matrix_from_json(json::parse(R"({"rows": 1.5, "cols": 1, "data": [[0, 0]]})")), DataError);
  EXPECT_THROW(vector_from_json(json::parse(R"([1, "x"])")), DataError);
  EXPECT_THROW(checkpoint_from_json(json::parse(R"({"schema": "other/1"})")), DataError);
  EXPECT_THROW(load_json("/nonexistent/cartan.json"), DataError);
}

TEST(Checkpoint, ResumeReproducesUninterruptedRun) {
  const GroupSpec g = make_group(Cartan::CI, 2);
  const MatrixSampler s = rpp_toy(g, 0.2);
  QrOptions opt;
  opt.burn_in = 200;
  opt.checkpoint_every = 3000;
  std::optional<QrState> mid;
  opt.checkpoint = [&](const QrState& st) {
    if (!mid) mid = st;
  };
  Rng a(11);
  const LyapunovEstimate full = qr_lyapunov(s, 10000, a, opt);
  ASSERT_TRUE(mid.has_value());
  ASSERT_LT(mid->step, 10200);

  const fs::path file = scratch("ckpt") / "state.json";
  save_json(checkpoint_to_json(*mid), file.string());
  const QrState loaded = checkpoint_from_json(load_json(file.string()));
  QrOptions again;
  again.burn_in = 200;
  again.resume = &loaded;
  Rng b(999);  // state comes from the checkpoint
  const LyapunovEstimate resumed = qr_lyapunov(s, 10000, b, again);
  EXPECT_EQ(resumed.gamma, full.gamma);
  EXPECT_EQ(resumed.stderr_, full.stderr_);
}

TEST(Cli, LyapCsvIsByteIdenticalAcrossRuns) {
  const CliRun a = cli(quick_lyap), b = cli(quick_lyap);
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  const CliRun other = cli(lyap_base + " --seed 4");
  ASSERT_EQ(other.code, 0);
  EXPECT_NE(a.out, other.out);
}

TEST(Cli, SchemaHeaders) {
  const std::map<std::string, std::string> golden{
      {"lyap", "p,gamma_mc,stderr,gamma_formula,z"},
      {"dirac", "p,gamma_mc,stderr,gamma_formula,z,membership_residual"},
      {"table1", "h_class,g_class,group,n,m,samples,relation,max_residual,mu,zero_count"},
      {"moments",
       "item,pattern,family,n,input,analytic_re,analytic_im,mc_mean_re,mc_mean_im,mc_stderr_re,mc_stderr_im,"
       "z_score"},
      {"acceptance", "criterion,pass,title,summary"},
  };
  const std::map<std::string, std::string> args{
      {"lyap", quick_lyap},
      {"dirac", "dirac --class AIII -n 1 --steps 2000 --moment-samples 500"},
      {"table1", "table1 --class AI -n 1 --samples 5"},
      {"moments", "moments --family unitary -n 2 --samples 2000 --inputs 1"},
      {"acceptance", "acceptance --only 7"},
  };
  for (auto& [kind, header] : golden) {
    const CliRun r = cli(args.at(kind));
    EXPECT_EQ(r.code, 0) << kind;
    auto ls = lines(r.out);
    ASSERT_GE(ls.size(), 3u) << kind;
    EXPECT_EQ(ls[0], "# schema: " + kind + "/1");
    EXPECT_EQ(ls[1], header);
    std::istringstream in(r.out);
    EXPECT_EQ(check_csv_schema(in, kind), "");
  }
  std::istringstream stale("# schema: lyap/0\np,gamma_mc\n");
  EXPECT_NE(check_csv_schema(stale, "lyap"), "");
}

TEST(Cli, JsonMirrorsCsv) {
  const CliRun csv = cli(quick_lyap), js = cli(quick_lyap + " --format json");
  ASSERT_EQ(js.code, 0);
  const json j = json::parse(js.out);
  EXPECT_EQ(j["schema"], "lyap/1");
  auto ls = lines(csv.out);
  ASSERT_EQ(j["rows"].size() + 2, ls.size());
  for (size_t r = 0; r < j["rows"].size(); ++r) {
    std::stringstream row(ls[r + 2]);
    std::string cell;
    std::getline(row, cell, ',');
    EXPECT_EQ(j["rows"][r]["p"].get<int>(), std::stoi(cell));
    std::getline(row, cell, ',');
    EXPECT_NEAR(j["rows"][r]["gamma_mc"].get<double>(), std::stod(cell), 1e-11 * std::abs(std::stod(cell)));
  }
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("lyap --no-such-flag").code, 1);
  EXPECT_EQ(cli("lyap --steps ten").code, 1);
  EXPECT_EQ(cli("lyap --class XYZ").code, 1);
  EXPECT_EQ(cli("lyap --format xml").code, 1);
  EXPECT_EQ(cli("dirac --class BDI --energy 0.3").code, 1);
  EXPECT_EQ(cli("acceptance --only 9").code, 1);
  EXPECT_EQ(cli("--help").code, 0);

  // D at N = 3 misses the printed formula by about a factor of two.
  const fs::path err = scratch("exit") / "stderr.txt";
  const CliRun bad = cli("lyap --class D -n 3 --lambda 0.2 --steps 1e5 --moment-samples 1e4", "", err.string());
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(slurp(err).find("deviates from the formula"), std::string::npos) << slurp(err);
  EXPECT_EQ(lines(bad.out).size(), 5u);  // the table is still written
}

TEST(Cli, OutputDirectoryFromEnvironment) {
  const fs::path dir = scratch("env") / "nested";
  const CliRun r = cli(quick_lyap, "CARTAN_OUTPUT_DIR=" + dir.string());
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "");
  EXPECT_EQ(slurp(dir / "lyap.csv"), cli(quick_lyap).out);

  const CliRun json_run = cli(quick_lyap + " --format json", "CARTAN_OUTPUT_DIR=" + dir.string());
  ASSERT_EQ(json_run.code, 0);
  EXPECT_TRUE(fs::exists(dir / "lyap.json"));

  const fs::path explicit_file = dir / "mine.csv";
  cli(quick_lyap + " -o " + explicit_file.string(), "CARTAN_OUTPUT_DIR=" + dir.string());
  EXPECT_TRUE(fs::exists(explicit_file));
  EXPECT_NE(cli(quick_lyap + " -o -", "CARTAN_OUTPUT_DIR=" + dir.string()).out, "");
}

TEST(Cli, ConfigFileAndOverrides) {
  const fs::path dir = scratch("config");
  const fs::path good = dir / "run.ini", bad = dir / "bad.ini";
  std::ofstream(good) << "[lyap]\nclass=AIII\nn=2\nlambda=0.2\nsteps=2e4\nmoment-samples=5000\nseed=3\n";
  std::ofstream(bad) << "[lyap]\nstepz=2e4\n";
  const CliRun from_file = cli("--config " + good.string() + " lyap");
  ASSERT_EQ(from_file.code, 0);
  EXPECT_EQ(from_file.out, cli(quick_lyap).out);
  // Flags win over the file.
  const CliRun overridden = cli("--config " + good.string() + " lyap --seed 4");
  EXPECT_EQ(overridden.out, cli(lyap_base + " --seed 4").out);
  EXPECT_EQ(cli("--config " + bad.string() + " lyap").code, 1);
  EXPECT_EQ(cli("--config " + (dir / "missing.ini").string() + " lyap").code, 1);
}

TEST(Cli, CheckpointFileResumes) {
  const fs::path dir = scratch("cli_ckpt");
  const std::string base = "lyap --class AI -n 2 --lambda 0.2 --steps 2e4 --burn-in 500 --moment-samples 2000 --seed 5";
  const CliRun plain = cli(base);
  const CliRun saved = cli(base + " --checkpoint " + (dir / "c.json").string() + " --checkpoint-every 4000");
  ASSERT_EQ(saved.code, 0);
  EXPECT_EQ(saved.out, plain.out);
  const json c = load_json((dir / "c.json").string());
  EXPECT_EQ(c["schema"], checkpoint_schema);
  const CliRun resumed = cli(base + " --resume " + (dir / "c.json").string());
  ASSERT_EQ(resumed.code, 0);
  EXPECT_EQ(resumed.out, plain.out);
  EXPECT_EQ(cli(base + " --replicas 2 --resume " + (dir / "c.json").string()).code, 1);
}

TEST(Cli, DiracAndTable1) {
  const CliRun d = cli("dirac --class AII -n 3 --lambda 0.3 --steps 2e4 --moment-samples 2000");
  ASSERT_EQ(d.code, 0);
  auto ls = lines(d.out);
  ASSERT_EQ(ls.size(), 2u + 6u);
  // Kramers pairs and the odd-N zero pair.
  std::vector<double> g;
  for (size_t i = 2; i < ls.size(); ++i) g.push_back(std::stod(ls[i].substr(ls[i].find(',') + 1)));
  EXPECT_NEAR(g[0], g[1], 1e-12);
  EXPECT_LT(std::abs(g[2]), 1e-8);
  EXPECT_LT(std::abs(g[3]), 1e-8);

  const CliRun t = cli("table1 --class all -n 2 --samples 10");
  ASSERT_EQ(t.code, 0);
  std::set<std::string> classes;
  for (auto& l : lines(t.out)) classes.insert(l.substr(0, l.find(',')));
  EXPECT_EQ(classes.size(), 2u + 10u);  // schema line, header, ten classes
}

TEST(Cli, MomentsAndAcceptance) {
  const CliRun m = cli("moments --family symplectic -n 2 --samples 20000 --inputs 2 --format json");
  ASSERT_EQ(m.code, 0);
  const json j = json::parse(m.out);
  EXPECT_EQ(j["schema"], "moments/1");
  ASSERT_FALSE(j["rows"].empty());
  for (auto& r : j["rows"]) EXPECT_EQ(r["family"], "symplectic");

  const CliRun a = cli("acceptance --only 1,7");
  ASSERT_EQ(a.code, 0);
  auto ls = lines(a.out);
  ASSERT_EQ(ls.size(), 4u);
  EXPECT_EQ(ls[2].substr(0, 4), "1,1,");
  EXPECT_EQ(ls[3].substr(0, 4), "7,1,");
}
