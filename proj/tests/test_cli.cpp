#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + SOAPMGK_CLI + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::string out;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) out.append(buf, n);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::vector<std::vector<std::string>> csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    std::vector<std::string> cols;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
      if (c == '"') quoted = !quoted;
      else if (c == ',' && !quoted) cols.push_back(cur), cur.clear();
      else cur += c;
    }
    cols.push_back(cur);
    rows.push_back(cols);
  }
  return rows;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

const std::string kBp = "'boundedpareto(xm=1,alpha=1.5,xmax=100)'";

}  // namespace

TEST_CASE("rank table for an exponential law is constant") {
  const Run r = run("rank --dist 'exp(rate=1)' --policy m-gittins --points 20");
  REQUIRE(r.code == 0);
  const auto rows = csv(r.out);
  REQUIRE(rows.size() == 21);
  CHECK(rows[0] == std::vector<std::string>{"age", "rank_serpt", "rank_mserpt", "rank_gittins", "rank_mgittins"});
  for (std::size_t i = 1; i < rows.size(); ++i)
    for (int c = 1; c <= 4; ++c) CHECK(std::stod(rows[i][c]) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("rank output files are byte-identical across runs") {
  const std::string args = "rank --dist " + kBp + " --points 50 --cutoffs-out /tmp/soapmgk_cut";
  REQUIRE(run(args + "1.csv --out /tmp/soapmgk_rank1.csv").code == 0);
  REQUIRE(run(args + "2.csv --out /tmp/soapmgk_rank2.csv").code == 0);
  CHECK(slurp("/tmp/soapmgk_rank1.csv") == slurp("/tmp/soapmgk_rank2.csv"));
  CHECK(slurp("/tmp/soapmgk_cut1.csv") == slurp("/tmp/soapmgk_cut2.csv"));
  const auto cut = csv(slurp("/tmp/soapmgk_cut1.csv"));
  CHECK(cut[0] == std::vector<std::string>{"size", "y", "z"});
  CHECK(cut.size() == 51);
}

TEST_CASE("exit codes") {
  CHECK(run("rank --dist 'exp(1)'").code == 2);
  CHECK(run("rank --dist 'exp(rate=1)' --bogus").code == 2);
  CHECK(run("").code == 2);
  CHECK(run("mg1 --dist 'exp(rate=1)' --rho abc").code == 2);
  CHECK(run("mg1 --dist 'exp(rate=1)' --rho 1.2").code == 3);
  CHECK(run("mg1 --dist 'exp(rate=1)' --rho 0.5 --lambda 0.5").code == 3);
  CHECK(run("mg1 --dist 'exp(rate=1)' --rho 0.5 --policy serpt").code == 3);
  CHECK(run("rank --dist " + kBp + " --policy gittins --cutoffs-out /tmp/soapmgk_x.csv").code == 3);
  CHECK(run("verify --rho ''").code == 3);
  CHECK(run("simulate --dist 'exp(rate=1)' --rho 0.5 --n-jobs 100").code == 3);
  CHECK(run("sweep --dist " + kBp + " --rho 0.9,0.8").code == 3);
  CHECK(run("simulate --dist 'exp(rate=1)' --rho 0.5", "SOAP_MGK_THREADS=0").code == 3);
  CHECK(run("--help").code == 0);
}

TEST_CASE("mg1 schema and values") {
  const Run r = run("mg1 --dist 'exp(rate=1)' --policy fcfs,m-gittins --lambda 0.5 --k 2");
  REQUIRE(r.code == 0);
  const auto rows = csv(r.out);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"policy", "dist", "lambda", "rho", "Q", "R", "S", "T", "Qa", "Qb", "Rb",
                                            "Rc", "Sb", "Sc", "bound_k"});
  CHECK(rows[1][0] == "fcfs");
  CHECK(rows[1][1] == "exp(rate=1)");
  CHECK(std::stod(rows[1][7]) == doctest::Approx(2.0));
  CHECK(rows[1][6] == "inf");
  CHECK(rows[1][14] == "inf");
}

TEST_CASE("simulate schema, tag columns and thread determinism") {
  const std::string args = "simulate --dist " + kBp + " --policy fcfs,m-serpt --rho 0.5,0.8 --k 1,2 --n-jobs 20000";
  const Run a = run(args + " --jobs 1");
  const Run b = run(args + " --jobs 3");
  const Run c = run(args + " --jobs 4", "SOAP_MGK_THREADS=2");
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out == c.out);
  const auto rows = csv(a.out);
  REQUIRE(rows.size() == 9);
  CHECK(rows[0] == std::vector<std::string>{"policy", "dist", "lambda", "rho", "k", "n_jobs", "seed", "mean_T",
                                            "ci_half", "max_delta", "delta_bound"});
  CHECK(rows[1][0] == "fcfs");
  CHECK(rows[1][4] == "1");
  CHECK(rows[2][4] == "2");
  CHECK(rows[5][0] == "m-serpt");
  CHECK(rows[1][9].empty());
  CHECK(rows[1][10].empty());

  const Run t = run("simulate --dist " + kBp + " --policy m-serpt --rho 0.8 --k 4 --n-jobs 30000 --tag-x 10");
  REQUIRE(t.code == 0);
  const auto tr = csv(t.out);
  CHECK(std::stod(tr[1][9]) <= std::stod(tr[1][10]) + 1e-9);
  CHECK(std::stod(tr[1][10]) > 0.0);
}

TEST_CASE("config file supplies defaults that flags override") {
  {
    std::ofstream f("/tmp/soapmgk_cfg.ini");
    f << "[mg1]\ndist=exp(rate=1)\npolicy=fcfs\nrho=0.5\n";
  }
  const auto base = csv(run("--config /tmp/soapmgk_cfg.ini mg1").out);
  REQUIRE(base.size() == 2);
  CHECK(base[1][3] == "0.5");
  const auto over = csv(run("--config /tmp/soapmgk_cfg.ini mg1 --rho 0.25").out);
  REQUIRE(over.size() == 2);
  CHECK(over[1][3] == "0.25");
}

TEST_CASE("sweep ratios fall with load") {
  const Run r = run("sweep --dist " + kBp + " --policy m-gittins --rho 0.8,0.9,0.95 --k 4 --n-jobs 400000");
  REQUIRE(r.code == 0);
  const auto rows = csv(r.out);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].size() == 15);
  CHECK(rows[0][13] == "ratio");
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][14] == "ok");
  CHECK(std::stod(rows[2][13]) <= std::stod(rows[1][13]));
  CHECK(std::stod(rows[3][13]) <= std::stod(rows[2][13]));
}

TEST_CASE("verify passes by default and fails under the fault hook") {
  const Run ok = run("verify");
  CHECK(ok.code == 0);
  const auto rows = csv(ok.out);
  REQUIRE(rows.size() > 1);
  CHECK(rows[0] == std::vector<std::string>{"module", "invariant", "case", "status", "worst", "detail"});
  const Run bad = run("verify --no-sim --fault");
  CHECK(bad.code == 1);
  CHECK(bad.out.find("FAIL") != std::string::npos);
}
