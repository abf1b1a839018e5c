// End-to-end CLI tests through a subprocess: exit-code contract, CSV header
// layout, config-file precedence, determinism, and the cached-spectrum path.

#include <sys/stat.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "decoh/run.hpp"
#include "doctest.h"

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  std::string cmd = std::string(DECOH_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  CliResult r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string fresh_dir() {
  char tmpl[] = "/tmp/decoh_cli_XXXXXX";
  char* d = mkdtemp(tmpl);
  REQUIRE(d != nullptr);
  return std::string(d);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Everything but the wall-time line, which is exempt from determinism.
std::string without_walltime(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# walltime_s:", 0) == 0) continue;
    out << line << '\n';
  }
  return out.str();
}

}  // namespace

TEST_CASE("help and version") {
  CHECK(run_cli("--help").code == 0);
  auto r = run_cli("--help");
  CHECK(r.out.find("qm-run") != std::string::npos);
  CHECK(r.out.find("reproduce") != std::string::npos);
  auto v = run_cli("--version");
  CHECK(v.code == 0);
  CHECK(v.out.find("0.1.0") != std::string::npos);
}

TEST_CASE("invalid invocations exit 2") {
  CHECK(run_cli("no-such-mode").code == 2);
  CHECK(run_cli("qm-run --no-such-flag 1").code == 2);
  CHECK(run_cli("qm-run --omega0 -1 --out " + fresh_dir()).code == 2);
  CHECK(run_cli("qft-evolve --dt 0 --out " + fresh_dir()).code == 2);
  CHECK(run_cli("rate-fit --out " + fresh_dir()).code == 2);  // input required
  CHECK(run_cli("reproduce fig9 --out " + fresh_dir()).code == 2);
  CHECK(run_cli("sweep --h-values 1,1 --out " + fresh_dir()).code == 2);  // duplicates
}

TEST_CASE("oscillator run: header bytes, series round-trip") {
  auto dir = fresh_dir();
  auto r = run_cli("qm-run --n-bath 4 --t-max 5 --n-out 11 --coupling 0.05 --out " + dir);
  CHECK(r.code == 0);
  auto text = slurp(dir + "/qm_run.csv");
  CHECK(text.rfind("# decoh 0.1.0\n", 0) == 0);
  CHECK(text.find("# mode: qm-run\n") != std::string::npos);
  CHECK(text.find("\nt,Δ_S,S_S,S_E,S_SE,S_total,S_master\n") != std::string::npos);

  auto s = decoh::read_series(dir + "/qm_run.csv");
  CHECK(s.mode == "qm-run");
  CHECK(s.params.at("n_bath").get<long long>() == 4);
  CHECK(s.params.at("t_max").get<double>() == 5.0);
  REQUIRE(s.columns.size() == 7);
  REQUIRE(s.rows.size() == 11);
  CHECK(s.col("t").front() == 0.0);
  // The initial state is pure up to eigensolver round-off in the exact series.
  CHECK(s.col("S_S").front() >= 0.0);
  CHECK(s.col("S_S").front() <= 1e-12);
  CHECK(s.col("Δ_S").front() == doctest::Approx(1.0).epsilon(1e-9));
  // The walltime stat is a header line, not a column.
  CHECK(s.meta.count("walltime_s") == 1);
}

TEST_CASE("stationary run is deterministic and feeds the spectrum cache") {
  auto d1 = fresh_dir();
  auto d2 = fresh_dir();
  std::string base = "qft-stationary --n-grid 1024 --lambda-factor 20 ";
  CHECK(run_cli(base + "--out " + d1).code == 0);
  CHECK(run_cli(base + "--out " + d2).code == 0);
  auto t1 = slurp(d1 + "/stationary.csv");
  auto t2 = slurp(d2 + "/stationary.csv");
  CHECK(without_walltime(t1) == without_walltime(t2));
  CHECK(t1.find("\nk0,ReM,ImM,ρ,F\n") != std::string::npos);

  // Mismatched physical parameters must be rejected…
  auto bad = run_cli("qft-evolve --h 2 --n-t 200 --spectrum " + d1 +
                     "/stationary.csv --out " + fresh_dir());
  CHECK(bad.code == 2);
  // …and a matching dump must reproduce a fresh run byte-for-byte (modulo
  // the config echo, which records the spectrum path).
  auto dc = fresh_dir();
  auto df = fresh_dir();
  auto cached = run_cli("qft-evolve --n-t 200 --spectrum " + d1 + "/stationary.csv --out " + dc);
  auto fresh = run_cli("qft-evolve --n-t 200 --n-grid 1024 --lambda-factor 20 --out " + df);
  CHECK(cached.code == 0);
  CHECK(fresh.code == 0);
  auto strip_config = [](const std::string& text) {
    std::istringstream in(text);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("# config:", 0) == 0 || line.rfind("# walltime_s:", 0) == 0) continue;
      out << line << '\n';
    }
    return out.str();
  };
  CHECK(strip_config(slurp(dc + "/evolve.csv")) == strip_config(slurp(df + "/evolve.csv")));
  CHECK(slurp(dc + "/evolve.csv").find("\nt,Δ,S\n") != std::string::npos);
}

TEST_CASE("rate-fit pipeline and numerical-failure exit code") {
  auto de = fresh_dir();
  auto r = run_cli("qft-evolve --n-t 600 --n-grid 1024 --lambda-factor 20 --out " + de);
  CHECK(r.code == 0);
  auto dr = fresh_dir();
  auto fit = run_cli("rate-fit --input " + de + "/evolve.csv --out " + dr);
  CHECK(fit.code == 0);
  auto s = decoh::read_series(dr + "/rate_fit.csv");
  CHECK(s.mode == "rate-fit");
  REQUIRE(s.columns.size() == 2);
  CHECK(s.columns[1] == "ln|δΔ|");
  double gamma = std::stod(s.meta.at("gamma_dec"));
  CHECK(gamma > 0.2);
  CHECK(gamma < 0.7);

  // A free evolution never leaves the pure state: nothing to fit, exit 3.
  auto df = fresh_dir();
  CHECK(run_cli("qft-evolve --h 0 --n-t 200 --n-grid 512 --out " + df).code == 0);
  auto flat = run_cli("rate-fit --input " + df + "/evolve.csv --out " + fresh_dir());
  CHECK(flat.code == 3);

  // Wrong input mode is a validation error, not a numerical one.
  CHECK(run_cli("rate-fit --input " + dr + "/rate_fit.csv --out " + fresh_dir()).code == 2);
}

TEST_CASE("config file merges under command-line overrides") {
  auto dir = fresh_dir();
  std::string cfg_path = dir + "/cfg.json";
  {
    std::ofstream cfg(cfg_path);
    cfg << R"({"n_bath": 4, "t_max": 5.0, "n_out": 6, "coupling": 0.05})";
  }
  auto r = run_cli("qm-run --config " + cfg_path + " --t-max 7 --out " + dir);
  CHECK(r.code == 0);
  auto s = decoh::read_series(dir + "/qm_run.csv");
  CHECK(s.params.at("t_max").get<double>() == 7.0);  // flag wins
  CHECK(s.params.at("n_bath").get<long long>() == 4);
  CHECK(s.params.at("n_out").get<long long>() == 6);
  CHECK(s.rows.size() == 6);
  CHECK(s.col("t").back() == 7.0);

  CHECK(run_cli("qm-run --config /nonexistent.json --out " + dir).code == 2);
  std::string bad_path = dir + "/bad.json";
  {
    std::ofstream cfg(bad_path);
    cfg << "{not json";
  }
  CHECK(run_cli("qm-run --config " + bad_path + " --out " + dir).code == 2);
  std::string unknown_key = dir + "/unk.json";
  {
    std::ofstream cfg(unknown_key);
    cfg << R"({"bogus_key": 1})";
  }
  CHECK(run_cli("qm-run --config " + unknown_key + " --out " + dir).code == 2);
}

TEST_CASE("sweep writes the table and per-point dumps") {
  auto dir = fresh_dir();
  auto r = run_cli("sweep --h-values 0,1 --n-grid 1024 --lambda-factor 20 --out " + dir);
  CHECK(r.code == 0);
  auto s = decoh::read_series(dir + "/sweep.csv");
  REQUIRE(s.columns.size() == 3);
  CHECK(s.columns[1] == "Δ_ms");
  CHECK(s.columns[2] == "S_ms");
  REQUIRE(s.rows.size() == 2);
  // h = 0 is the free thermal point; entropy grows with coupling.
  CHECK(s.rows[0][1] == doctest::Approx(2.9453077094501231).epsilon(1e-9));
  CHECK(s.rows[1][2] > s.rows[0][2]);
  struct stat st;
  CHECK(stat((dir + "/stationary_h0.csv").c_str(), &st) == 0);
  CHECK(stat((dir + "/stationary_h1.csv").c_str(), &st) == 0);
}
